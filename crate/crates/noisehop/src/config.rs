//! JSON run configuration. `schema_version` must be [`SCHEMA_VERSION`];
//! unknown fields are rejected so typos surface as config errors.

use std::path::{Path, PathBuf};

use noisehop_core::models::{effective_rates, ChainSpec, ModelFamily};
use noisehop_core::operators::SiteKind;
use noisehop_core::stochastic::{LinkOrder, TrajectoryConfig};
use noisehop_core::lindblad::Method;
use noisehop_core::C64;
use serde::{Deserialize, Serialize};

use crate::error::{at, RunError, RunResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub chain: ChainConfig,
    pub initial_state: InitialState,
    pub engine: Engine,
    pub time: TimeGrid,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectorySettings>,
    /// 1-based inclusive site windows `[k, l]` for `E_{k,l}`.
    #[serde(default)]
    pub windows: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<SnapshotConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_cut: Option<usize>,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub compare: CompareSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat: Option<HeatConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typicality: Option<TypicalityConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub sites: usize,
    #[serde(default)]
    pub kind: SiteKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u8>,
    #[serde(default)]
    pub family: Family,
    #[serde(default)]
    pub gamma: Rates,
    #[serde(default)]
    pub gamma_r: Rates,
    #[serde(default)]
    pub gamma_g: Rates,
    #[serde(default)]
    pub g: Rates,
    #[serde(default)]
    pub v: Rates,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "one")]
    pub spacing: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKindConfig {
    #[default]
    Tls,
    Boson,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Simple,
    Bosonic,
    Dephasing,
}

impl From<Family> for ModelFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Simple => ModelFamily::SimpleTls,
            Family::Bosonic => ModelFamily::Bosonic,
            Family::Dephasing => ModelFamily::DephasingTls,
        }
    }
}

/// A single value applied everywhere, or one value per link/site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rates {
    Uniform(f64),
    Each(Vec<f64>),
}

impl Default for Rates {
    fn default() -> Self {
        Rates::Uniform(0.0)
    }
}

impl Rates {
    pub fn expand(&self, len: usize, path: &str) -> RunResult<Vec<f64>> {
        match self {
            Rates::Uniform(x) => Ok(vec![*x; len]),
            Rates::Each(v) if v.len() == len => Ok(v.clone()),
            Rates::Each(v) => Err(RunError::config(path, format!("expected {len} values, got {}", v.len()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `|1_site⟩`, 1-based.
    SingleExcitation { site: usize },
    /// Projector on one occupation pattern, site 1 first.
    BasisDiagonal { occupations: Vec<u8> },
    /// Diagonal mixture with explicit weights.
    DiagonalMixture { states: Vec<Vec<u8>>, weights: Vec<f64> },
    /// Diagonal state with random weights over the listed excitation sectors
    /// (all sectors when omitted).
    RandomDiagonal {
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sectors: Option<Vec<usize>>,
    },
    /// Mixture of phase states with angles `θ_j`.
    PhaseMixture { thetas: Vec<f64> },
    /// Phase mixture whose initial `α_j` carry the sign `signs[b]` on
    /// consecutive blocks of `width` sites.
    PhaseBlocks { width: usize, signs: Vec<f64> },
    DarkState,
    /// Uncorrelated product of `diag(1 − n_j, n_j)`; the classical engine never
    /// builds its density matrix.
    ProductPopulations { values: Vec<f64> },
    /// Density matrix in the snapshot text format.
    MatrixFile { path: PathBuf },
}

impl InitialState {
    pub fn is_pure(&self) -> bool {
        matches!(
            self,
            InitialState::SingleExcitation { .. } | InitialState::BasisDiagonal { .. } | InitialState::DarkState
        )
    }

    /// Phase angles when the state is a phase mixture.
    pub fn thetas(&self, sites: usize) -> Option<Vec<f64>> {
        match self {
            InitialState::PhaseMixture { thetas } => Some(thetas.clone()),
            InitialState::PhaseBlocks { width, signs } => {
                let s: Vec<f64> = (0..sites)
                    .map(|j| signs.get(j / (*width).max(1)).copied().unwrap_or(1.0))
                    .collect();
                Some(noisehop_core::observables::thetas_for_alpha_signs(&s))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Lindblad,
    Stochastic,
    Oracle,
    Compare,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    #[default]
    T,
    /// `Λ = γ_ref t` with `γ_ref` the largest effective link rate.
    Lambda,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub unit: TimeUnit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    /// Number of points including the start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Rk4,
    Adaptive,
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "IntegratorConfig::default_rtol")]
    pub rtol: f64,
    #[serde(default = "IntegratorConfig::default_atol")]
    pub atol: f64,
    #[serde(default = "IntegratorConfig::default_tol")]
    pub tol: f64,
}

impl IntegratorConfig {
    fn default_rtol() -> f64 {
        1e-10
    }
    fn default_atol() -> f64 {
        1e-12
    }
    fn default_tol() -> f64 {
        1e-13
    }

    pub fn method(&self) -> Method {
        match self.method {
            MethodName::Rk4 => Method::Rk4 { dt: self.dt },
            MethodName::Adaptive => Method::Adaptive {
                rtol: self.rtol,
                atol: self.atol,
            },
            MethodName::Exponential => Method::Exponential { tol: self.tol },
        }
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: MethodName::default(),
            dt: None,
            rtol: Self::default_rtol(),
            atol: Self::default_atol(),
            tol: Self::default_tol(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderConfig {
    Fixed,
    #[default]
    Shuffled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySettings {
    pub count: usize,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub order: OrderConfig,
}

impl TrajectorySettings {
    pub fn core(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            dt: self.dt,
            count: self.count,
            seed: self.seed,
            order: match self.order {
                OrderConfig::Fixed => LinkOrder::Fixed,
                OrderConfig::Shuffled => LinkOrder::Shuffled,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    /// Write every `every`-th grid point (the last point is always written).
    pub every: usize,
}

/// State the `distance` column is measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    #[default]
    None,
    Initial,
    ThetaAsymptote,
    Symmetrized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSettings {
    #[serde(default = "CompareSettings::default_tol")]
    pub tol: f64,
    /// Absolute floor of the stochastic acceptance threshold.
    #[serde(default = "CompareSettings::default_floor")]
    pub floor: f64,
}

impl CompareSettings {
    fn default_tol() -> f64 {
        1e-8
    }
    fn default_floor() -> f64 {
        5e-3
    }
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            tol: Self::default_tol(),
            floor: Self::default_floor(),
        }
    }
}

/// Continuum heat equation against the lattice walk, on the run's time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatConfig {
    /// Initial temperature per site.
    pub temperatures: Vec<f64>,
    /// Coarse-graining block width.
    #[serde(default = "HeatConfig::default_block")]
    pub block: usize,
    #[serde(default = "HeatConfig::default_tol")]
    pub tol: f64,
}

impl HeatConfig {
    fn default_block() -> usize {
        4
    }
    fn default_tol() -> f64 {
        0.05
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypicalityConfig {
    pub m: Vec<usize>,
}

/// Everything derived from a validated config.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub spec: ChainSpec,
    pub family: ModelFamily,
    pub rates: Vec<f64>,
    pub gamma_ref: f64,
    pub times: Vec<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> RunResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            RunError::config(path, e.into_inner().to_string())
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn chain_spec(&self) -> RunResult<ChainSpec> {
        let c = &self.chain;
        if c.sites < 2 {
            return Err(RunError::config("chain.sites", "must be >= 2"));
        }
        let links = c.sites - 1;
        let site_kind = match (c.kind, c.n_max) {
            (SiteKindConfig::Tls, None) => SiteKind::Tls,
            (SiteKindConfig::Tls, Some(_)) => {
                return Err(RunError::config("chain.n_max", "only meaningful for boson sites"))
            }
            (SiteKindConfig::Boson, Some(n_max)) => SiteKind::Boson { n_max },
            (SiteKindConfig::Boson, None) => return Err(RunError::config("chain.n_max", "required for boson sites")),
        };
        let complex = |v: Vec<f64>| v.into_iter().map(|x| C64::new(x, 0.0)).collect();
        let spec = ChainSpec {
            site_count: c.sites,
            site_kind,
            gamma: c.gamma.expand(links, "chain.gamma")?,
            gamma_r: c.gamma_r.expand(c.sites, "chain.gamma_r")?,
            gamma_g: c.gamma_g.expand(links, "chain.gamma_g")?,
            g: complex(c.g.expand(links, "chain.g")?),
            v: complex(c.v.expand(links, "chain.v")?),
            omega: c.omega,
            spacing: c.spacing,
        };
        spec.validate().map_err(at("chain"))?;
        Ok(spec)
    }

    pub fn resolve(&self) -> RunResult<Resolved> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(RunError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let spec = self.chain_spec()?;
        let family: ModelFamily = self.chain.family.into();
        let rates = effective_rates(family, &spec);
        let gamma_ref = rates.iter().copied().fold(0.0, f64::max);
        let times = self.times(gamma_ref)?;
        let n = spec.site_count;
        for (i, w) in self.windows.iter().enumerate() {
            if !(1 < w[0] && w[0] <= w[1] && w[1] < n) {
                return Err(RunError::config(
                    format!("windows[{i}]"),
                    format!("window [{}, {}] must satisfy 1 < k <= l < {n}", w[0], w[1]),
                ));
            }
        }
        if let Some(cut) = self.entropy_cut {
            if cut == 0 || cut >= n {
                return Err(RunError::config("entropy_cut", format!("must lie in 1..{n}")));
            }
        }
        if let Some(s) = &self.snapshots {
            if s.every == 0 {
                return Err(RunError::config("snapshots.every", "must be >= 1"));
            }
        }
        match (self.engine, &self.trajectories) {
            (Engine::Stochastic, None) => {
                return Err(RunError::config("trajectories", "required by the stochastic engine"))
            }
            (_, Some(t)) => t.core().validate().map_err(at("trajectories"))?,
            _ => {}
        }
        if matches!(self.engine, Engine::Stochastic) && !self.initial_state.is_pure() {
            return Err(RunError::config(
                "initial_state",
                "the stochastic engine needs a pure initial state",
            ));
        }
        if self.reference == Reference::ThetaAsymptote && self.initial_state.thetas(n).is_none() {
            return Err(RunError::config("reference", "theta_asymptote needs a phase-mixture initial state"));
        }
        if let InitialState::PhaseBlocks { width, .. } = self.initial_state {
            if width == 0 {
                return Err(RunError::config("initial_state.width", "must be >= 1"));
            }
        }
        if let Some(h) = &self.heat {
            if h.temperatures.len() != n {
                return Err(RunError::config(
                    "heat.temperatures",
                    format!("expected {n} values, got {}", h.temperatures.len()),
                ));
            }
            if h.block == 0 {
                return Err(RunError::config("heat.block", "must be >= 1"));
            }
        }
        if let Some(t) = &self.typicality {
            if let Some(&m) = t.m.iter().find(|&&m| m == 0 || 2 * m > n) {
                return Err(RunError::config("typicality.m", format!("{m} must satisfy 1 <= m <= {n}/2")));
            }
        }
        Ok(Resolved {
            spec,
            family,
            rates,
            gamma_ref,
            times,
        })
    }

    fn times(&self, gamma_ref: f64) -> RunResult<Vec<f64>> {
        let g = &self.time;
        let raw = match (&g.values, g.end, g.points) {
            (Some(v), None, None) => v.clone(),
            (None, Some(end), Some(points)) => {
                if points < 2 {
                    return Err(RunError::config("time.points", "must be >= 2"));
                }
                if !(end.is_finite() && end > 0.0) {
                    return Err(RunError::config("time.end", "must be finite and > 0"));
                }
                (0..points).map(|i| end * i as f64 / (points - 1) as f64).collect()
            }
            _ => return Err(RunError::config("time", "give either `values` or both `end` and `points`")),
        };
        if raw.is_empty() {
            return Err(RunError::config("time.values", "time grid is empty"));
        }
        if raw.windows(2).any(|w| !(w[1] > w[0])) || raw.iter().any(|t| !t.is_finite()) {
            return Err(RunError::config("time.values", "must be finite and strictly increasing"));
        }
        match g.unit {
            TimeUnit::T => Ok(raw),
            TimeUnit::Lambda if gamma_ref > 0.0 => Ok(raw.into_iter().map(|l| l / gamma_ref).collect()),
            TimeUnit::Lambda => Err(RunError::config("time.unit", "lambda axis needs a nonzero rate")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"{
        "schema_version": 1,
        "chain": {"sites": 4, "gamma": 1.0},
        "initial_state": {"type": "single_excitation", "site": 1},
        "engine": "lindblad",
        "time": {"end": 2.0, "points": 5}
    }"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = RunConfig::from_json(BASIC).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.spec.gamma, vec![1.0; 3]);
        assert_eq!(r.times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = BASIC.replace("\"gamma\": 1.0", "\"gamma\": [1.0, 2.0]");
        let e = RunConfig::from_json(&bad).unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("chain.gamma"), "{e}");
        let bad = BASIC.replace("\"sites\": 4", "\"sites\": 4, \"gama\": 1");
        let e = RunConfig::from_json(&bad).unwrap_err();
        assert!(e.to_string().contains("chain"), "{e}");
        assert_eq!(e.exit_code(), 1);
        let bad = BASIC.replace("\"schema_version\": 1", "\"schema_version\": 7");
        let e = RunConfig::from_json(&bad).unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("schema_version"));
    }

    #[test]
    fn lambda_axis_and_windows() {
        let cfg = BASIC
            .replace("\"gamma\": 1.0", "\"gamma\": [1.0, 2.0, 0.5]")
            .replace("\"points\": 5", "\"points\": 3, \"unit\": \"lambda\"");
        let r = RunConfig::from_json(&cfg).unwrap().resolve().unwrap();
        assert_eq!(r.times, vec![0.0, 0.5, 1.0]);
        let cfg = BASIC.replace("\"engine\"", "\"windows\": [[1, 2]], \"engine\"");
        let e = RunConfig::from_json(&cfg).unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("windows[0]"));
    }

    #[test]
    fn stochastic_requires_pure_state() {
        let cfg = BASIC
            .replace("\"lindblad\"", "\"stochastic\", \"trajectories\": {\"count\": 4, \"dt\": 0.01}")
            .replace(r#"{"type": "single_excitation", "site": 1}"#, r#"{"type": "phase_mixture", "thetas": [0,0,0,0]}"#);
        let e = RunConfig::from_json(&cfg).unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("initial_state"));
    }
}
