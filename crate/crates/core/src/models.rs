//! Chain parameterization and the three model families: the simple noisy
//! hopping chain of TLS, its bosonic counterpart, and the dephasing chain with
//! local and common reservoirs plus coherent hopping.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operators::{
    build_space, ConservingOperator, HilbertSpace, Monomial, OperatorMatrix, SectorBasis, SiteKind,
};

const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    pub site_count: usize,
    pub site_kind: SiteKind,
    /// Hopping diffusion rate per link, length `site_count - 1`.
    pub gamma: Vec<f64>,
    /// Local dephasing rate per site, length `site_count`.
    pub gamma_r: Vec<f64>,
    /// Common-reservoir rate per link.
    pub gamma_g: Vec<f64>,
    /// Coherent hopping amplitude per link.
    pub g: Vec<C64>,
    /// Reservoir-mediated hopping amplitude per link.
    pub v: Vec<C64>,
    pub omega: f64,
    pub spacing: f64,
}

impl ChainSpec {
    /// Homogeneous noisy-hopping chain with every other parameter zeroed.
    pub fn uniform(site_count: usize, site_kind: SiteKind, gamma: f64) -> Self {
        let links = site_count.saturating_sub(1);
        Self {
            site_count,
            site_kind,
            gamma: vec![gamma; links],
            gamma_r: vec![0.0; site_count],
            gamma_g: vec![0.0; links],
            g: vec![C64::new(0.0, 0.0); links],
            v: vec![C64::new(0.0, 0.0); links],
            omega: 1.0,
            spacing: 1.0,
        }
    }

    pub fn links(&self) -> usize {
        self.site_count.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.site_count < 2 {
            return Err(Error::Config(format!(
                "site_count must be >= 2, got {}",
                self.site_count
            )));
        }
        let links = self.links();
        let check_len = |name: &str, len: usize, want: usize| {
            if len != want {
                Err(Error::Config(format!("{name} has length {len}, expected {want}")))
            } else {
                Ok(())
            }
        };
        check_len("gamma", self.gamma.len(), links)?;
        check_len("gamma_r", self.gamma_r.len(), self.site_count)?;
        check_len("gamma_g", self.gamma_g.len(), links)?;
        check_len("g", self.g.len(), links)?;
        check_len("v", self.v.len(), links)?;
        for (name, rates) in [
            ("gamma", &self.gamma),
            ("gamma_r", &self.gamma_r),
            ("gamma_g", &self.gamma_g),
        ] {
            if let Some((i, r)) = rates.iter().enumerate().find(|(_, r)| !(r.is_finite() && **r >= 0.0)) {
                return Err(Error::Config(format!("{name}[{i}] = {r} must be finite and >= 0")));
            }
        }
        for (name, amps) in [("g", &self.g), ("v", &self.v)] {
            if amps.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::Config(format!("{name} contains non-finite values")));
            }
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::Config(format!("omega must be > 0, got {}", self.omega)));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::Config(format!("spacing must be > 0, got {}", self.spacing)));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<HilbertSpace> {
        HilbertSpace::unbounded(self.site_count, self.site_kind)
    }

    /// Largest hopping diffusion rate; the reference for the `Λ = γt` axis.
    pub fn gamma_ref(&self) -> f64 {
        self.gamma.iter().copied().fold(0.0, f64::max)
    }

    /// 64-bit FNV-1a digest of every parameter, for run metadata.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&(self.site_count as u64).to_le_bytes());
        match self.site_kind {
            SiteKind::Tls => eat(&[0]),
            SiteKind::Boson { n_max } => eat(&[1, n_max]),
        }
        for xs in [&self.gamma, &self.gamma_r, &self.gamma_g] {
            for x in xs.iter() {
                eat(&x.to_bits().to_le_bytes());
            }
        }
        for zs in [&self.g, &self.v] {
            for z in zs.iter() {
                eat(&z.re.to_bits().to_le_bytes());
                eat(&z.im.to_bits().to_le_bytes());
            }
        }
        eat(&self.omega.to_bits().to_le_bytes());
        eat(&self.spacing.to_bits().to_le_bytes());
        h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelFamily {
    SimpleTls,
    Bosonic,
    DephasingTls,
}

/// Which noise channel a dissipator comes from; indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    Hop(usize),
    Local(usize),
    Common(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipatorTerm {
    pub rate: f64,
    pub jump: ConservingOperator,
    pub channel: ChannelKind,
}

/// Basis-independent description of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelTerms {
    pub family: ModelFamily,
    pub spec: ChainSpec,
    pub dissipators: Vec<DissipatorTerm>,
    pub hamiltonian: ConservingOperator,
}

#[derive(Clone, Debug)]
pub struct Dissipator {
    pub rate: f64,
    pub jump: OperatorMatrix,
    pub channel: ChannelKind,
}

#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub family: ModelFamily,
    pub spec: ChainSpec,
    pub dissipators: Vec<Dissipator>,
    pub hamiltonian: OperatorMatrix,
}

fn hop_jump(j: usize) -> ConservingOperator {
    // (c†_j + c†_{j+1})(c_j + c_{j+1})
    let mut op = ConservingOperator::new();
    op.push(ONE, Monomial::Number(j))
        .push(ONE, Monomial::Number(j + 1))
        .push(ONE, Monomial::Hop { to: j, from: j + 1 })
        .push(ONE, Monomial::Hop { to: j + 1, from: j });
    op
}

/// Effective population hopping rate per link: `γ_j` for the hopping
/// families, `γ^G_j |v_j|²` for the dephasing chain.
pub fn effective_rates(family: ModelFamily, spec: &ChainSpec) -> Vec<f64> {
    match family {
        ModelFamily::SimpleTls | ModelFamily::Bosonic => spec.gamma.clone(),
        ModelFamily::DephasingTls => spec
            .gamma_g
            .iter()
            .zip(&spec.v)
            .map(|(r, v)| r * v.norm_sqr())
            .collect(),
    }
}

fn ensure_zero(builder: &'static str, spec: &ChainSpec) -> Result<()> {
    let nonzero = |xs: &[f64]| xs.iter().any(|&x| x != 0.0);
    let nonzero_c = |xs: &[C64]| xs.iter().any(|&x| x != C64::new(0.0, 0.0));
    for (param, bad) in [
        ("gamma_r", nonzero(&spec.gamma_r)),
        ("gamma_g", nonzero(&spec.gamma_g)),
        ("g", nonzero_c(&spec.g)),
        ("v", nonzero_c(&spec.v)),
    ] {
        if bad {
            return Err(Error::WrongBuilder { builder, param });
        }
    }
    Ok(())
}

impl ModelTerms {
    pub fn simple_tls(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        if spec.site_kind != SiteKind::Tls {
            return Err(Error::WrongBuilder {
                builder: "build_simple_tls",
                param: "site_kind",
            });
        }
        ensure_zero("build_simple_tls", spec)?;
        Ok(Self::hopping(ModelFamily::SimpleTls, spec))
    }

    pub fn bosonic(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        if !matches!(spec.site_kind, SiteKind::Boson { .. }) {
            return Err(Error::WrongBuilder {
                builder: "build_bosonic",
                param: "site_kind",
            });
        }
        ensure_zero("build_bosonic", spec)?;
        Ok(Self::hopping(ModelFamily::Bosonic, spec))
    }

    pub fn dephasing_tls(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        if spec.site_kind != SiteKind::Tls {
            return Err(Error::WrongBuilder {
                builder: "build_dephasing_tls",
                param: "site_kind",
            });
        }
        if spec.gamma.iter().any(|&x| x != 0.0) {
            return Err(Error::WrongBuilder {
                builder: "build_dephasing_tls",
                param: "gamma",
            });
        }
        let mut dissipators = Vec::new();
        for (i, &rate) in spec.gamma_r.iter().enumerate() {
            if rate > 0.0 {
                let mut jump = ConservingOperator::new();
                jump.push(ONE, Monomial::Number(i + 1));
                dissipators.push(DissipatorTerm {
                    rate,
                    jump,
                    channel: ChannelKind::Local(i + 1),
                });
            }
        }
        for (i, &rate) in spec.gamma_g.iter().enumerate() {
            if rate > 0.0 {
                let j = i + 1;
                let v = spec.v[i];
                let mut jump = ConservingOperator::new();
                jump.push(ONE, Monomial::Number(j))
                    .push(ONE, Monomial::Number(j + 1))
                    .push(v, Monomial::Hop { to: j, from: j + 1 })
                    .push(v.conj(), Monomial::Hop { to: j + 1, from: j });
                dissipators.push(DissipatorTerm {
                    rate,
                    jump,
                    channel: ChannelKind::Common(j),
                });
            }
        }
        let mut hamiltonian = ConservingOperator::new();
        for (i, &g) in spec.g.iter().enumerate() {
            let j = i + 1;
            hamiltonian
                .push(g, Monomial::Hop { to: j, from: j + 1 })
                .push(g.conj(), Monomial::Hop { to: j + 1, from: j });
        }
        Ok(Self {
            family: ModelFamily::DephasingTls,
            spec: spec.clone(),
            dissipators,
            hamiltonian,
        })
    }

    pub fn for_family(family: ModelFamily, spec: &ChainSpec) -> Result<Self> {
        match family {
            ModelFamily::SimpleTls => Self::simple_tls(spec),
            ModelFamily::Bosonic => Self::bosonic(spec),
            ModelFamily::DephasingTls => Self::dephasing_tls(spec),
        }
    }

    fn hopping(family: ModelFamily, spec: &ChainSpec) -> Self {
        let dissipators = spec
            .gamma
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 0.0)
            .map(|(i, &rate)| DissipatorTerm {
                rate,
                jump: hop_jump(i + 1),
                channel: ChannelKind::Hop(i + 1),
            })
            .collect();
        Self {
            family,
            spec: spec.clone(),
            dissipators,
            hamiltonian: ConservingOperator::new(),
        }
    }

    pub fn diffusion_rates(&self) -> Vec<f64> {
        effective_rates(self.family, &self.spec)
    }

    /// Realizes every operator on `basis`, which must be closed under
    /// excitation-conserving moves.
    pub fn realize(&self, basis: &Arc<SectorBasis>) -> Result<ModelInstance> {
        if basis.space().site_count() != self.spec.site_count || basis.space().kind() != self.spec.site_kind {
            return Err(Error::Shape("basis does not match the chain".into()));
        }
        let dissipators = self
            .dissipators
            .iter()
            .map(|d| {
                Ok(Dissipator {
                    rate: d.rate,
                    jump: d.jump.realize(basis)?,
                    channel: d.channel,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelInstance {
            family: self.family,
            spec: self.spec.clone(),
            dissipators,
            hamiltonian: self.hamiltonian.realize(basis)?,
        })
    }

    pub fn realize_full(&self) -> Result<ModelInstance> {
        let space = build_space(self.spec.site_count, self.spec.site_kind)?;
        self.realize(&Arc::new(SectorBasis::full(&space)?))
    }
}

pub fn build_simple_tls(spec: &ChainSpec) -> Result<ModelInstance> {
    ModelTerms::simple_tls(spec)?.realize_full()
}

pub fn build_bosonic(spec: &ChainSpec) -> Result<ModelInstance> {
    ModelTerms::bosonic(spec)?.realize_full()
}

pub fn build_dephasing_tls(spec: &ChainSpec) -> Result<ModelInstance> {
    ModelTerms::dephasing_tls(spec)?.realize_full()
}

impl ModelInstance {
    pub fn basis(&self) -> &Arc<SectorBasis> {
        self.hamiltonian.basis()
    }

    pub fn dim(&self) -> usize {
        self.basis().len()
    }

    /// `Σ γ_d ‖L_d‖²_∞ + 2 ‖V‖_∞`, a bound on the generator's rate scale.
    pub fn rate_scale(&self) -> f64 {
        let diss: f64 = self
            .dissipators
            .iter()
            .map(|d| {
                let n = d.jump.entries().norm_inf();
                d.rate * n * n
            })
            .sum();
        diss + 2.0 * self.hamiltonian.entries().norm_inf()
    }

    pub fn diffusion_rates(&self) -> Vec<f64> {
        effective_rates(self.family, &self.spec)
    }
}
