//! Executes a run configuration and writes its artifacts:
//! `timeseries.csv`, `summary.json`, `manifest.json`, `timing.json`, plus
//! `compare.csv`, `heat.csv` and `snapshots/` when requested.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use noisehop_core::lindblad::{evolve_with, SeriesMeta};
use noisehop_core::models::{ModelFamily, ModelInstance, ModelTerms};
use noisehop_core::observables::{
    extract, positivity_excess, symmetrized_prediction, theta_asymptote, thermal_summary, typicality_check,
    ExtractOptions, ObservableRecord,
};
use noisehop_core::operators::{HilbertSpace, SectorBasis, SiteKind};
use noisehop_core::oracle::{
    block_average, fluxes, fourier_heat, occupation, DiffusionWalk, HeatOptions,
};
use noisehop_core::state::{DensityMatrix, StateVector};
use noisehop_core::stochastic::{convergence_report, trajectory_rng};
use noisehop_core::C64;
use rand_core::RngCore;
use serde_json::{json, Value};

use crate::config::{Engine, HeatConfig, InitialState, Reference, Resolved, RunConfig};
use crate::ensemble::parallel_ensemble;
use crate::error::{at, RunError, RunResult};
use crate::io::{self, num, opt, Table};

/// Largest density matrix the runner will hold.
pub const MAX_DENSITY_DIM: usize = 4096;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub out: PathBuf,
    /// `None` when the run carries no pass/fail checks.
    pub verdict: Option<bool>,
    pub summary: Value,
    pub final_populations: Vec<f64>,
    pub final_time: f64,
}

/// Builds the initial density matrix on the smallest sector union holding it.
pub fn initial_density(init: &InitialState, space: &HilbertSpace) -> RunResult<DensityMatrix> {
    let path = "initial_state";
    let n = space.site_count();
    let rho = match init {
        InitialState::SingleExcitation { .. } | InitialState::BasisDiagonal { .. } | InitialState::DarkState => {
            initial_pure(init, space)?.to_density()
        }
        InitialState::DiagonalMixture { states, weights } => {
            if states.len() != weights.len() || states.is_empty() {
                return Err(RunError::config(path, "states and weights must be nonempty and of equal length"));
            }
            let mut ks: Vec<usize> = states.iter().map(|s| s.iter().map(|&o| o as usize).sum()).collect();
            ks.sort_unstable();
            ks.dedup();
            let basis = Arc::new(SectorBasis::union(space, &ks).map_err(at(path))?);
            check_dim(basis.len())?;
            let mut w = vec![0.0; basis.len()];
            for (s, &x) in states.iter().zip(weights) {
                let i = basis
                    .index_of(s)
                    .ok_or_else(|| RunError::config(path, format!("state {s:?} does not fit the chain")))?;
                w[i] += x;
            }
            DensityMatrix::diagonal(basis, &w).map_err(|e| RunError::config(path, e.to_string()))?
        }
        InitialState::RandomDiagonal { seed, sectors } => {
            let ks: Vec<usize> = sectors.clone().unwrap_or_else(|| (0..=space.max_total()).collect());
            let basis = Arc::new(SectorBasis::union(space, &ks).map_err(at(path))?);
            check_dim(basis.len())?;
            let mut rng = trajectory_rng(*seed, u64::MAX);
            let raw: Vec<f64> = (0..basis.len())
                .map(|_| ((rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64)
                .collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / s).collect();
            DensityMatrix::diagonal(basis, &w).map_err(at(path))?
        }
        InitialState::PhaseMixture { .. } | InitialState::PhaseBlocks { .. } => {
            let thetas = init.thetas(n).unwrap();
            DensityMatrix::phase_mixture(space, &thetas).map_err(at(path))?
        }
        InitialState::MatrixFile { path: file } => {
            let text = std::fs::read_to_string(file).map_err(|e| RunError::io(file, e))?;
            io::parse_snapshot(&text, space)?.1
        }
        InitialState::ProductPopulations { values } => {
            if space.kind() != SiteKind::Tls {
                return Err(RunError::config(path, "product populations need two-level sites"));
            }
            if values.len() != n || values.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(RunError::config(path, format!("need {n} populations in [0, 1]")));
            }
            check_dim(space.dim().min(u128::from(u64::MAX)) as usize)?;
            let basis = Arc::new(SectorBasis::full(space).map_err(at(path))?);
            let w: Vec<f64> = (0..basis.len())
                .map(|i| {
                    basis
                        .label(i)
                        .iter()
                        .zip(values)
                        .map(|(&o, &p)| if o == 1 { p } else { 1.0 - p })
                        .product()
                })
                .collect();
            DensityMatrix::diagonal(basis, &w).map_err(at(path))?
        }
    };
    check_dim(rho.dim())?;
    Ok(rho)
}

pub fn initial_pure(init: &InitialState, space: &HilbertSpace) -> RunResult<StateVector> {
    let path = "initial_state";
    match init {
        InitialState::SingleExcitation { site } => StateVector::single_excitation(space, *site).map_err(at(path)),
        InitialState::BasisDiagonal { occupations } => StateVector::basis_state(space, occupations).map_err(at(path)),
        InitialState::DarkState => StateVector::dark_state(space).map_err(at(path)),
        _ => Err(RunError::config(path, "not a pure state")),
    }
}

fn check_dim(d: usize) -> RunResult<()> {
    if d > MAX_DENSITY_DIM {
        return Err(noisehop_core::Error::Resource {
            what: "density matrix dimension",
            requested: d as u128,
            cap: MAX_DENSITY_DIM as u128,
        }
        .into());
    }
    Ok(())
}

/// Initial populations for the classical engine, without building a
/// density matrix when the state is a product.
fn initial_populations(init: &InitialState, space: &HilbertSpace) -> RunResult<(Vec<f64>, Vec<C64>)> {
    if let InitialState::ProductPopulations { values } = init {
        if values.len() != space.site_count() {
            return Err(RunError::config("initial_state.values", "one population per site"));
        }
        return Ok((values.clone(), vec![C64::new(0.0, 0.0); values.len()]));
    }
    let rho = initial_density(init, space)?;
    Ok((rho.populations(), noisehop_core::observables::alpha_1d(&rho)))
}

struct Row {
    rec: ObservableRecord,
    se: Option<f64>,
}

fn header(n: usize, windows: &[[usize; 2]]) -> Vec<String> {
    let mut h = vec!["t".to_string(), "lambda".to_string()];
    h.extend((1..=n).map(|j| format!("n_{j}")));
    for j in 1..=n {
        h.push(format!("re_alpha_{j}"));
        h.push(format!("im_alpha_{j}"));
    }
    h.extend((1..n).map(|j| format!("S_{j}")));
    h.extend(windows.iter().map(|w| format!("E_{}_{}", w[0], w[1])));
    for c in ["distance", "entropy", "min_eigenvalue", "se"] {
        h.push(c.to_string());
    }
    h
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn render_row(row: &Row, gamma_ref: f64) -> Vec<String> {
    let r = &row.rec;
    let mut v = vec![num(r.time), num(gamma_ref * r.time)];
    v.extend(r.populations.iter().map(|&x| num(x)));
    for a in &r.alpha {
        v.push(num(a.re));
        v.push(num(a.im));
    }
    v.extend(r.fluxes.iter().map(|&x| num(x)));
    v.extend(r.windows.iter().map(|(_, e)| num(*e)));
    v.push(opt(r.distance));
    v.push(opt(r.entropy));
    v.push(opt(finite(r.min_eigenvalue)));
    v.push(opt(row.se));
    v
}

struct Context<'a> {
    cfg: &'a RunConfig,
    res: &'a Resolved,
    windows: Vec<(usize, usize)>,
    reference: Option<DensityMatrix>,
}

impl Context<'_> {
    fn record(&self, t: f64, rho: &DensityMatrix) -> RunResult<ObservableRecord> {
        let opts = ExtractOptions {
            rates: &self.res.rates,
            windows: &self.windows,
            with_alpha2: false,
            reference: self.reference.as_ref(),
            entropy_cut: self.cfg.entropy_cut,
        };
        Ok(extract(rho, t, &opts)?)
    }
}

fn snapshot_due(cfg: &RunConfig, i: usize, last: usize) -> bool {
    cfg.snapshots.as_ref().is_some_and(|s| i % s.every == 0 || i == last)
}

struct Snapshots(BTreeMap<String, String>);

impl Snapshots {
    fn add(&mut self, i: usize, t: f64, rho: &DensityMatrix) {
        self.0.insert(format!("snapshots/rho_{i:05}.txt"), io::render_snapshot(t, rho));
    }
}

fn oracle_rows(ctx: &Context<'_>, n0: &[f64], a0: &[C64]) -> RunResult<Vec<Row>> {
    let walk = DiffusionWalk::new(&ctx.res.rates)?;
    let mut rows = Vec::with_capacity(ctx.res.times.len());
    for &t in &ctx.res.times {
        let n = walk.evolve(n0, t)?;
        let alpha = walk.evolve_complex(a0, t)?;
        let windows = ctx
            .windows
            .iter()
            .map(|&(k, l)| ((k, l), n[k - 1..l].iter().sum()))
            .collect();
        rows.push(Row {
            rec: ObservableRecord {
                time: t,
                fluxes: fluxes(&n, &ctx.res.rates)?,
                populations: n,
                alpha,
                alpha2: None,
                windows,
                distance: None,
                entropy: None,
                min_eigenvalue: f64::NAN,
            },
            se: None,
        });
    }
    Ok(rows)
}

struct DensityRun {
    excitation_drift: Option<f64>,
    rows: Vec<Row>,
    /// Every snapshot, kept only when asked for.
    states: Vec<DensityMatrix>,
    last: DensityMatrix,
    meta: SeriesMeta,
    positivity: f64,
}

fn lindblad_run(
    ctx: &Context<'_>,
    model: &ModelInstance,
    rho0: &DensityMatrix,
    snaps: &mut Snapshots,
    keep: bool,
) -> RunResult<DensityRun> {
    let times = &ctx.res.times;
    let last_i = times.len() - 1;
    let mut rows = Vec::with_capacity(times.len());
    let mut states = Vec::new();
    let mut last = None;
    let mut positivity = f64::NEG_INFINITY;
    let mut i = 0;
    let mut failure = None;
    let meta = evolve_with(model, rho0, times, ctx.cfg.integrator.method(), |t, rho| {
        match ctx.record(t, rho) {
            Ok(rec) => rows.push(Row { rec, se: None }),
            Err(e) => failure = Some(e),
        }
        positivity = positivity.max(positivity_excess(rho));
        if snapshot_due(ctx.cfg, i, last_i) {
            snaps.add(i, t, rho);
        }
        if keep {
            states.push(rho.clone());
        }
        if i == last_i {
            last = Some(rho.clone());
        }
        i += 1;
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(DensityRun {
        excitation_drift: None,
        rows,
        states,
        last: last.expect("grid is nonempty"),
        meta,
        positivity,
    })
}

fn stochastic_run(
    ctx: &Context<'_>,
    model: &ModelInstance,
    psi0: &StateVector,
    snaps: Option<&mut Snapshots>,
) -> RunResult<(DensityRun, noisehop_core::lindblad::TimeSeries)> {
    let tcfg = ctx.cfg.trajectories.as_ref().expect("validated").core();
    let ens = parallel_ensemble(psi0, model, &ctx.res.times, &tcfg)?;
    let drift = ens.max_excitation_drift;
    let ts = ens.series;
    let last_i = ts.times.len() - 1;
    let mut rows = Vec::with_capacity(ts.times.len());
    let mut positivity = f64::NEG_INFINITY;
    let mut snaps = snaps;
    for (i, (&t, rho)) in ts.times.iter().zip(&ts.states).enumerate() {
        let se = ts.stderr.as_ref().map(|s| s[i].norm());
        rows.push(Row {
            rec: ctx.record(t, rho)?,
            se,
        });
        positivity = positivity.max(positivity_excess(rho));
        if let Some(s) = snaps.as_deref_mut() {
            if snapshot_due(ctx.cfg, i, last_i) {
                s.add(i, t, rho);
            }
        }
    }
    let run = DensityRun {
        excitation_drift: Some(drift),
        rows,
        states: Vec::new(),
        last: ts.states[last_i].clone(),
        meta: ts.meta.clone(),
        positivity,
    };
    Ok((run, ts))
}

fn heat_check(h: &HeatConfig, res: &Resolved) -> RunResult<(Table, Value)> {
    let opts = HeatOptions {
        omega: res.spec.omega,
        spacing: res.spec.spacing,
        dt: None,
    };
    let n0: Vec<f64> = h.temperatures.iter().map(|&t| occupation(t, opts.omega)).collect();
    let walk = DiffusionWalk::new(&res.rates)?;
    let blocks = block_average(&n0, h.block).len();
    let mut cols = vec!["t".to_string(), "energy".to_string(), "rel_error".to_string()];
    cols.extend((1..=blocks).map(|b| format!("pde_{b}")));
    cols.extend((1..=blocks).map(|b| format!("micro_{b}")));
    let mut table = Table::new(io::HEAT_SCHEMA, cols);
    let mut temps = h.temperatures.clone();
    let mut prev_t = res.times[0];
    let mut state = fourier_heat(&temps, &res.rates, &opts, 0.0).map_err(at("heat"))?;
    let e0 = state.total_energy(opts.spacing);
    let (mut worst_rel, mut worst_drift) = (0.0f64, 0.0f64);
    for &t in &res.times {
        if t > prev_t {
            state = fourier_heat(&temps, &res.rates, &opts, t - prev_t)?;
            temps = state.temperature.clone();
            prev_t = t;
        }
        let pde: Vec<f64> = state.energy.iter().map(|u| u / opts.omega).collect();
        let micro = walk.evolve(&n0, t)?;
        let (bp, bm) = (block_average(&pde, h.block), block_average(&micro, h.block));
        let mean = bm.iter().sum::<f64>() / bm.len() as f64;
        let spread = bm.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        let diff = bp.iter().zip(&bm).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let rel = if spread > 0.0 { diff / spread } else { 0.0 };
        let energy = state.total_energy(opts.spacing);
        worst_rel = worst_rel.max(rel);
        worst_drift = worst_drift.max((energy - e0).abs());
        let mut row = vec![num(t), num(energy), num(rel)];
        row.extend(bp.iter().map(|&x| num(x)));
        row.extend(bm.iter().map(|&x| num(x)));
        table.push(row);
    }
    let pass = worst_rel <= h.tol && worst_drift < 1e-8;
    Ok((
        table,
        json!({
            "max_rel_error": worst_rel,
            "max_energy_drift": worst_drift,
            "tol": h.tol,
            "pass": pass,
        }),
    ))
}

fn meta_json(meta: &SeriesMeta) -> Value {
    json!({
        "method": meta.method,
        "spec_fingerprint": format!("{:016x}", meta.spec_fingerprint),
        "steps": meta.steps,
        "max_trace_drift": meta.max_trace_drift,
        "min_eigenvalue": finite(meta.min_eigenvalue),
        "positivity_flag": meta.positivity_flag,
        "seed": meta.seed,
        "trajectories": meta.trajectories,
    })
}

fn and(v: Option<bool>, x: bool) -> Option<bool> {
    Some(v.unwrap_or(true) && x)
}

pub fn run(cfg: &RunConfig, out: &Path) -> RunResult<RunOutcome> {
    let started = Instant::now();
    let res = cfg.resolve()?;
    let space = res.spec.space().map_err(at("chain"))?;
    let n = res.spec.site_count;
    let ctx_windows: Vec<(usize, usize)> = cfg.windows.iter().map(|w| (w[0], w[1])).collect();
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    let mut summary = serde_json::Map::new();
    let mut verdict: Option<bool> = None;
    let mut snaps = Snapshots(BTreeMap::new());
    let mut meta: Option<SeriesMeta> = None;

    let (n0, a0) = initial_populations(&cfg.initial_state, &space)?;
    let oracle_walk = DiffusionWalk::new(&res.rates)?;

    let needs_density = !matches!(cfg.engine, Engine::Oracle);
    let rho0 = if needs_density || cfg.reference != Reference::None {
        Some(initial_density(&cfg.initial_state, &space)?)
    } else {
        None
    };
    let reference = match cfg.reference {
        Reference::None => None,
        Reference::Initial => rho0.clone(),
        Reference::Symmetrized => Some(symmetrized_prediction(rho0.as_ref().unwrap()).map_err(at("reference"))?),
        Reference::ThetaAsymptote => {
            let thetas = cfg.initial_state.thetas(n).unwrap();
            Some(theta_asymptote(&space, &thetas).map_err(at("reference"))?.1)
        }
    };
    let ctx = Context {
        cfg,
        res: &res,
        windows: ctx_windows,
        reference,
    };
    let model = match &rho0 {
        Some(rho) if needs_density => Some(
            ModelTerms::for_family(res.family, &res.spec)
                .and_then(|t| t.realize(rho.basis()))
                .map_err(at("chain"))?,
        ),
        _ => None,
    };

    let mut final_state: Option<DensityMatrix> = None;
    let rows = match cfg.engine {
        Engine::Oracle => oracle_rows(&ctx, &n0, &a0)?,
        Engine::Lindblad => {
            let r = lindblad_run(&ctx, model.as_ref().unwrap(), rho0.as_ref().unwrap(), &mut snaps, false)?;
            summary.insert("max_positivity_excess".into(), json!(r.positivity));
            meta = Some(r.meta);
            final_state = Some(r.last);
            r.rows
        }
        Engine::Stochastic => {
            let psi0 = initial_pure(&cfg.initial_state, &space)?;
            let (r, _) = stochastic_run(&ctx, model.as_ref().unwrap(), &psi0, Some(&mut snaps))?;
            summary.insert("max_positivity_excess".into(), json!(r.positivity));
            summary.insert("max_excitation_drift".into(), json!(r.excitation_drift));
            meta = Some(r.meta);
            final_state = Some(r.last);
            r.rows
        }
        Engine::Compare => {
            let model = model.as_ref().unwrap();
            let r = lindblad_run(&ctx, model, rho0.as_ref().unwrap(), &mut snaps, cfg.trajectories.is_some())?;
            let oracle = oracle_rows(&ctx, &n0, &a0)?;
            let check_alpha = res.family != ModelFamily::DephasingTls;
            let stoch = match &cfg.trajectories {
                Some(_) => {
                    let psi0 = initial_pure(&cfg.initial_state, &space)?;
                    let (_, ts) = stochastic_run(&ctx, model, &psi0, None)?;
                    let reference = noisehop_core::lindblad::TimeSeries {
                        times: res.times.clone(),
                        states: r.states.clone(),
                        stderr: None,
                        meta: r.meta.clone(),
                    };
                    Some(convergence_report(&ts, &reference, cfg.compare.floor)?)
                }
                None => None,
            };
            let mut table = Table::new(
                io::COMPARE_SCHEMA,
                ["t", "max_abs_population", "max_abs_alpha", "trace_distance", "threshold", "pass"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            );
            let mut all = true;
            let (mut worst_pop, mut worst_alpha) = (0.0f64, 0.0f64);
            for (i, (a, b)) in r.rows.iter().zip(&oracle).enumerate() {
                let dp = max_abs(&a.rec.populations, &b.rec.populations);
                let da = check_alpha.then(|| {
                    a.rec
                        .alpha
                        .iter()
                        .zip(&b.rec.alpha)
                        .map(|(x, y)| (x - y).norm())
                        .fold(0.0, f64::max)
                });
                let mut pass = dp < cfg.compare.tol && da.is_none_or(|d| d < cfg.compare.tol);
                let (dist, thr) = match &stoch {
                    Some(rep) => {
                        pass &= rep.rows[i].pass;
                        (Some(rep.rows[i].distance), Some(rep.rows[i].threshold))
                    }
                    None => (None, None),
                };
                worst_pop = worst_pop.max(dp);
                worst_alpha = worst_alpha.max(da.unwrap_or(0.0));
                all &= pass;
                table.push(vec![num(a.rec.time), num(dp), opt(da), opt(dist), opt(thr), pass.to_string()]);
            }
            files.insert("compare.csv".into(), table.render());
            summary.insert(
                "compare".into(),
                json!({
                    "max_abs_population": worst_pop,
                    "max_abs_alpha": check_alpha.then_some(worst_alpha),
                    "tol": cfg.compare.tol,
                    "stochastic_pass": stoch.as_ref().map(|s| s.pass),
                    "pass": all,
                }),
            );
            verdict = and(verdict, all);
            summary.insert("max_positivity_excess".into(), json!(r.positivity));
            meta = Some(r.meta);
            final_state = Some(r.last);
            r.rows
        }
    };

    // distance of the populations from the pure-diffusion prediction
    let mut oracle_dev = 0.0f64;
    for row in &rows {
        let n_oracle = oracle_walk.evolve(&n0, row.rec.time)?;
        oracle_dev = oracle_dev.max(max_abs(&row.rec.populations, &n_oracle));
    }
    summary.insert("max_oracle_deviation".into(), json!(oracle_dev));
    let se_max = rows.iter().filter_map(|r| r.se).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    summary.insert("max_se".into(), json!(se_max));

    let mut table = Table::new(io::TIMESERIES_SCHEMA, header(n, &cfg.windows));
    for r in &rows {
        table.push(render_row(r, res.gamma_ref));
    }
    files.insert("timeseries.csv".into(), table.render());

    let last = rows.last().expect("grid is nonempty");
    let final_populations = last.rec.populations.clone();
    let windows: Vec<(usize, usize)> = cfg.windows.iter().map(|w| (w[0], w[1])).collect();
    let thermal = thermal_summary(&final_populations, res.spec.omega, &windows)?;
    summary.insert(
        "thermal".into(),
        json!({
            "n_bar": thermal.n_bar,
            "beta": finite(thermal.beta),
            "infinite_beta": thermal.infinite_beta,
            "temperature": finite(thermal.temperature),
            "specific_heat": thermal.specific_heat,
            "window_temperatures": thermal.window_temperatures.iter()
                .map(|((k, l), t)| json!({"window": [k, l], "temperature": t}))
                .collect::<Vec<_>>(),
        }),
    );
    if let Some(d) = last.rec.distance {
        summary.insert("final_distance".into(), json!(d));
    }

    if let Some(tc) = &cfg.typicality {
        let rho = final_state
            .as_ref()
            .ok_or_else(|| RunError::config("typicality", "needs a density-matrix engine"))?;
        let mut reports = Vec::new();
        for &m in &tc.m {
            let rep = typicality_check(rho, m).map_err(at("typicality"))?;
            verdict = and(verdict, rep.pass);
            reports.push(json!({
                "m": m, "distance": rep.distance, "bound": rep.bound, "pass": rep.pass,
                "n_bar": rep.n_bar, "beta": finite(rep.beta),
            }));
        }
        summary.insert("typicality".into(), Value::Array(reports));
    }

    if let Some(h) = &cfg.heat {
        let (t, s) = heat_check(h, &res)?;
        verdict = and(verdict, s["pass"].as_bool().unwrap_or(false));
        files.insert("heat.csv".into(), t.render());
        summary.insert("heat".into(), s);
    }
    summary.insert("verdict".into(), json!(verdict));
    let summary = Value::Object(summary);
    files.insert(
        "summary.json".into(),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    );
    files.extend(snaps.0);

    for (name, body) in &files {
        io::write_file(&out.join(name), body)?;
    }
    let hashes: BTreeMap<&String, String> = files.iter().map(|(k, v)| (k, io::sha256_hex(v.as_bytes()))).collect();
    let config_json = serde_json::to_value(cfg).expect("config serializes");
    let manifest = json!({
        "schema": io::MANIFEST_SCHEMA,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "core_version": noisehop_core::VERSION,
        "config": config_json,
        "config_sha256": io::sha256_hex(cfg.to_json().as_bytes()),
        "engine": cfg.engine,
        "seed": cfg.trajectories.as_ref().map(|t| t.seed),
        "spec_fingerprint": format!("{:016x}", res.spec.fingerprint()),
        "series": meta.as_ref().map(meta_json),
        "files": hashes,
        "verdict": verdict,
    });
    io::write_file(
        &out.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;
    let timing = json!({
        "wall_seconds": started.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
    });
    io::write_file(&out.join("timing.json"), &(serde_json::to_string_pretty(&timing).unwrap() + "\n"))?;

    Ok(RunOutcome {
        out: out.to_path_buf(),
        verdict,
        summary,
        final_time: last.rec.time,
        final_populations,
    })
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
