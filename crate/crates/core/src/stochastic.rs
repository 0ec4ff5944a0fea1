//! White-noise unraveling: each trajectory evolves a pure state under
//! `H(t) = Σ_j η_j(t) L_j − V` with independent Gaussian white noises, using
//! exact per-step unitaries (Stratonovich). The ensemble average of `ψψ†`
//! reproduces the master equation when `E[ΔW_j²] = 2γ_j dt`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lindblad::{check_grid, SeriesMeta, TimeSeries};
use crate::linalg::{self, cexp};
use crate::models::ModelInstance;
use crate::operators::{embed_vector, SectorBasis};
use crate::sparse::CsrMatrix;
use crate::state::{trace_distance, DensityMatrix, StateVector};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkOrder {
    Fixed,
    Shuffled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub count: usize,
    pub seed: u64,
    pub order: LinkOrder,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("trajectory dt must be > 0, got {}", self.dt)));
        }
        if self.count == 0 {
            return Err(Error::Config("trajectory count must be >= 1".into()));
        }
        Ok(())
    }
}

/// How `exp(−iθL)` is evaluated for one jump operator.
#[derive(Clone, Debug)]
enum LinkPropagator {
    /// `L² = cL`, so `exp(−iθL) = I + L (e^{−icθ} − 1)/c`.
    Projective { l: CsrMatrix, c: f64 },
    /// Spectral decomposition of a general Hermitian `L`.
    Spectral { vectors: DMatrix<C64>, values: DVector<f64> },
}

#[derive(Clone, Debug)]
struct Link {
    /// Standard deviation of `ΔW` per unit `sqrt(dt)`.
    sigma: f64,
    prop: LinkPropagator,
}

/// Precomputed per-model data for trajectory stepping.
#[derive(Clone, Debug)]
pub struct TrajectoryKernel {
    basis: Arc<SectorBasis>,
    links: Vec<Link>,
    /// Spectral data of `V` for the half-step `exp(iV h/2)`.
    unitary: Option<(DMatrix<C64>, DVector<f64>)>,
}

fn projective_constant(l: &CsrMatrix) -> Option<f64> {
    let l2 = l.matmul(l);
    let (mut best, mut at) = (0.0, None);
    for (r, c, v) in l.iter() {
        if v.norm() > best {
            best = v.norm();
            at = Some((r, c, v));
        }
    }
    let (r, c, v) = at?;
    let ratio = l2.get(r, c) / v;
    if ratio.im.abs() > 1e-12 || ratio.re <= 0.0 {
        return None;
    }
    let cst = ratio.re;
    let defect = l2.add_scaled(l, C64::new(-cst, 0.0)).max_abs();
    (defect < 1e-12 * best.max(1.0)).then_some(cst)
}

fn hermitian_eigen(m: &DMatrix<C64>) -> (DMatrix<C64>, DVector<f64>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    (eig.eigenvectors, eig.eigenvalues)
}

impl TrajectoryKernel {
    pub fn new(model: &ModelInstance) -> Self {
        let links = model
            .dissipators
            .iter()
            .map(|d| {
                let l = d.jump.entries().clone();
                let prop = match projective_constant(&l) {
                    Some(c) => LinkPropagator::Projective { l, c },
                    None => {
                        let (vectors, values) = hermitian_eigen(&l.to_dense());
                        LinkPropagator::Spectral { vectors, values }
                    }
                };
                Link {
                    sigma: libm::sqrt(2.0 * d.rate),
                    prop,
                }
            })
            .collect();
        let unitary = if model.hamiltonian.entries().nnz() > 0 {
            Some(hermitian_eigen(&model.hamiltonian.entries().to_dense()))
        } else {
            None
        };
        Self {
            basis: model.basis().clone(),
            links,
            unitary,
        }
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Whether link `i` uses the closed-form projector formula.
    pub fn is_projective(&self, i: usize) -> bool {
        matches!(self.links[i].prop, LinkPropagator::Projective { .. })
    }

    fn apply_link(&self, i: usize, theta: f64, psi: &mut [C64], scratch: &mut [C64]) {
        match &self.links[i].prop {
            LinkPropagator::Projective { l, c } => {
                l.mul_vec(psi, scratch);
                let f = (cexp(C64::new(0.0, -c * theta)) - 1.0) / *c;
                for (p, s) in psi.iter_mut().zip(scratch.iter()) {
                    *p += f * s;
                }
            }
            LinkPropagator::Spectral { vectors, values } => {
                spectral_apply(vectors, values, -theta, psi);
            }
        }
    }

    fn apply_unitary(&self, h: f64, psi: &mut [C64]) {
        if let Some((vectors, values)) = &self.unitary {
            spectral_apply(vectors, values, h, psi);
        }
    }
}

/// `ψ ← U diag(e^{iθλ}) U† ψ`.
fn spectral_apply(vectors: &DMatrix<C64>, values: &DVector<f64>, theta: f64, psi: &mut [C64]) {
    let x = DVector::from_column_slice(psi);
    let mut c = vectors.adjoint() * x;
    for (ci, &l) in c.iter_mut().zip(values.iter()) {
        *ci *= cexp(C64::new(0.0, theta * l));
    }
    let y = vectors * c;
    psi.copy_from_slice(y.as_slice());
}

/// Per-trajectory generator: a master seed and the trajectory index as the
/// ChaCha stream id.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn shuffle(order: &mut [usize], rng: &mut impl RngCore) {
    for i in (1..order.len()).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        order.swap(i, j);
    }
}

/// One step of length `dt`: half of the coherent part, every noisy link with
/// a fresh `ΔW ~ N(0, 2γ dt)`, then the other half.
pub fn trajectory_step(
    kernel: &TrajectoryKernel,
    psi: &mut [C64],
    dt: f64,
    order: LinkOrder,
    rng: &mut ChaCha8Rng,
) {
    let mut scratch = vec![ZERO; psi.len()];
    let mut idx: Vec<usize> = (0..kernel.links.len()).collect();
    step_with(kernel, psi, dt, order, rng, &mut idx, &mut scratch);
}

fn step_with(
    kernel: &TrajectoryKernel,
    psi: &mut [C64],
    dt: f64,
    order: LinkOrder,
    rng: &mut ChaCha8Rng,
    idx: &mut [usize],
    scratch: &mut [C64],
) {
    kernel.apply_unitary(0.5 * dt, psi);
    if order == LinkOrder::Shuffled {
        shuffle(idx, rng);
    }
    let sqdt = libm::sqrt(dt);
    for &i in idx.iter() {
        let z: f64 = StandardNormal.sample(rng);
        let dw = kernel.links[i].sigma * sqdt * z;
        kernel.apply_link(i, dw, psi, scratch);
    }
    kernel.apply_unitary(0.5 * dt, psi);
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    /// State at every grid point.
    pub states: Vec<Vec<C64>>,
    /// Largest deviation of `⟨N_total⟩` from its initial value.
    pub max_excitation_drift: f64,
    pub max_norm_drift: f64,
}

fn excitation(basis: &SectorBasis, psi: &[C64]) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(i, a)| a.norm_sqr() * basis.total(i) as f64)
        .sum()
}

/// Runs trajectory `index` of the ensemble over `times`.
pub fn run_trajectory(
    kernel: &TrajectoryKernel,
    psi0: &[C64],
    times: &[f64],
    cfg: &TrajectoryConfig,
    index: u64,
) -> TrajectoryRecord {
    let mut rng = trajectory_rng(cfg.seed, index);
    let mut psi = psi0.to_vec();
    let mut scratch = vec![ZERO; psi.len()];
    let mut idx: Vec<usize> = (0..kernel.links.len()).collect();
    let e0 = excitation(&kernel.basis, &psi);
    let mut states = Vec::with_capacity(times.len());
    states.push(psi.clone());
    let (mut de, mut dn) = (0.0f64, 0.0f64);
    for w in times.windows(2) {
        let n = libm::ceil((w[1] - w[0]) / cfg.dt).max(1.0) as usize;
        let h = (w[1] - w[0]) / n as f64;
        for _ in 0..n {
            step_with(kernel, &mut psi, h, cfg.order, &mut rng, &mut idx, &mut scratch);
        }
        de = de.max((excitation(&kernel.basis, &psi) - e0).abs());
        dn = dn.max((linalg::vec_norm(&psi) - 1.0).abs());
        states.push(psi.clone());
    }
    TrajectoryRecord {
        states,
        max_excitation_drift: de,
        max_norm_drift: dn,
    }
}

/// Running sums of `ψψ†` and of `|ψ_i ψ_j*|²` in trajectory order.
#[derive(Clone, Debug)]
pub struct EnsembleAccumulator {
    basis: Arc<SectorBasis>,
    count: usize,
    sum: Vec<DMatrix<C64>>,
    sum_sq: Vec<DMatrix<f64>>,
    max_excitation_drift: f64,
    max_norm_drift: f64,
}

impl EnsembleAccumulator {
    pub fn new(basis: Arc<SectorBasis>, points: usize) -> Self {
        let d = basis.len();
        Self {
            basis,
            count: 0,
            sum: vec![DMatrix::zeros(d, d); points],
            sum_sq: vec![DMatrix::zeros(d, d); points],
            max_excitation_drift: 0.0,
            max_norm_drift: 0.0,
        }
    }

    pub fn add(&mut self, rec: &TrajectoryRecord) {
        for ((s, q), psi) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(&rec.states) {
            let d = psi.len();
            for j in 0..d {
                let pj = psi[j].conj();
                for i in 0..d {
                    let v = psi[i] * pj;
                    s[(i, j)] += v;
                    q[(i, j)] += v.norm_sqr();
                }
            }
        }
        self.count += 1;
        self.max_excitation_drift = self.max_excitation_drift.max(rec.max_excitation_drift);
        self.max_norm_drift = self.max_norm_drift.max(rec.max_norm_drift);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn max_excitation_drift(&self) -> f64 {
        self.max_excitation_drift
    }

    /// Means and per-entry standard errors (complex entries count both parts).
    pub fn finish(self, times: &[f64], mut meta: SeriesMeta) -> Result<TimeSeries> {
        if self.count == 0 {
            return Err(Error::Config("ensemble has no trajectories".into()));
        }
        let m = self.count as f64;
        let mut states = Vec::with_capacity(self.sum.len());
        let mut stderr = Vec::with_capacity(self.sum.len());
        for (s, q) in self.sum.into_iter().zip(self.sum_sq) {
            let mean = s / C64::new(m, 0.0);
            let se = DMatrix::from_fn(mean.nrows(), mean.ncols(), |i, j| {
                if self.count < 2 {
                    return 0.0;
                }
                let var = (q[(i, j)] / m - mean[(i, j)].norm_sqr()).max(0.0) * m / (m - 1.0);
                libm::sqrt(var / m)
            });
            states.push(DensityMatrix::from_matrix(self.basis.clone(), mean)?);
            stderr.push(se);
        }
        meta.trajectories = Some(self.count);
        meta.max_trace_drift = meta.max_trace_drift.max(self.max_norm_drift * 2.0);
        Ok(TimeSeries {
            times: times.to_vec(),
            states,
            stderr: Some(stderr),
            meta,
        })
    }
}

/// Lifts `psi0` into the model's basis and checks its norm.
pub fn prepare_initial(model: &ModelInstance, psi0: &StateVector) -> Result<Vec<C64>> {
    let n = psi0.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidState(format!("initial state has norm {n}")));
    }
    if psi0.basis().same_as(model.basis()) {
        Ok(psi0.amps().to_vec())
    } else {
        embed_vector(psi0.basis(), model.basis(), psi0.amps())
    }
}

pub fn ensemble_meta(model: &ModelInstance, cfg: &TrajectoryConfig) -> SeriesMeta {
    SeriesMeta {
        method: String::from(match cfg.order {
            LinkOrder::Fixed => "stochastic-fixed",
            LinkOrder::Shuffled => "stochastic-shuffled",
        }),
        spec_fingerprint: model.spec.fingerprint(),
        steps: 0,
        max_trace_drift: 0.0,
        min_eigenvalue: 0.0,
        positivity_flag: false,
        seed: Some(cfg.seed),
        trajectories: Some(cfg.count),
    }
}

/// Sequential ensemble mean over trajectories `0..cfg.count`.
pub fn ensemble_average(
    psi0: &StateVector,
    model: &ModelInstance,
    times: &[f64],
    cfg: &TrajectoryConfig,
) -> Result<TimeSeries> {
    cfg.validate()?;
    check_grid(times)?;
    let psi = prepare_initial(model, psi0)?;
    let kernel = TrajectoryKernel::new(model);
    let mut acc = EnsembleAccumulator::new(kernel.basis().clone(), times.len());
    for i in 0..cfg.count {
        acc.add(&run_trajectory(&kernel, &psi, times, cfg, i as u64));
    }
    let steps = steps_per_run(times, cfg.dt);
    let mut meta = ensemble_meta(model, cfg);
    meta.steps = steps;
    acc.finish(times, meta)
}

pub fn steps_per_run(times: &[f64], dt: f64) -> u64 {
    times
        .windows(2)
        .map(|w| libm::ceil((w[1] - w[0]) / dt).max(1.0) as u64)
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub t: f64,
    pub distance: f64,
    /// Frobenius norm of the per-entry standard-error matrix.
    pub stderr: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub pass: bool,
}

/// Trace distance between an ensemble series and a reference series at
/// every grid point, judged against `max(3·stderr, floor)`.
pub fn convergence_report(stochastic: &TimeSeries, reference: &TimeSeries, floor: f64) -> Result<ConvergenceReport> {
    if stochastic.times.len() != reference.times.len()
        || stochastic
            .times
            .iter()
            .zip(&reference.times)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::Shape("time grids differ".into()));
    }
    let mut rows = Vec::with_capacity(stochastic.times.len());
    for (i, &t) in stochastic.times.iter().enumerate() {
        let distance = trace_distance(&stochastic.states[i], &reference.states[i])?;
        let stderr = stochastic
            .stderr
            .as_ref()
            .map(|s| s[i].iter().map(|x| x * x).sum::<f64>())
            .map(libm::sqrt)
            .unwrap_or(0.0);
        let threshold = (3.0 * stderr).max(floor);
        rows.push(ConvergenceRow {
            t,
            distance,
            stderr,
            threshold,
            pass: distance < threshold || distance == 0.0,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ConvergenceReport { rows, pass })
}
