//! Master-equation engine.
//!
//! The generator is
//! `dρ/dt = i[V, ρ] + Σ_d γ_d (2 L_d ρ L_d† − L_d†L_d ρ − ρ L_d†L_d)`.
//! Because every operator conserves the excitation number, each block
//! `ρ_{kk'}` between sectors `k` and `k'` evolves on its own:
//! `dX/dt = P_k X + X P_{k'}† + Σ 2γ L_k X L_{k'}†` with `P = iV − Σ γ L†L`.
//! Only blocks that start nonzero are carried, and only those with `k ≤ k'`
//! (the rest follow by Hermiticity).

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, expv, KrylovOptions, LinearOp};
use crate::models::ModelInstance;
use crate::operators::SectorBasis;
use crate::sparse::{cabs, CsrMatrix};
use crate::state::{DensityMatrix, POSITIVITY_TOL};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Largest basis for which snapshot positivity is checked on the whole
/// matrix; above it only the sector-diagonal blocks are diagonalized.
const FULL_EIGEN_DIM: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Classical RK4; `None` picks `0.01 / rate_scale`.
    Rk4 { dt: Option<f64> },
    /// Dormand–Prince 5(4) with mixed error control.
    Adaptive { rtol: f64, atol: f64 },
    /// Krylov propagation of each block between grid points.
    Exponential { tol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk4 { dt: None }
    }
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4 { .. } => "rk4",
            Method::Adaptive { .. } => "adaptive",
            Method::Exponential { .. } => "exponential",
        }
    }
}

#[derive(Clone, Debug)]
struct SectorOps {
    indices: Vec<usize>,
    p: CsrMatrix,
    p_adj: CsrMatrix,
    jumps: Vec<CsrMatrix>,
    jumps_adj: Vec<CsrMatrix>,
}

/// Block-decomposed generator of one model on one basis.
#[derive(Clone, Debug)]
pub struct Generator {
    basis: Arc<SectorBasis>,
    rates: Vec<f64>,
    sectors: Vec<SectorOps>,
    rate_scale: f64,
}

impl Generator {
    pub fn new(model: &ModelInstance) -> Self {
        let basis = model.basis().clone();
        let rates: Vec<f64> = model.dissipators.iter().map(|d| d.rate).collect();
        let mut sectors = Vec::new();
        for &k in basis.counts() {
            let indices = basis.indices_with_total(k);
            if indices.is_empty() {
                continue;
            }
            let v = model.hamiltonian.entries().submatrix(&indices, &indices);
            let mut p = v.scale(C64::new(0.0, 1.0));
            let mut jumps = Vec::new();
            for d in &model.dissipators {
                let l = d.jump.entries().submatrix(&indices, &indices);
                let ldl = l.adjoint().matmul(&l);
                p = p.add_scaled(&ldl, C64::new(-d.rate, 0.0));
                jumps.push(l);
            }
            let jumps_adj = jumps.iter().map(|l| l.adjoint()).collect();
            sectors.push(SectorOps {
                indices,
                p_adj: p.adjoint(),
                p,
                jumps,
                jumps_adj,
            });
        }
        Self {
            basis,
            rates,
            sectors,
            rate_scale: model.rate_scale(),
        }
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    fn block_op(&self, a: usize, b: usize) -> BlockOp<'_> {
        let sa = &self.sectors[a];
        let sb = &self.sectors[b];
        let mut bound = sa.p.norm_inf() + sb.p.norm_inf();
        for (i, &r) in self.rates.iter().enumerate() {
            bound += 2.0 * r * sa.jumps[i].norm_inf() * sb.jumps[i].norm_inf();
        }
        BlockOp {
            gen: self,
            a,
            b,
            bound,
        }
    }

    fn apply_block(&self, a: usize, b: usize, x: &[C64], y: &mut [C64]) {
        let sa = &self.sectors[a];
        let sb = &self.sectors[b];
        let (da, db) = (sa.indices.len(), sb.indices.len());
        let xm = DMatrix::from_column_slice(da, db, x);
        let mut out = sa.p.mul_dense(&xm);
        out += CsrMatrix::dense_mul(&xm, &sb.p_adj);
        for (i, &r) in self.rates.iter().enumerate() {
            let right = CsrMatrix::dense_mul(&xm, &sb.jumps_adj[i]);
            let both = sa.jumps[i].mul_dense(&right);
            out += both * C64::new(2.0 * r, 0.0);
        }
        y.copy_from_slice(out.as_slice());
    }

    fn split(&self, rho: &DensityMatrix) -> Blocks {
        let m = rho.matrix();
        let mut pairs = Vec::new();
        let mut data = Vec::new();
        for a in 0..self.sectors.len() {
            for b in a..self.sectors.len() {
                let ia = &self.sectors[a].indices;
                let ib = &self.sectors[b].indices;
                let mut x = Vec::with_capacity(ia.len() * ib.len());
                for &j in ib {
                    for &i in ia {
                        x.push(m[(i, j)]);
                    }
                }
                if x.iter().any(|z| *z != ZERO) {
                    pairs.push((a, b));
                    data.push(x);
                }
            }
        }
        Blocks { pairs, data }
    }

    fn assemble(&self, blocks: &Blocks) -> DMatrix<C64> {
        let n = self.basis.len();
        let mut m = DMatrix::zeros(n, n);
        for (&(a, b), x) in blocks.pairs.iter().zip(&blocks.data) {
            let ia = &self.sectors[a].indices;
            let ib = &self.sectors[b].indices;
            let da = ia.len();
            for (q, &j) in ib.iter().enumerate() {
                for (p, &i) in ia.iter().enumerate() {
                    let v = x[p + da * q];
                    m[(i, j)] = v;
                    if a != b {
                        m[(j, i)] = v.conj();
                    }
                }
            }
        }
        m
    }

    fn derivative(&self, blocks: &Blocks, x: &[Vec<C64>]) -> Vec<Vec<C64>> {
        blocks
            .pairs
            .iter()
            .zip(x)
            .map(|(&(a, b), xb)| {
                let mut y = vec![ZERO; xb.len()];
                self.apply_block(a, b, xb, &mut y);
                y
            })
            .collect()
    }

    fn trace(&self, blocks: &Blocks, x: &[Vec<C64>]) -> C64 {
        let mut t = ZERO;
        for (&(a, b), xb) in blocks.pairs.iter().zip(x) {
            if a == b {
                let d = self.sectors[a].indices.len();
                for i in 0..d {
                    t += xb[i + d * i];
                }
            }
        }
        t
    }

    /// `dρ/dt` through the block route.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DMatrix<C64>> {
        let rho = rho.embed(&self.basis)?;
        let blocks = self.split(&rho);
        let d = Blocks {
            pairs: blocks.pairs.clone(),
            data: self.derivative(&blocks, &blocks.data),
        };
        Ok(self.assemble(&d))
    }
}

struct BlockOp<'a> {
    gen: &'a Generator,
    a: usize,
    b: usize,
    bound: f64,
}

impl LinearOp for BlockOp<'_> {
    fn dim(&self) -> usize {
        self.gen.sectors[self.a].indices.len() * self.gen.sectors[self.b].indices.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.gen.apply_block(self.a, self.b, x, y)
    }

    fn norm_bound(&self) -> f64 {
        self.bound
    }
}

#[derive(Clone, Debug)]
struct Blocks {
    pairs: Vec<(usize, usize)>,
    data: Vec<Vec<C64>>,
}

/// `dρ/dt` evaluated directly with dense operator products on the model's
/// basis. Independent of the block route used by the integrators.
pub fn apply_generator(model: &ModelInstance, rho: &DensityMatrix) -> Result<DMatrix<C64>> {
    if rho.dim() != model.dim() && !model.basis().same_as(rho.basis()) {
        let embedded = rho.embed(model.basis()).map_err(|_| {
            Error::Shape(format!(
                "state of dimension {} does not fit the model basis of dimension {}",
                rho.dim(),
                model.dim()
            ))
        })?;
        return apply_generator(model, &embedded);
    }
    if !model.basis().same_as(rho.basis()) {
        return Err(Error::Shape("state and model live on different bases".into()));
    }
    let r = rho.matrix();
    let v = model.hamiltonian.entries().to_dense();
    let i = C64::new(0.0, 1.0);
    let mut out = (&v * r - r * &v) * i;
    for d in &model.dissipators {
        let l = d.jump.entries().to_dense();
        let ld = l.adjoint();
        let ldl = &ld * &l;
        let term = (&l * r * &ld) * C64::new(2.0, 0.0) - &ldl * r - r * &ldl;
        out += term * C64::new(d.rate, 0.0);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMeta {
    pub method: String,
    pub spec_fingerprint: u64,
    pub steps: u64,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    /// Set when some snapshot had an eigenvalue below `-1e-8`.
    pub positivity_flag: bool,
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Per-entry standard errors, for ensemble estimates.
    pub stderr: Option<Vec<DMatrix<f64>>>,
    pub meta: SeriesMeta,
}

pub fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Config("time grid is empty".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config("time grid has non-finite entries".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn snapshot_min_eigenvalue(gen: &Generator, m: &DMatrix<C64>) -> f64 {
    if m.nrows() <= FULL_EIGEN_DIM {
        return linalg::min_hermitian_eigenvalue(m);
    }
    gen.sectors
        .iter()
        .map(|s| {
            let d = s.indices.len();
            let block = DMatrix::from_fn(d, d, |p, q| m[(s.indices[p], s.indices[q])]);
            linalg::min_hermitian_eigenvalue(&block)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Integrates from `times[0]` (where the state is `rho0`) through every grid
/// point, handing each snapshot to `observe`.
pub fn evolve_with(
    model: &ModelInstance,
    rho0: &DensityMatrix,
    times: &[f64],
    method: Method,
    mut observe: impl FnMut(f64, &DensityMatrix) -> Result<()>,
) -> Result<SeriesMeta> {
    check_grid(times)?;
    rho0.validate()?;
    let gen = Generator::new(model);
    let rho0 = rho0.embed(gen.basis())?;
    let mut blocks = gen.split(&rho0);
    let mut meta = SeriesMeta {
        method: String::from(method.name()),
        spec_fingerprint: model.spec.fingerprint(),
        steps: 0,
        max_trace_drift: 0.0,
        min_eigenvalue: f64::INFINITY,
        positivity_flag: false,
        seed: None,
        trajectories: None,
    };
    let mut emit = |blocks: &Blocks, t: f64, meta: &mut SeriesMeta| -> Result<()> {
        let m = gen.assemble(blocks);
        let lam = snapshot_min_eigenvalue(&gen, &m);
        meta.min_eigenvalue = meta.min_eigenvalue.min(lam);
        if lam < -POSITIVITY_TOL {
            meta.positivity_flag = true;
        }
        let rho = DensityMatrix::from_matrix(gen.basis().clone(), m)?;
        observe(t, &rho)
    };
    emit(&blocks, times[0], &mut meta)?;
    let mut adaptive_h = None;
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        match method {
            Method::Rk4 { dt } => {
                let dt = dt.unwrap_or(0.01 / gen.rate_scale.max(1e-300));
                if !(dt > 0.0) {
                    return Err(Error::Config(format!("rk4 step must be > 0, got {dt}")));
                }
                let n = libm::ceil((t1 - t0) / dt).max(1.0) as u64;
                let h = (t1 - t0) / n as f64;
                for _ in 0..n {
                    rk4_step(&gen, &mut blocks, h);
                    renormalize(&gen, &mut blocks, &mut meta);
                    meta.steps += 1;
                }
            }
            Method::Adaptive { rtol, atol } => {
                if !(rtol > 0.0 && atol > 0.0) {
                    return Err(Error::Config("adaptive tolerances must be > 0".into()));
                }
                let h0 = adaptive_h.unwrap_or(0.01 / gen.rate_scale.max(1e-300));
                adaptive_h = Some(dopri_interval(&gen, &mut blocks, t0, t1, h0, rtol, atol, &mut meta)?);
            }
            Method::Exponential { tol } => {
                let opts = KrylovOptions { dim: 30, tol };
                for (&(a, b), x) in blocks.pairs.iter().zip(blocks.data.iter_mut()) {
                    let op = gen.block_op(a, b);
                    *x = expv(&op, t1 - t0, x, opts)?;
                }
                renormalize(&gen, &mut blocks, &mut meta);
                meta.steps += 1;
            }
        }
        emit(&blocks, t1, &mut meta)?;
    }
    Ok(meta)
}

pub fn evolve(model: &ModelInstance, rho0: &DensityMatrix, times: &[f64], method: Method) -> Result<TimeSeries> {
    let mut states = Vec::with_capacity(times.len());
    let meta = evolve_with(model, rho0, times, method, |_, rho| {
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(TimeSeries {
        times: times.to_vec(),
        states,
        stderr: None,
        meta,
    })
}

fn renormalize(gen: &Generator, blocks: &mut Blocks, meta: &mut SeriesMeta) {
    let tr = gen.trace(blocks, &blocks.data);
    meta.max_trace_drift = meta.max_trace_drift.max(cabs(tr - ONE));
    if tr.re > 0.0 {
        let s = 1.0 / tr.re;
        for x in blocks.data.iter_mut() {
            for z in x.iter_mut() {
                *z *= s;
            }
        }
    }
}

fn combine(base: &[Vec<C64>], terms: &[(&[Vec<C64>], f64)]) -> Vec<Vec<C64>> {
    base.iter()
        .enumerate()
        .map(|(bi, xb)| {
            let mut out = xb.clone();
            for (k, c) in terms {
                if *c == 0.0 {
                    continue;
                }
                for (o, v) in out.iter_mut().zip(&k[bi]) {
                    *o += v * *c;
                }
            }
            out
        })
        .collect()
}

fn rk4_step(gen: &Generator, blocks: &mut Blocks, h: f64) {
    let y = &blocks.data;
    let k1 = gen.derivative(blocks, y);
    let y2 = combine(y, &[(&k1, h / 2.0)]);
    let k2 = gen.derivative(blocks, &y2);
    let y3 = combine(y, &[(&k2, h / 2.0)]);
    let k3 = gen.derivative(blocks, &y3);
    let y4 = combine(y, &[(&k3, h)]);
    let k4 = gen.derivative(blocks, &y4);
    let next = combine(y, &[(&k1, h / 6.0), (&k2, h / 3.0), (&k3, h / 3.0), (&k4, h / 6.0)]);
    blocks.data = next;
}

const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[allow(clippy::too_many_arguments)]
fn dopri_interval(
    gen: &Generator,
    blocks: &mut Blocks,
    t0: f64,
    t1: f64,
    h0: f64,
    rtol: f64,
    atol: f64,
    meta: &mut SeriesMeta,
) -> Result<f64> {
    let mut t = t0;
    let mut h = h0.min(t1 - t0);
    let mut last_h = h0;
    while t < t1 {
        let hmin = 1e-14 * t.abs().max(1.0);
        if h < hmin {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:.3e}, rtol = {rtol:.1e}, atol = {atol:.1e})"),
            });
        }
        let last = t + h >= t1;
        let step = if last { t1 - t } else { h };
        let y = blocks.data.clone();
        let mut ks: Vec<Vec<Vec<C64>>> = Vec::with_capacity(7);
        ks.push(gen.derivative(blocks, &y));
        for row in DP_A.iter() {
            let terms: Vec<(&[Vec<C64>], f64)> = ks
                .iter()
                .zip(row.iter())
                .map(|(k, &c)| (k.as_slice(), c * step))
                .collect();
            let yi = combine(&y, &terms);
            ks.push(gen.derivative(blocks, &yi));
        }
        let terms5: Vec<(&[Vec<C64>], f64)> = ks[..6]
            .iter()
            .zip(DP_A[5].iter())
            .map(|(k, &c)| (k.as_slice(), c * step))
            .collect();
        let y5 = combine(&y, &terms5);
        // error estimate: (b5 − b4)·k, with b5 = last row of A and b5[6] = 0
        let mut err = 0.0f64;
        for bi in 0..y.len() {
            for e in 0..y[bi].len() {
                let mut d = ZERO;
                for s in 0..7 {
                    let b5 = if s < 6 { DP_A[5][s] } else { 0.0 };
                    let c = b5 - DP_B4[s];
                    if c != 0.0 {
                        d += ks[s][bi][e] * c;
                    }
                }
                let scale = atol + rtol * cabs(y[bi][e]).max(cabs(y5[bi][e]));
                err = err.max(cabs(d * step) / scale);
            }
        }
        if err <= 1.0 {
            blocks.data = y5;
            renormalize(gen, blocks, meta);
            meta.steps += 1;
            t = if last { t1 } else { t + step };
            last_h = step;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0)
        };
        h = step * factor;
        if err <= 1.0 && last {
            break;
        }
    }
    Ok(last_h.max(h))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryOptions {
    pub horizon: f64,
    pub stall_tol: f64,
    pub method: Method,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            horizon: 1e4,
            stall_tol: 1e-10,
            method: Method::Exponential { tol: 1e-14 },
        }
    }
}

#[derive(Clone, Debug)]
pub struct StationaryReport {
    pub state: DensityMatrix,
    pub time: f64,
    /// Max-abs entry of `dρ/dt` at `time`.
    pub residual: f64,
    pub converged: bool,
    /// Relaxation time the run was required to reach.
    pub min_time: f64,
}

/// The relaxation lower bound `t` with `4γt sin²(π/(N+1)) = 20`, using the
/// slowest effective link rate. Zero when some link is disconnected.
pub fn relaxation_time(model: &ModelInstance) -> f64 {
    let rates = model.diffusion_rates();
    let gmin = rates.iter().copied().fold(f64::INFINITY, f64::min);
    if !(gmin > 0.0) || !gmin.is_finite() {
        return 0.0;
    }
    let s = libm::sin(core::f64::consts::PI / model.spec.site_count as f64);
    20.0 / (4.0 * gmin * s * s)
}

/// Evolves until `dρ/dt` stalls below `stall_tol`, never stopping before the
/// relaxation time; reaching the horizon first yields `converged = false`.
pub fn find_stationary(
    model: &ModelInstance,
    rho0: &DensityMatrix,
    opts: StationaryOptions,
) -> Result<StationaryReport> {
    let gen = Generator::new(model);
    let min_time = relaxation_time(model);
    let mut t = 0.0;
    let mut rho = rho0.embed(gen.basis())?;
    let mut chunk = if min_time > 0.0 {
        min_time
    } else {
        1.0 / gen.rate_scale.max(1e-300)
    };
    loop {
        let residual = linalg::max_abs(&gen.apply(&rho)?);
        if t >= min_time && residual < opts.stall_tol {
            return Ok(StationaryReport {
                state: rho,
                time: t,
                residual,
                converged: true,
                min_time,
            });
        }
        if t >= opts.horizon {
            return Ok(StationaryReport {
                state: rho,
                time: t,
                residual,
                converged: false,
                min_time,
            });
        }
        let target = (t + chunk).min(opts.horizon);
        let mut last = None;
        evolve_with(model, &rho, &[t, target], opts.method, |_, r| {
            last = Some(r.clone());
            Ok(())
        })?;
        rho = last.expect("two grid points give two snapshots");
        t = target;
        chunk *= 1.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_simple_tls, ChainSpec, ModelTerms};
    use crate::operators::{build_space, SiteKind};
    use crate::state::{trace_distance, StateVector};

    fn simple(n: usize, gamma: f64) -> ModelInstance {
        build_simple_tls(&ChainSpec::uniform(n, SiteKind::Tls, gamma)).unwrap()
    }

    fn random_state(basis: &Arc<SectorBasis>, seed: u64) -> DensityMatrix {
        let n = basis.len();
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::new(basis.clone(), m / tr).unwrap()
    }

    #[test]
    fn block_route_matches_dense_route() {
        let mut spec = ChainSpec::uniform(4, SiteKind::Tls, 0.0);
        spec.gamma_r = vec![0.3, 1.0, 0.0, 2.0];
        spec.gamma_g = vec![0.5, 0.7, 0.2];
        spec.v = vec![C64::new(1.0, 0.5), C64::new(0.2, -0.3), ONE];
        spec.g = vec![C64::new(0.4, 0.1), C64::new(0.0, 0.0), C64::new(-0.3, 0.9)];
        let m = ModelTerms::dephasing_tls(&spec).unwrap().realize_full().unwrap();
        let rho = random_state(m.basis(), 7);
        let a = apply_generator(&m, &rho).unwrap();
        let b = Generator::new(&m).apply(&rho).unwrap();
        assert!(linalg::max_abs(&(&a - &b)) < 1e-13);
        let tr = a.trace();
        assert!(tr.norm() < 1e-13);
        assert!(linalg::max_abs(&(&a - a.adjoint())) < 1e-13);
    }

    #[test]
    fn dark_state_and_mixed_sector_are_fixed_points() {
        let m = simple(5, 1.0);
        let s = build_space(5, SiteKind::Tls).unwrap();
        let dark = StateVector::dark_state(&s).unwrap().to_density();
        assert!(linalg::max_abs(&apply_generator(&m, &dark).unwrap()) < 1e-14);
        let sec = Arc::new(SectorBasis::sector(&s, 1).unwrap());
        let mixed = DensityMatrix::diagonal(sec, &[0.2; 5]).unwrap();
        assert!(linalg::max_abs(&apply_generator(&m, &mixed).unwrap()) < 1e-14);
    }

    #[test]
    fn two_site_rates() {
        let m = simple(2, 0.8);
        let s = build_space(2, SiteKind::Tls).unwrap();
        let rho = DensityMatrix::basis_projector(&s, &[1, 0]).unwrap();
        let d = apply_generator(&m, &rho).unwrap();
        let full = rho.embed(m.basis()).unwrap();
        let i1 = full.basis().index_of(&[1, 0]).unwrap();
        let i2 = full.basis().index_of(&[0, 1]).unwrap();
        assert!((d[(i1, i1)].re + 2.0 * 0.8).abs() < 1e-14);
        assert!((d[(i2, i2)].re - 2.0 * 0.8).abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch() {
        let m = simple(2, 1.0);
        let s3 = build_space(3, SiteKind::Tls).unwrap();
        let rho = DensityMatrix::basis_projector(&s3, &[1, 0, 0]).unwrap();
        assert!(matches!(apply_generator(&m, &rho), Err(Error::Shape(_))));
    }

    #[test]
    fn two_site_closed_form_all_methods() {
        let gamma = 1.0;
        let m = simple(2, gamma);
        let s = build_space(2, SiteKind::Tls).unwrap();
        let rho0 = DensityMatrix::basis_projector(&s, &[1, 0]).unwrap();
        let times: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
        for method in [
            Method::Rk4 { dt: None },
            Method::Adaptive { rtol: 1e-10, atol: 1e-12 },
            Method::Exponential { tol: 1e-14 },
        ] {
            let ts = evolve(&m, &rho0, &times, method).unwrap();
            for (t, rho) in ts.times.iter().zip(&ts.states) {
                let n1 = rho.populations()[0];
                let want = 0.5 * (1.0 + libm::exp(-4.0 * gamma * t));
                assert!((n1 - want).abs() < 1e-9, "{method:?} t={t}: {n1} vs {want}");
                rho.validate().unwrap();
            }
            assert!(ts.meta.max_trace_drift < 1e-9);
            assert!(!ts.meta.positivity_flag);
        }
    }

    #[test]
    fn dark_state_stays_put() {
        let m = simple(4, 1.0);
        let s = build_space(4, SiteKind::Tls).unwrap();
        let dark = StateVector::dark_state(&s).unwrap().to_density();
        let ts = evolve(&m, &dark, &[0.0, 1.0, 5.0], Method::default()).unwrap();
        for rho in &ts.states {
            assert!(trace_distance(rho, &dark).unwrap() < 1e-10);
        }
    }

    #[test]
    fn diagonal_states_stay_diagonal() {
        let m = simple(3, 1.0);
        let w: Vec<f64> = (0..8).map(|i| (i + 1) as f64 / 36.0).collect();
        let rho0 = DensityMatrix::diagonal(m.basis().clone(), &w).unwrap();
        let ts = evolve(&m, &rho0, &[0.0, 0.5, 2.0], Method::Exponential { tol: 1e-14 }).unwrap();
        for rho in &ts.states {
            assert!(rho.max_offdiagonal() < 1e-10);
            assert!((rho.excitation() - rho0.excitation()).abs() < 1e-9);
        }
    }

    #[test]
    fn adaptive_underflow_is_reported() {
        let m = simple(3, 1.0);
        let s = build_space(3, SiteKind::Tls).unwrap();
        let rho0 = DensityMatrix::basis_projector(&s, &[1, 0, 0]).unwrap();
        let err = evolve(&m, &rho0, &[0.0, 1.0], Method::Adaptive { rtol: 1e-300, atol: 1e-300 }).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }

    #[test]
    fn grid_must_increase() {
        assert!(check_grid(&[0.0, 1.0, 1.0]).is_err());
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[0.0]).is_ok());
    }

    #[test]
    fn stationary_single_excitation_five_sites() {
        let m = simple(5, 1.0);
        let s = build_space(5, SiteKind::Tls).unwrap();
        let rho0 = DensityMatrix::basis_projector(&s, &[1, 0, 0, 0, 0]).unwrap();
        let rep = find_stationary(&m, &rho0, StationaryOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.time >= rep.min_time);
        for p in rep.state.populations() {
            assert!((p - 0.2).abs() < 1e-6);
        }
    }

    #[test]
    fn stationary_reports_non_convergence() {
        let m = simple(5, 1.0);
        let s = build_space(5, SiteKind::Tls).unwrap();
        let rho0 = DensityMatrix::basis_projector(&s, &[1, 0, 0, 0, 0]).unwrap();
        let rep = find_stationary(
            &m,
            &rho0,
            StationaryOptions {
                horizon: 1.0,
                ..StationaryOptions::default()
            },
        )
        .unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.time, 1.0);
    }
}
