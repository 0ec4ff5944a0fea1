//! Classical walks the master equation reduces to, and the continuum heat
//! equation with its thermal helper functions.
//!
//! Derived boundary and near-diagonal rows (zero-padded rates `γ_0 = γ_{N+1} = 0`):
//!
//! * 1D coherences `α_k = (−1)^k ⟨1_k|ρ|0⟩` obey the population generator
//!   exactly, so `dα_1/dt = 2γ_1(α_2 − α_1)` at the ends.
//! * 2D coherences `α_kl = (−1)^{k+l} ⟨1_k|ρ|1_l⟩`, `|k − l| ≥ 2`:
//!   `dα_kl/dt = −2(γ_{k−1}+γ_k+γ_{l−1}+γ_l) α_kl + 2γ_{k−1}α_{k−1,l}
//!   + 2γ_k α_{k+1,l} + 2γ_{l−1}α_{k,l−1} + 2γ_l α_{k,l+1}`.
//! * Near the diagonal, `l = k + 1`:
//!   `dα_{k,k+1}/dt = −2(γ_{k−1}+γ_k+γ_{k+1}) α_{k,k+1} + 2γ_{k−1}α_{k−1,k+1}
//!   + 2γ_{k+1}α_{k,k+2} + 2γ_k α_{k+1,k}`.
//!   The last term couples the element to its transpose; for real `α` it turns
//!   `−3α_{k,k+1} + α_{k+1,k}` into `−2α_{k,k+1}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{expv, KrylovOptions, SymmetricExp};
use crate::sparse::CsrMatrix;

fn padded(gamma: &[f64], j: isize) -> f64 {
    // γ_j with 1-based j, zero outside 1..=N
    if j >= 1 && (j as usize) <= gamma.len() {
        gamma[j as usize - 1]
    } else {
        0.0
    }
}

fn check_rates(gamma: &[f64], sites: usize) -> Result<()> {
    if sites < 2 || gamma.len() + 1 != sites {
        return Err(Error::Shape(format!(
            "{} link rates for {sites} sites",
            gamma.len()
        )));
    }
    if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::Config("link rates must be finite and >= 0".into()));
    }
    Ok(())
}

/// Tridiagonal generator `dn/dt = G n` of the population walk.
pub fn population_generator(gamma: &[f64]) -> DMatrix<f64> {
    let m = gamma.len() + 1;
    let mut g = DMatrix::zeros(m, m);
    for (j, &r) in gamma.iter().enumerate() {
        g[(j, j)] -= 2.0 * r;
        g[(j + 1, j + 1)] -= 2.0 * r;
        g[(j, j + 1)] += 2.0 * r;
        g[(j + 1, j)] += 2.0 * r;
    }
    g
}

/// Population walk with its spectral decomposition cached.
#[derive(Clone, Debug)]
pub struct DiffusionWalk {
    prop: SymmetricExp,
    sites: usize,
}

impl DiffusionWalk {
    pub fn new(gamma: &[f64]) -> Result<Self> {
        check_rates(gamma, gamma.len() + 1)?;
        Ok(Self {
            prop: SymmetricExp::new(&population_generator(gamma)),
            sites: gamma.len() + 1,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        self.prop.eigenvalues()
    }

    pub fn evolve(&self, n0: &[f64], t: f64) -> Result<Vec<f64>> {
        if n0.len() != self.sites {
            return Err(Error::Shape(format!("{} entries for {} sites", n0.len(), self.sites)));
        }
        Ok(self.prop.apply(n0, t))
    }

    pub fn evolve_complex(&self, a0: &[C64], t: f64) -> Result<Vec<C64>> {
        let re: Vec<f64> = a0.iter().map(|z| z.re).collect();
        let im: Vec<f64> = a0.iter().map(|z| z.im).collect();
        let re = self.evolve(&re, t)?;
        let im = self.evolve(&im, t)?;
        Ok(re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect())
    }
}

/// `dn_j/dt = −2(γ_j+γ_{j−1})n_j + 2γ_j n_{j+1} + 2γ_{j−1} n_{j−1}` solved
/// exactly.
pub fn population_diffusion(n0: &[f64], gamma: &[f64], t: f64) -> Result<Vec<f64>> {
    check_rates(gamma, n0.len())?;
    DiffusionWalk::new(gamma)?.evolve(n0, t)
}

/// 1D coherence walk for `α_k = (−1)^k ⟨1_k|ρ|0⟩`.
pub fn coherence_walk_1d(alpha0: &[C64], gamma: &[f64], t: f64) -> Result<Vec<C64>> {
    check_rates(gamma, alpha0.len())?;
    DiffusionWalk::new(gamma)?.evolve_complex(alpha0, t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowBalance {
    /// `S_j = 2γ_j (n_{j+1} − n_j)` for links `1..=N`.
    pub fluxes: Vec<f64>,
    /// `E_{k,l} = Σ_{j=k}^{l} n_j`.
    pub energy: f64,
    /// `S_l − S_{k−1}`.
    pub flux_rate: f64,
    /// `dE_{k,l}/dt` from the population generator directly.
    pub ode_rate: f64,
}

pub fn fluxes(n: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
    check_rates(gamma, n.len())?;
    Ok(gamma
        .iter()
        .enumerate()
        .map(|(j, &g)| 2.0 * g * (n[j + 1] - n[j]))
        .collect())
}

/// Energy of the window `k..=l` (1-based) and its balance law. The window must
/// avoid both chain ends.
pub fn flux_and_window_energy(n: &[f64], gamma: &[f64], k: usize, l: usize) -> Result<WindowBalance> {
    let sites = n.len();
    if !(1 < k && k <= l && l < sites) {
        return Err(Error::Boundary { k, l, sites });
    }
    let s = fluxes(n, gamma)?;
    let g = population_generator(gamma);
    let dn = &g * DVector::from_column_slice(n);
    Ok(WindowBalance {
        energy: n[k - 1..l].iter().sum(),
        flux_rate: s[l - 1] - s[k - 2],
        ode_rate: dn.as_slice()[k - 1..l].iter().sum(),
        fluxes: s,
    })
}

/// Off-diagonal index pairs `(k, l)`, 0-based, in row-major order.
fn offdiag_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(m * (m - 1));
    for k in 0..m {
        for l in 0..m {
            if k != l {
                v.push((k, l));
            }
        }
    }
    v
}

/// Real generator of the 2D coherence walk over the off-diagonal pairs.
pub fn coherence_2d_generator(gamma: &[f64]) -> DMatrix<f64> {
    let m = gamma.len() + 1;
    let pairs = offdiag_pairs(m);
    let pos = |k: usize, l: usize| -> Option<usize> {
        if k == l {
            return None;
        }
        // row-major without the diagonal
        Some(k * (m - 1) + if l > k { l - 1 } else { l })
    };
    let g = |j: isize| padded(gamma, j);
    let mut a = DMatrix::zeros(pairs.len(), pairs.len());
    for (row, &(k, l)) in pairs.iter().enumerate() {
        // 1-based site numbers
        let (kk, ll) = (k as isize + 1, l as isize + 1);
        a[(row, row)] = -2.0 * (g(kk - 1) + g(kk) + g(ll - 1) + g(ll));
        let mut add = |kn: isize, ln: isize, w: f64| {
            if w == 0.0 || kn < 1 || ln < 1 || kn as usize > m || ln as usize > m {
                return;
            }
            if let Some(col) = pos(kn as usize - 1, ln as usize - 1) {
                a[(row, col)] += w;
            }
        };
        add(kk - 1, ll, 2.0 * g(kk - 1));
        add(kk + 1, ll, 2.0 * g(kk));
        add(kk, ll - 1, 2.0 * g(ll - 1));
        add(kk, ll + 1, 2.0 * g(ll));
        if ll == kk + 1 || kk == ll + 1 {
            let link = kk.min(ll);
            add(kk, ll, 2.0 * g(link));
            add(ll, kk, 2.0 * g(link));
        }
    }
    a
}

/// 2D coherence walk; the diagonal of `alpha0` is ignored and returned as zero.
pub fn coherence_walk_2d(alpha0: &DMatrix<C64>, gamma: &[f64], t: f64) -> Result<DMatrix<C64>> {
    let m = alpha0.nrows();
    if alpha0.ncols() != m {
        return Err(Error::Shape("coherence matrix must be square".into()));
    }
    check_rates(gamma, m)?;
    let pairs = offdiag_pairs(m);
    let prop = SymmetricExp::new(&coherence_2d_generator(gamma));
    let re: Vec<f64> = pairs.iter().map(|&(k, l)| alpha0[(k, l)].re).collect();
    let im: Vec<f64> = pairs.iter().map(|&(k, l)| alpha0[(k, l)].im).collect();
    let re = prop.apply(&re, t);
    let im = prop.apply(&im, t);
    let mut out = DMatrix::zeros(m, m);
    for (i, &(k, l)) in pairs.iter().enumerate() {
        out[(k, l)] = C64::new(re[i], im[i]);
    }
    Ok(out)
}

pub const SET_WALK_MAX_SITES: usize = 16;
pub const SET_WALK_MAX_K: usize = 4;
const SET_WALK_DENSE_LIMIT: usize = 512;

/// Correlation walk over `k`-subsets `K` of the chain for
/// `n(K) = ⟨Π_{j∈K} n_j⟩`: each member hops to an empty neighbour at rate
/// `2γ` of the link crossed.
#[derive(Clone, Debug)]
pub struct SetWalk {
    sites: usize,
    subsets: Vec<Vec<usize>>,
    generator: CsrMatrix,
    dense: Option<SymmetricExp>,
}

impl SetWalk {
    pub fn new(gamma: &[f64], k: usize) -> Result<Self> {
        let sites = gamma.len() + 1;
        check_rates(gamma, sites)?;
        if sites > SET_WALK_MAX_SITES {
            return Err(Error::Resource {
                what: "set-walk chain length",
                requested: sites as u128,
                cap: SET_WALK_MAX_SITES as u128,
            });
        }
        if k > SET_WALK_MAX_K {
            return Err(Error::Resource {
                what: "set-walk subset size",
                requested: k as u128,
                cap: SET_WALK_MAX_K as u128,
            });
        }
        if k == 0 || k > sites {
            return Err(Error::Config(format!("subset size {k} invalid for {sites} sites")));
        }
        let subsets = k_subsets(sites, k);
        let index = |s: &[usize]| subsets.binary_search_by(|x| x.as_slice().cmp(s)).ok();
        let mut trip = Vec::new();
        let mut diag = vec![0.0; subsets.len()];
        for (row, set) in subsets.iter().enumerate() {
            for (pos, &j) in set.iter().enumerate() {
                // neighbours j+1 (link j) and j-1 (link j-1), sites 1-based
                for (nb, rate) in [(j + 1, padded(gamma, j as isize)), (j.wrapping_sub(1), padded(gamma, j as isize - 1))] {
                    if rate == 0.0 || nb == 0 || nb > sites || set.contains(&nb) {
                        continue;
                    }
                    let mut moved = set.clone();
                    moved[pos] = nb;
                    moved.sort_unstable();
                    let col = index(&moved).expect("moved subset is enumerated");
                    trip.push((row, col, C64::new(2.0 * rate, 0.0)));
                    diag[row] -= 2.0 * rate;
                }
            }
        }
        for (i, d) in diag.into_iter().enumerate() {
            trip.push((i, i, C64::new(d, 0.0)));
        }
        let n = subsets.len();
        let generator = CsrMatrix::from_triplets(n, n, trip);
        let dense = (n <= SET_WALK_DENSE_LIMIT)
            .then(|| SymmetricExp::new(&generator.to_dense().map(|z| z.re)));
        Ok(Self {
            sites,
            subsets,
            generator,
            dense,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Subsets of 1-based sites in lexicographic order.
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn generator(&self) -> &CsrMatrix {
        &self.generator
    }

    pub fn evolve(&self, n0: &[f64], t: f64) -> Result<Vec<f64>> {
        if n0.len() != self.subsets.len() {
            return Err(Error::Shape(format!(
                "{} values for {} subsets",
                n0.len(),
                self.subsets.len()
            )));
        }
        if let Some(p) = &self.dense {
            return Ok(p.apply(n0, t));
        }
        let x: Vec<C64> = n0.iter().map(|&v| C64::new(v, 0.0)).collect();
        let y = expv(&self.generator, t, &x, KrylovOptions::default())?;
        Ok(y.into_iter().map(|z| z.re).collect())
    }
}

/// `k`-subsets of `1..=n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
    out
}

pub fn set_walk(n0: &[f64], gamma: &[f64], k: usize, t: f64) -> Result<Vec<f64>> {
    SetWalk::new(gamma, k)?.evolve(n0, t)
}

/// Mean occupation of a TLS at temperature `T` (`β = ω/T`).
pub fn occupation(temperature: f64, omega: f64) -> f64 {
    let beta = omega / temperature;
    let e = libm::exp(-beta);
    e / (1.0 + e)
}

/// Inverse of [`occupation`]; defined for `0 < n < 1/2`.
pub fn temperature_of(n: f64, omega: f64) -> Result<f64> {
    if !(n > 0.0 && n < 0.5) {
        return Err(Error::Stability(format!(
            "occupation {n} has no positive finite temperature"
        )));
    }
    Ok(omega / libm::log((1.0 - n) / n))
}

/// `C_V = β² e^β / (e^β + 1)²`, evaluated without overflow.
pub fn specific_heat(beta: f64) -> f64 {
    let b = beta.abs();
    let e = libm::exp(-b);
    b * b * e / ((1.0 + e) * (1.0 + e))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatOptions {
    pub omega: f64,
    pub spacing: f64,
    /// Time step; `None` uses `0.4 a² / max(2a²γ)`.
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatState {
    pub temperature: Vec<f64>,
    /// Internal energy density `u = ω n(T)` per cell.
    pub energy: Vec<f64>,
    pub steps: u64,
}

impl HeatState {
    /// `Σ u_i a`.
    pub fn total_energy(&self, spacing: f64) -> f64 {
        self.energy.iter().sum::<f64>() * spacing
    }
}

fn heat_rhs(u: &[f64], gamma: &[f64], opts: &HeatOptions, out: &mut [f64]) -> Result<()> {
    let a = opts.spacing;
    let temps = u
        .iter()
        .map(|&ui| temperature_of(ui / opts.omega, opts.omega))
        .collect::<Result<Vec<f64>>>()?;
    out.iter_mut().for_each(|x| *x = 0.0);
    for (j, &g) in gamma.iter().enumerate() {
        let tm = 0.5 * (temps[j] + temps[j + 1]);
        let kappa = 2.0 * a * a * g * specific_heat(opts.omega / tm);
        let flux = kappa * (temps[j + 1] - temps[j]) / a;
        out[j] += flux / a;
        out[j + 1] -= flux / a;
    }
    Ok(())
}

/// Integrates `∂u/∂t = ∂x(κ ∂x T)` with `κ = 2a²γ(x)C_V(T)` by conservative
/// finite volumes (one cell per site, zero-flux ends) and RK4 in time.
pub fn fourier_heat(t0: &[f64], gamma: &[f64], opts: &HeatOptions, t: f64) -> Result<HeatState> {
    check_rates(gamma, t0.len())?;
    if !(opts.omega > 0.0 && opts.spacing > 0.0) {
        return Err(Error::Config("omega and spacing must be > 0".into()));
    }
    if let Some(bad) = t0.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Stability(format!("initial temperature {bad} is not positive")));
    }
    let gmax = gamma.iter().copied().fold(0.0, f64::max);
    let a2 = opts.spacing * opts.spacing;
    let limit = if gmax > 0.0 { 0.4 * a2 / (2.0 * a2 * gmax) } else { f64::INFINITY };
    let dt = opts.dt.unwrap_or(limit).min(limit);
    let mut u: Vec<f64> = t0.iter().map(|&x| opts.omega * occupation(x, opts.omega)).collect();
    let steps = if t > 0.0 && dt.is_finite() {
        libm::ceil(t / dt).max(1.0) as u64
    } else {
        0
    };
    if steps > 0 {
        let h = t / steps as f64;
        let n = u.len();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        for _ in 0..steps {
            heat_rhs(&u, gamma, opts, &mut k1)?;
            tmp.iter_mut().zip(&u).zip(&k1).for_each(|((x, a), b)| *x = a + 0.5 * h * b);
            heat_rhs(&tmp, gamma, opts, &mut k2)?;
            tmp.iter_mut().zip(&u).zip(&k2).for_each(|((x, a), b)| *x = a + 0.5 * h * b);
            heat_rhs(&tmp, gamma, opts, &mut k3)?;
            tmp.iter_mut().zip(&u).zip(&k3).for_each(|((x, a), b)| *x = a + h * b);
            heat_rhs(&tmp, gamma, opts, &mut k4)?;
            for i in 0..n {
                u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    let temperature = u
        .iter()
        .map(|&ui| temperature_of(ui / opts.omega, opts.omega))
        .collect::<Result<Vec<f64>>>()?;
    Ok(HeatState {
        temperature,
        energy: u,
        steps,
    })
}

/// Means over consecutive blocks of `width` cells (a short last block is kept).
pub fn block_average(v: &[f64], width: usize) -> Vec<f64> {
    v.chunks(width.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_site_closed_form() {
        for &t in &[0.0, 0.1, 0.7, 3.0] {
            let n = population_diffusion(&[1.0, 0.0], &[1.0], t).unwrap();
            let e = libm::exp(-4.0 * t);
            assert!((n[0] - 0.5 * (1.0 + e)).abs() < 1e-14);
            assert!((n[1] - 0.5 * (1.0 - e)).abs() < 1e-14);
        }
    }

    #[test]
    fn generator_columns_sum_to_zero() {
        let g = population_generator(&[0.3, 1.0, 2.5, 0.0]);
        for j in 0..5 {
            assert_eq!(g.column(j).iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn uniform_is_fixed_and_limit_is_mean() {
        let gamma = [1.0, 0.5, 2.0, 1.0];
        let n = population_diffusion(&[0.3; 5], &gamma, 10.0).unwrap();
        assert!(n.iter().all(|x| (x - 0.3).abs() < 1e-14));
        let n0 = [1.0, 0.0, 0.5, 0.25, 0.0];
        let late = population_diffusion(&n0, &gamma, 200.0).unwrap();
        let mean = n0.iter().sum::<f64>() / 5.0;
        assert!(late.iter().all(|x| (x - mean).abs() < 1e-12));
    }

    #[test]
    fn flux_example_and_boundary() {
        let s = fluxes(&[0.5, 0.3], &[1.0]).unwrap();
        assert!((s[0] + 0.4).abs() < 1e-15);
        let s = fluxes(&[0.5, 0.3], &[2.0]).unwrap();
        assert!((s[0] + 0.8).abs() < 1e-15);
        assert!(fluxes(&[0.2; 4], &[1.0; 3]).unwrap().iter().all(|&x| x == 0.0));
        let n = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert!(matches!(
            flux_and_window_energy(&n, &[1.0; 4], 1, 3),
            Err(Error::Boundary { k: 1, l: 3, sites: 5 })
        ));
        assert!(matches!(
            flux_and_window_energy(&n, &[1.0; 4], 2, 5),
            Err(Error::Boundary { .. })
        ));
        assert!(matches!(
            flux_and_window_energy(&n, &[1.0; 4], 3, 2),
            Err(Error::Boundary { .. })
        ));
    }

    #[test]
    fn window_balance_matches_finite_difference() {
        let gamma = [1.0, 0.7, 1.3, 0.4];
        let n0 = [0.9, 0.1, 0.4, 0.0, 0.6];
        let h = 1e-5;
        let t = 0.3;
        let e = |t: f64| {
            let n = population_diffusion(&n0, &gamma, t).unwrap();
            n[1] + n[2]
        };
        let fd = (e(t + h) - e(t - h)) / (2.0 * h);
        let n = population_diffusion(&n0, &gamma, t).unwrap();
        let b = flux_and_window_energy(&n, &gamma, 2, 3).unwrap();
        assert!((b.flux_rate - b.ode_rate).abs() < 1e-14);
        assert!((fd - b.flux_rate).abs() < 1e-8, "{fd} vs {}", b.flux_rate);
    }

    #[test]
    fn coherence_1d_conserves_sum_and_equilibrates() {
        let a0: Vec<C64> = (0..6).map(|k| C64::new(k as f64 * 0.1 - 0.2, 0.05 * k as f64)).collect();
        let gamma = [1.0; 5];
        let s0: C64 = a0.iter().sum();
        for &t in &[0.5, 2.0, 9.0] {
            let a = coherence_walk_1d(&a0, &gamma, t).unwrap();
            let s: C64 = a.iter().sum();
            assert!((s - s0).norm() < 1e-12);
        }
        let late = coherence_walk_1d(&a0, &gamma, 400.0).unwrap();
        for a in late {
            assert!((a - s0 / 6.0).norm() < 1e-12);
        }
        let u = coherence_walk_1d(&[C64::new(0.3, 0.1); 4], &[1.0; 3], 5.0).unwrap();
        assert!(u.iter().all(|z| (z - C64::new(0.3, 0.1)).norm() < 1e-14));
    }

    #[test]
    fn coherence_2d_generator_is_symmetric_with_expected_rows() {
        let gamma = [1.0, 1.0, 1.0, 1.0];
        let a = coherence_2d_generator(&gamma);
        assert!((&a - a.transpose()).abs().max() < 1e-15);
        // interior near-diagonal row (k, l) = (2, 3), 0-based (1, 2), 5 sites
        let row = 1 * 4 + 1;
        assert_eq!(a[(row, row)], -6.0);
        let zero = DMatrix::<C64>::zeros(5, 5);
        assert_eq!(coherence_walk_2d(&zero, &gamma, 3.0).unwrap(), zero);
    }

    #[test]
    fn coherence_2d_preserves_hermitian_symmetry() {
        let m = 5;
        let mut a0 = DMatrix::<C64>::zeros(m, m);
        a0[(0, 2)] = C64::new(0.2, 0.1);
        a0[(2, 0)] = C64::new(0.2, -0.1);
        a0[(1, 2)] = C64::new(-0.1, 0.3);
        a0[(2, 1)] = C64::new(-0.1, -0.3);
        let a = coherence_walk_2d(&a0, &[1.0, 0.5, 2.0, 1.0], 0.7).unwrap();
        for k in 0..m {
            for l in 0..m {
                assert!((a[(k, l)] - a[(l, k)].conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn subsets_enumeration() {
        let s = k_subsets(4, 2);
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], vec![1, 2]);
        assert_eq!(s[5], vec![3, 4]);
        assert_eq!(k_subsets(16, 4).len(), 1820);
    }

    #[test]
    fn set_walk_single_sites_is_population_walk() {
        let gamma = [1.0, 0.3, 2.0];
        let n0 = [0.4, 0.1, 0.3, 0.2];
        let a = set_walk(&n0, &gamma, 1, 0.8).unwrap();
        let b = population_diffusion(&n0, &gamma, 0.8).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn set_walk_symmetrizes_pairs() {
        let w = SetWalk::new(&[1.0; 3], 2).unwrap();
        let n0: Vec<f64> = w.subsets().iter().map(|s| if s == &vec![1, 2] { 1.0 } else { 0.0 }).collect();
        let late = w.evolve(&n0, 100.0).unwrap();
        assert!(late.iter().all(|x| (x - 1.0 / 6.0).abs() < 1e-10));
    }

    #[test]
    fn set_walk_caps() {
        assert!(matches!(SetWalk::new(&[1.0; 16], 2), Err(Error::Resource { .. })));
        assert!(matches!(SetWalk::new(&[1.0; 9], 5), Err(Error::Resource { .. })));
    }

    #[test]
    fn set_walk_krylov_path_agrees_with_dense() {
        // 12 sites, k = 3 → 220 subsets (dense); k = 4 → 495 (dense); 14 sites k = 4 → 1001 (Krylov)
        let gamma = [1.0; 13];
        let w = SetWalk::new(&gamma, 4).unwrap();
        assert!(w.dense.is_none());
        let n0: Vec<f64> = (0..w.subsets().len()).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let y = w.evolve(&n0, 0.5).unwrap();
        let dense = SymmetricExp::new(&w.generator().to_dense().map(|z| z.re)).apply(&n0, 0.5);
        for (a, b) in y.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn specific_heat_values() {
        assert_eq!(specific_heat(0.0), 0.0);
        let e = core::f64::consts::E;
        assert!((specific_heat(1.0) - e / ((e + 1.0) * (e + 1.0))).abs() < 1e-15);
        assert!((specific_heat(1.0) - 0.19661).abs() < 1e-5);
        assert!(specific_heat(800.0).is_finite());
    }

    #[test]
    fn occupation_round_trip() {
        assert!((temperature_of(1.0 / 3.0, 1.0).unwrap() - 1.0 / libm::log(2.0)).abs() < 1e-14);
        let t = temperature_of(0.2, 2.0).unwrap();
        assert!((occupation(t, 2.0) - 0.2).abs() < 1e-15);
        assert!(matches!(temperature_of(0.5, 1.0), Err(Error::Stability(_))));
    }

    #[test]
    fn heat_uniform_is_fixed_and_energy_conserved() {
        let opts = HeatOptions {
            omega: 1.0,
            spacing: 0.5,
            dt: None,
        };
        let s = fourier_heat(&[2.0; 8], &[1.0; 7], &opts, 3.0).unwrap();
        assert!(s.temperature.iter().all(|x| (x - 2.0).abs() < 1e-12));
        let t0: Vec<f64> = (0..10).map(|i| if i < 5 { 1.5 } else { 0.8 }).collect();
        let init = fourier_heat(&t0, &[1.0; 9], &opts, 0.0).unwrap();
        let fin = fourier_heat(&t0, &[1.0; 9], &opts, 4.0).unwrap();
        assert!((init.total_energy(0.5) - fin.total_energy(0.5)).abs() < 1e-12);
    }

    #[test]
    fn heat_rejects_nonpositive_temperature() {
        let opts = HeatOptions {
            omega: 1.0,
            spacing: 1.0,
            dt: None,
        };
        assert!(matches!(
            fourier_heat(&[1.0, -0.5], &[1.0], &opts, 1.0),
            Err(Error::Stability(_))
        ));
    }

    proptest! {
        #[test]
        fn population_walk_conserves_and_stays_nonnegative(
            n0 in proptest::collection::vec(0.0f64..1.0, 2..9),
            g in 0.0f64..3.0,
            t in 0.0f64..5.0,
        ) {
            let gamma = vec![g; n0.len() - 1];
            let n = population_diffusion(&n0, &gamma, t).unwrap();
            let s0: f64 = n0.iter().sum();
            prop_assert!((n.iter().sum::<f64>() - s0).abs() < 1e-12);
            prop_assert!(n.iter().all(|&x| x >= -1e-12));
        }

        #[test]
        fn specific_heat_is_du_dt(temp in 0.05f64..20.0, omega in 0.1f64..5.0) {
            let h = temp * 1e-5;
            let u = |t: f64| omega * occupation(t, omega);
            let fd = (u(temp + h) - u(temp - h)) / (2.0 * h);
            let cv = specific_heat(omega / temp);
            prop_assert!((fd - cv).abs() <= 1e-6 * cv.abs().max(1e-300) || (fd - cv).abs() < 1e-14);
        }
    }
}
