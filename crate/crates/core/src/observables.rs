//! Quantities read off density matrices: populations, gauged coherences,
//! predicted asymptotic states, thermal maps, typicality and entanglement.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, cexp};
use crate::operators::{HilbertSpace, SectorBasis, SiteKind};
use crate::oracle;
use crate::state::{trace_distance, DensityMatrix};

const FULL_EIGEN_DIM: usize = 512;
/// Largest reduced state `partial_trace_leading` will build.
pub const MAX_REDUCED_DIM: usize = 4096;
const PURITY_TOL: f64 = 1e-10;

fn single_label(n: usize, k: usize) -> Vec<u8> {
    let mut l = vec![0u8; n];
    l[k] = 1;
    l
}

fn sign(p: usize) -> f64 {
    if p % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `α_k = (−1)^k ⟨1_k|ρ|0⟩`, sites numbered from 1.
pub fn alpha_1d(rho: &DensityMatrix) -> Vec<C64> {
    let n = rho.basis().space().site_count();
    let vac = vec![0u8; n];
    (0..n)
        .map(|k| rho.element(&single_label(n, k), &vac) * sign(k + 1))
        .collect()
}

/// `α_kl = (−1)^{k+l} ⟨1_k|ρ|1_l⟩`, including the diagonal `α_kk = ρ_kk`.
pub fn alpha_2d(rho: &DensityMatrix) -> DMatrix<C64> {
    let n = rho.basis().space().site_count();
    let labels: Vec<Vec<u8>> = (0..n).map(|k| single_label(n, k)).collect();
    DMatrix::from_fn(n, n, |k, l| rho.element(&labels[k], &labels[l]) * sign(k + l))
}

/// Largest `|α_kl| − sqrt(ρ_kk ρ_ll)` over `k ≠ l`; positive means the bound
/// is broken.
pub fn positivity_excess(rho: &DensityMatrix) -> f64 {
    let a = alpha_2d(rho);
    let n = a.nrows();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..n {
        for l in 0..n {
            if k != l {
                let bound = libm::sqrt((a[(k, k)].re * a[(l, l)].re).max(0.0));
                worst = worst.max(a[(k, l)].norm() - bound);
            }
        }
    }
    worst
}

/// Smallest eigenvalue, taken per excitation sector for large states.
pub fn min_sector_eigenvalue(rho: &DensityMatrix) -> f64 {
    let h = (rho.matrix() + rho.matrix().adjoint()) * C64::new(0.5, 0.0);
    if rho.dim() <= FULL_EIGEN_DIM {
        return linalg::min_hermitian_eigenvalue(&h);
    }
    rho.basis()
        .counts()
        .iter()
        .map(|&k| {
            let idx = rho.basis().indices_with_total(k);
            let d = idx.len();
            linalg::min_hermitian_eigenvalue(&DMatrix::from_fn(d, d, |p, q| h[(idx[p], idx[q])]))
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservableRecord {
    pub time: f64,
    pub populations: Vec<f64>,
    pub alpha: Vec<C64>,
    pub alpha2: Option<DMatrix<C64>>,
    /// `S_j = 2γ_j (n_{j+1} − n_j)` with the model's effective link rates.
    pub fluxes: Vec<f64>,
    /// `((k, l), E_{k,l})`.
    pub windows: Vec<((usize, usize), f64)>,
    pub distance: Option<f64>,
    pub entropy: Option<f64>,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExtractOptions<'a> {
    pub rates: &'a [f64],
    pub windows: &'a [(usize, usize)],
    pub with_alpha2: bool,
    /// Trace distance is reported against this state when given.
    pub reference: Option<&'a DensityMatrix>,
    /// Bipartition cut for the entropy; only evaluated on pure states.
    pub entropy_cut: Option<usize>,
}

pub fn extract(rho: &DensityMatrix, time: f64, opts: &ExtractOptions<'_>) -> Result<ObservableRecord> {
    let populations = rho.populations();
    let fluxes = oracle::fluxes(&populations, opts.rates)?;
    let windows = opts
        .windows
        .iter()
        .map(|&(k, l)| oracle::flux_and_window_energy(&populations, opts.rates, k, l).map(|b| ((k, l), b.energy)))
        .collect::<Result<Vec<_>>>()?;
    let distance = opts.reference.map(|r| trace_distance(rho, r)).transpose()?;
    let entropy = match opts.entropy_cut {
        Some(cut) if is_pure(rho) => Some(entanglement_diagnostics(rho, cut)?.entropy),
        _ => None,
    };
    Ok(ObservableRecord {
        time,
        alpha: alpha_1d(rho),
        alpha2: opts.with_alpha2.then(|| alpha_2d(rho)),
        populations,
        fluxes,
        windows,
        distance,
        entropy,
        min_eigenvalue: min_sector_eigenvalue(rho),
    })
}

/// `Θ = Σ_j (−1)^j e^{iθ_j}` (sites from 1).
pub fn theta(thetas: &[f64]) -> C64 {
    thetas
        .iter()
        .enumerate()
        .map(|(j, &t)| cexp(C64::new(0.0, t)) * sign(j + 1))
        .sum()
}

/// Angles in `{0, π}` whose phase mixture starts with `α_j ∝ signs[j]`.
pub fn thetas_for_alpha_signs(signs: &[f64]) -> Vec<f64> {
    signs
        .iter()
        .enumerate()
        .map(|(j, &s)| if s * sign(j + 1) >= 0.0 { 0.0 } else { core::f64::consts::PI })
        .collect()
}

/// Long-time limit of the phase mixture: the vacuum keeps weight 1/2, each
/// `|1_k⟩` carries `1/(2n)` and the vacuum coherences settle at
/// `⟨1_k|ρ|0⟩ = (−1)^k Θ*/(2n²)` for `n` sites.
pub fn theta_asymptote(space: &HilbertSpace, thetas: &[f64]) -> Result<(C64, DensityMatrix)> {
    let n = space.site_count();
    if thetas.len() != n {
        return Err(Error::Shape(format!("{} angles for {n} sites", thetas.len())));
    }
    let th = theta(thetas);
    let basis = Arc::new(SectorBasis::union(space, &[0, 1])?);
    let mut data = DMatrix::zeros(basis.len(), basis.len());
    let vac = basis.index_of(&vec![0u8; n]).unwrap();
    data[(vac, vac)] = C64::new(0.5, 0.0);
    let nf = n as f64;
    for k in 0..n {
        let i = basis.index_of(&single_label(n, k)).unwrap();
        data[(i, i)] = C64::new(0.5 / nf, 0.0);
        let c = th.conj() * (sign(k + 1) / (2.0 * nf * nf));
        data[(i, vac)] = c;
        data[(vac, i)] = c.conj();
    }
    Ok((th, DensityMatrix::new(basis, data)?))
}

fn require_tls(space: &HilbertSpace, what: &str) -> Result<()> {
    if space.kind() != SiteKind::Tls {
        return Err(Error::Config(format!("{what} is defined for two-level sites only")));
    }
    Ok(())
}

/// `S_{n,N+1}`: equal mixture of every basis state with `n` excitations.
pub fn dicke_mixture(space: &HilbertSpace, excitations: usize) -> Result<DensityMatrix> {
    require_tls(space, "the Dicke mixture")?;
    if excitations > space.site_count() {
        return Err(Error::Config(format!(
            "{excitations} excitations on {} sites",
            space.site_count()
        )));
    }
    let basis = Arc::new(SectorBasis::sector(space, excitations)?);
    let w = 1.0 / basis.len() as f64;
    DensityMatrix::diagonal(basis.clone(), &vec![w; basis.len()])
}

/// `Σ_n Tr(ρ_n) S_{n,N+1}` over the sectors carried by `rho`.
pub fn symmetrized_prediction(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let space = rho.basis().space();
    require_tls(space, "symmetrization")?;
    let basis = rho.basis().clone();
    let mut w = vec![0.0; basis.len()];
    for &k in basis.counts() {
        let idx = basis.indices_with_total(k);
        let mass: f64 = idx.iter().map(|&i| rho.matrix()[(i, i)].re).sum();
        for &i in &idx {
            w[i] = mass / idx.len() as f64;
        }
    }
    DensityMatrix::diagonal(basis, &w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalSummary {
    pub n_bar: f64,
    /// `ln((1 − n̄)/n̄)`; infinite when `n̄ ∈ {0, 1}`.
    pub beta: f64,
    pub infinite_beta: bool,
    /// `ω/β`.
    pub temperature: f64,
    pub specific_heat: f64,
    /// Local temperature of each requested window, `None` where infinite.
    pub window_temperatures: Vec<((usize, usize), Option<f64>)>,
}

fn beta_of(n: f64) -> f64 {
    if n <= 0.0 {
        f64::INFINITY
    } else if n >= 1.0 {
        f64::NEG_INFINITY
    } else {
        libm::log((1.0 - n) / n)
    }
}

/// Windows are 1-based inclusive site ranges.
pub fn thermal_summary(populations: &[f64], omega: f64, windows: &[(usize, usize)]) -> Result<ThermalSummary> {
    if populations.is_empty() {
        return Err(Error::Shape("no populations".into()));
    }
    let n_bar = populations.iter().sum::<f64>() / populations.len() as f64;
    let beta = beta_of(n_bar);
    let window_temperatures = windows
        .iter()
        .map(|&(k, l)| {
            if !(1 <= k && k <= l && l <= populations.len()) {
                return Err(Error::Config(format!("window [{k}, {l}] outside the chain")));
            }
            let m = populations[k - 1..l].iter().sum::<f64>() / (l - k + 1) as f64;
            let b = beta_of(m);
            Ok(((k, l), b.is_finite().then(|| omega / b)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThermalSummary {
        n_bar,
        beta,
        infinite_beta: !beta.is_finite(),
        temperature: omega / beta,
        specific_heat: if beta.is_finite() { oracle::specific_heat(beta) } else { 0.0 },
        window_temperatures,
    })
}

/// `⊗_m diag(1 − n̄, n̄)`, which is `exp(−βH_m)/Z` with `H_m = Σ σ⁺σ⁻`.
pub fn gibbs_marginal(m: usize, n_bar: f64) -> DMatrix<C64> {
    let d = 1usize << m;
    DMatrix::from_fn(d, d, |i, j| {
        if i != j {
            return C64::new(0.0, 0.0);
        }
        let ones = i.count_ones() as i32;
        C64::new(libm::pow(n_bar, ones as f64) * libm::pow(1.0 - n_bar, (m as i32 - ones) as f64), 0.0)
    })
}

/// Reduced state of the first `m` sites, indexed little-endian by their
/// occupations.
pub fn partial_trace_leading(rho: &DensityMatrix, m: usize) -> Result<DMatrix<C64>> {
    let space = rho.basis().space();
    let n = space.site_count();
    if m == 0 || m > n {
        return Err(Error::Config(format!("cannot keep {m} of {n} sites")));
    }
    let d = space.kind().local_dim();
    let out_dim = (d as u128).saturating_pow(m as u32);
    if out_dim > MAX_REDUCED_DIM as u128 {
        return Err(Error::Resource {
            what: "reduced state dimension",
            requested: out_dim,
            cap: MAX_REDUCED_DIM as u128,
        });
    }
    let out_dim = out_dim as usize;
    let basis = rho.basis();
    let split = |i: usize| -> (usize, &[u8]) {
        let label = basis.label(i);
        let keep = label[..m].iter().rev().fold(0usize, |acc, &o| acc * d + o as usize);
        (keep, &label[m..])
    };
    let parts: Vec<(usize, &[u8])> = (0..basis.len()).map(split).collect();
    let mut out = DMatrix::zeros(out_dim, out_dim);
    for (i, (a, ri)) in parts.iter().enumerate() {
        for (j, (b, rj)) in parts.iter().enumerate() {
            if ri == rj {
                out[(*a, *b)] += rho.matrix()[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Relabels sites: site `s` (0-based) moves to position `perm[s]`.
pub fn permute_sites(rho: &DensityMatrix, perm: &[usize]) -> Result<DensityMatrix> {
    let basis = rho.basis();
    let n = basis.space().site_count();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || core::mem::replace(&mut seen[p], true)) {
        return Err(Error::Config("not a permutation of the sites".into()));
    }
    let target: Vec<usize> = (0..basis.len())
        .map(|i| {
            let label = basis.label(i);
            let mut moved = vec![0u8; n];
            for (s, &o) in label.iter().enumerate() {
                moved[perm[s]] = o;
            }
            basis.index_of(&moved).expect("permutation preserves the sector")
        })
        .collect();
    let mut data = DMatrix::zeros(basis.len(), basis.len());
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            data[(target[i], target[j])] = rho.matrix()[(i, j)];
        }
    }
    DensityMatrix::from_matrix(basis.clone(), data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypicalityReport {
    pub m: usize,
    pub n_bar: f64,
    pub beta: f64,
    /// `‖ρ_m − ρ_m^Gibbs‖₁`.
    pub distance: f64,
    /// `4m/(N+1)`.
    pub bound: f64,
    pub pass: bool,
}

/// Compares the marginal of the first `m` sites with the Gibbs state at the
/// chain's mean occupation.
pub fn typicality_check(rho: &DensityMatrix, m: usize) -> Result<TypicalityReport> {
    let space = rho.basis().space();
    require_tls(space, "the typicality check")?;
    let n = space.site_count();
    if m == 0 || 2 * m > n {
        return Err(Error::Config(format!("marginal size {m} must satisfy 1 <= m <= {n}/2")));
    }
    let pops = rho.populations();
    let n_bar = pops.iter().sum::<f64>() / n as f64;
    let reduced = partial_trace_leading(rho, m)?;
    let distance = linalg::trace_norm(&(reduced - gibbs_marginal(m, n_bar)));
    let bound = 4.0 * m as f64 / n as f64;
    Ok(TypicalityReport {
        m,
        n_bar,
        beta: beta_of(n_bar),
        distance,
        bound,
        pass: distance <= bound,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntanglementReport {
    pub cut: usize,
    /// Von Neumann entropy (natural log) of the leading `cut` sites.
    pub entropy: f64,
    pub is_product: bool,
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn is_pure(rho: &DensityMatrix) -> bool {
    (purity(rho) - 1.0).abs() < PURITY_TOL
}

/// Entropy across the cut after the first `cut` sites. Only pure states are
/// accepted.
pub fn entanglement_diagnostics(rho: &DensityMatrix, cut: usize) -> Result<EntanglementReport> {
    let n = rho.basis().space().site_count();
    if cut == 0 || cut >= n {
        return Err(Error::Config(format!("cut {cut} must split {n} sites")));
    }
    let p = purity(rho);
    if (p - 1.0).abs() >= PURITY_TOL {
        return Err(Error::Mode(format!(
            "entropy needs a pure state, purity is {p:.12}"
        )));
    }
    let reduced = partial_trace_leading(rho, cut)?;
    let entropy: f64 = linalg::hermitian_eigenvalues(&reduced)
        .iter()
        .filter(|&&l| l > 1e-15)
        .map(|&l| -l * libm::log(l))
        .sum();
    Ok(EntanglementReport {
        cut,
        entropy,
        is_product: entropy < 1e-10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{evolve, Method};
    use crate::models::{build_simple_tls, ChainSpec};
    use crate::operators::build_space;
    use crate::state::StateVector;
    use proptest::prelude::*;

    fn tls(n: usize) -> HilbertSpace {
        build_space(n, SiteKind::Tls).unwrap()
    }

    #[test]
    fn dark_state_gauge_is_uniform() {
        let rho = StateVector::dark_state(&tls(3)).unwrap().to_density();
        let a = alpha_2d(&rho);
        assert!(a.iter().all(|z| (z - C64::new(1.0 / 3.0, 0.0)).norm() < 1e-15));
        assert!(rho.populations().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(positivity_excess(&rho) <= 1e-10);
    }

    #[test]
    fn single_excitation_record() {
        let rho = StateVector::single_excitation(&tls(4), 1).unwrap().to_density();
        let r = extract(
            &rho,
            0.0,
            &ExtractOptions {
                rates: &[1.0; 3],
                windows: &[(2, 3)],
                with_alpha2: true,
                entropy_cut: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.populations, vec![1.0, 0.0, 0.0, 0.0]);
        let a2 = r.alpha2.unwrap();
        for k in 0..4 {
            for l in 0..4 {
                if k != l {
                    assert_eq!(a2[(k, l)], C64::new(0.0, 0.0));
                }
            }
        }
        assert_eq!(r.fluxes, vec![-2.0, 0.0, 0.0]);
        assert_eq!(r.windows, vec![((2, 3), 0.0)]);
        assert_eq!(r.entropy, Some(0.0));
    }

    #[test]
    fn phase_mixture_gauged_pattern() {
        let n = 8;
        let thetas: Vec<f64> = (0..n).map(|j| if j < 4 { 0.0 } else { core::f64::consts::PI }).collect();
        let rho = DensityMatrix::phase_mixture(&tls(n), &thetas).unwrap();
        let w = 1.0 / (2.0 * n as f64);
        assert!(rho.populations().iter().all(|p| (p - w).abs() < 1e-15));
        for (j, a) in alpha_1d(&rho).iter().enumerate() {
            let expect = sign(j + 1) * if j < 4 { 1.0 } else { -1.0 } * w;
            assert!((a - C64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn theta_values() {
        let pi = core::f64::consts::PI;
        let alt: Vec<f64> = (0..6).map(|j| if j % 2 == 0 { pi } else { 0.0 }).collect();
        assert!((theta(&alt) - C64::new(6.0, 0.0)).norm() < 1e-12);
        assert!(theta(&[0.0; 6]).norm() < 1e-15);
        let signs: Vec<f64> = (0..20).map(|j| if (j / 5) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let thetas = thetas_for_alpha_signs(&signs);
        let rho0 = DensityMatrix::phase_mixture(&tls(20), &thetas).unwrap();
        for (a, s) in alpha_1d(&rho0).iter().zip(&signs) {
            assert!((a.re * s - 1.0 / 40.0).abs() < 1e-15);
        }
        let (th, rho) = theta_asymptote(&tls(20), &thetas).unwrap();
        assert!(th.norm() < 1e-12);
        assert!(rho.max_offdiagonal() < 1e-14);
    }

    #[test]
    fn theta_asymptote_matches_long_run() {
        let n = 4;
        let thetas = [0.3, 1.9, -0.7, 2.5];
        let model = build_simple_tls(&ChainSpec::uniform(n, SiteKind::Tls, 1.0)).unwrap();
        let rho0 = DensityMatrix::phase_mixture(model.basis().space(), &thetas).unwrap();
        let (_, pred) = theta_asymptote(model.basis().space(), &thetas).unwrap();
        let s = libm::sin(core::f64::consts::PI / n as f64);
        let t = 20.0 / (4.0 * s * s);
        let ts = evolve(&model, &rho0, &[0.0, t], Method::Exponential { tol: 1e-13 }).unwrap();
        assert!(trace_distance(&ts.states[1], &pred).unwrap() < 1e-4);
    }

    #[test]
    fn dicke_examples() {
        let s = dicke_mixture(&tls(3), 1).unwrap();
        assert_eq!(s.dim(), 3);
        assert!(s.matrix().iter().enumerate().all(|(i, z)| if i % 4 == 0 {
            (z.re - 1.0 / 3.0).abs() < 1e-16
        } else {
            z.norm() == 0.0
        }));
        let vac = dicke_mixture(&tls(4), 0).unwrap();
        assert_eq!(vac.dim(), 1);
        assert!(dicke_mixture(&tls(3), 4).is_err());
    }

    #[test]
    fn thermal_values() {
        let t = thermal_summary(&[0.5; 4], 1.0, &[]).unwrap();
        assert_eq!(t.beta, 0.0);
        let t = thermal_summary(&[1.0 / 3.0; 3], 1.0, &[(1, 2)]).unwrap();
        assert!((t.beta - libm::log(2.0)).abs() < 1e-15);
        assert!((t.window_temperatures[0].1.unwrap() - 1.0 / libm::log(2.0)).abs() < 1e-14);
        let t = thermal_summary(&[0.0; 3], 1.0, &[]).unwrap();
        assert!(t.infinite_beta && t.temperature == 0.0);
        let t = thermal_summary(&[1.0; 3], 1.0, &[]).unwrap();
        assert!(t.infinite_beta);
    }

    #[test]
    fn dicke_marginals() {
        let s = dicke_mixture(&tls(4), 2).unwrap();
        let r = partial_trace_leading(&s, 1).unwrap();
        assert!((r[(0, 0)].re - 0.5).abs() < 1e-15 && (r[(1, 1)].re - 0.5).abs() < 1e-15);
        let rep = typicality_check(&s, 1).unwrap();
        assert!(rep.distance < 1e-12 && rep.beta == 0.0);
        let s = dicke_mixture(&tls(8), 4).unwrap();
        let rep = typicality_check(&s, 2).unwrap();
        assert!((rep.distance - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(rep.bound, 1.0);
        assert!(rep.pass);
        assert!(typicality_check(&s, 5).is_err());
    }

    #[test]
    fn asymmetric_state_is_far_from_gibbs() {
        let rho = DensityMatrix::basis_projector(&tls(8), &[1, 1, 0, 0, 0, 0, 1, 1]).unwrap();
        let rep = typicality_check(&rho, 2).unwrap();
        assert!(rep.distance > 1.0);
    }

    #[test]
    fn entanglement_examples() {
        let d2 = StateVector::dark_state(&tls(2)).unwrap().to_density();
        let e = entanglement_diagnostics(&d2, 1).unwrap();
        assert!((e.entropy - libm::log(2.0)).abs() < 1e-12);
        let d4 = StateVector::dark_state(&tls(4)).unwrap().to_density();
        assert!(entanglement_diagnostics(&d4, 2).unwrap().entropy > 0.1);
        let p = StateVector::single_excitation(&tls(3), 1).unwrap().to_density();
        assert!(entanglement_diagnostics(&p, 1).unwrap().is_product);
        let mixed = dicke_mixture(&tls(3), 1).unwrap();
        assert!(matches!(entanglement_diagnostics(&mixed, 1), Err(Error::Mode(_))));
    }

    proptest! {
        #[test]
        fn dicke_is_permutation_invariant(n in 2usize..7, seed in any::<u64>()) {
            let k = (seed as usize) % (n + 1);
            let s = dicke_mixture(&tls(n), k).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut x = seed;
            for i in (1..n).rev() {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (x >> 33) as usize % (i + 1));
            }
            let p = permute_sites(&s, &perm).unwrap();
            prop_assert!(linalg::max_abs(&(p.matrix() - s.matrix())) < 1e-14);
        }

        #[test]
        fn partial_trace_keeps_trace(n in 2usize..6, m in 1usize..3, w in proptest::collection::vec(0.01f64..1.0, 64)) {
            let m = m.min(n - 1);
            let basis = Arc::new(SectorBasis::full(&tls(n)).unwrap());
            let ws: Vec<f64> = w.iter().cycle().take(basis.len()).copied().collect();
            let s: f64 = ws.iter().sum();
            let ws: Vec<f64> = ws.iter().map(|x| x / s).collect();
            let rho = DensityMatrix::diagonal(basis, &ws).unwrap();
            let r = partial_trace_leading(&rho, m).unwrap();
            prop_assert!((r.trace().re - 1.0).abs() < 1e-12);
            let pops = rho.populations();
            for site in 0..m {
                let p: f64 = (0..r.nrows()).filter(|i| i >> site & 1 == 1).map(|i| r[(i, i)].re).sum();
                prop_assert!((p - pops[site]).abs() < 1e-12);
            }
        }
    }
}
