//! Dense helpers: Hermitian spectra, trace norms, the dense matrix exponential
//! and a Krylov propagator for `exp(tA) v` with sparse `A`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sparse::{cabs, CsrMatrix};

const ZERO: C64 = C64::new(0.0, 0.0);

/// A linear map on flat complex vectors.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
    /// Any upper bound on the induced infinity norm.
    fn norm_bound(&self) -> f64;
}

impl LinearOp for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.mul_vec(x, y)
    }

    fn norm_bound(&self) -> f64 {
        self.norm_inf()
    }
}

pub(crate) fn cexp(z: C64) -> C64 {
    let r = libm::exp(z.re);
    C64::new(r * libm::cos(z.im), r * libm::sin(z.im))
}

pub(crate) fn vec_norm(x: &[C64]) -> f64 {
    libm::sqrt(x.iter().map(|z| z.norm_sqr()).sum())
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Eigenvalues of a Hermitian matrix (only the lower triangle is trusted).
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> DVector<f64> {
    if m.nrows() == 0 {
        return DVector::zeros(0);
    }
    m.clone().symmetric_eigenvalues()
}

pub fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Trace norm (sum of singular values).
pub fn trace_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().sum()
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, &z| f64::max(acc, cabs(z)))
}

fn norm_one(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| cabs(*z)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense matrix exponential by scaling and squaring of a truncated Taylor
/// series. The scaled matrix has one-norm at most 1/2 and the series is summed
/// until the next term is below double precision.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let norm = norm_one(a);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = libm::ceil(libm::log2(norm / 0.5)) as u32;
    }
    let scale = libm::ldexp(1.0, -(squarings as i32));
    let b = a * C64::new(scale, 0.0);
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &b * C64::new(1.0 / k as f64, 0.0);
        result += &term;
        if norm_one(&term) <= 1e-18 * norm_one(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Krylov subspace dimension.
    pub dim: usize,
    /// Local error tolerance per unit time, absolute in the vector norm.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { dim: 30, tol: 1e-13 }
    }
}

/// `exp(t A) v` by restarted Arnoldi with the step-size control of Sidje's
/// `expv`. Returns the propagated vector.
pub fn expv(op: &impl LinearOp, t: f64, v: &[C64], opts: KrylovOptions) -> Result<Vec<C64>> {
    let n = op.dim();
    assert_eq!(v.len(), n);
    let mut w = v.to_vec();
    if t == 0.0 || n == 0 {
        return Ok(w);
    }
    let anorm = op.norm_bound().max(f64::MIN_POSITIVE);
    let m = opts.dim.min(n).max(1);
    let tol = opts.tol;
    let gamma = 0.9;
    let delta = 1.2;
    let max_reject = 30;
    let t_out = libm::fabs(t);
    let sgn = if t < 0.0 { -1.0 } else { 1.0 };
    let mut t_now = 0.0;
    let mut beta = vec_norm(&w);
    if beta == 0.0 {
        return Ok(w);
    }
    let mut xm = 1.0 / m as f64;
    let fact = libm::pow((m as f64 + 1.0) / core::f64::consts::E, m as f64 + 1.0)
        * libm::sqrt(2.0 * core::f64::consts::PI * (m as f64 + 1.0));
    let mut t_new = (1.0 / anorm) * libm::pow((fact * tol) / (4.0 * beta * anorm), xm);
    t_new = round_step(t_new);

    let mut basis: Vec<Vec<C64>> = (0..=m).map(|_| vec![ZERO; n]).collect();
    let mut p = vec![ZERO; n];
    let mut steps = 0usize;

    while t_now < t_out {
        steps += 1;
        if steps > 1_000_000 {
            return Err(Error::Integration {
                t: t_now,
                reason: "Krylov propagator exceeded step budget".into(),
            });
        }
        let mut t_step = f64::min(t_out - t_now, t_new);
        let mut h = DMatrix::<C64>::zeros(m + 2, m + 2);
        for (bi, wi) in basis[0].iter_mut().zip(&w) {
            *bi = *wi / beta;
        }
        let mut mb = m;
        let mut happy = false;
        for j in 0..m {
            op.apply(&basis[j], &mut p);
            for i in 0..=j {
                let hij = dot(&basis[i], &p);
                h[(i, j)] = hij;
                for (pk, bk) in p.iter_mut().zip(&basis[i]) {
                    *pk -= hij * bk;
                }
            }
            // One reorthogonalization pass keeps the basis clean for long runs.
            for i in 0..=j {
                let corr = dot(&basis[i], &p);
                h[(i, j)] += corr;
                for (pk, bk) in p.iter_mut().zip(&basis[i]) {
                    *pk -= corr * bk;
                }
            }
            let s = vec_norm(&p);
            if s <= 1e-14 * anorm {
                happy = true;
                mb = j + 1;
                t_step = t_out - t_now;
                break;
            }
            h[(j + 1, j)] = C64::new(s, 0.0);
            for (bk, pk) in basis[j + 1].iter_mut().zip(&p) {
                *bk = *pk / s;
            }
        }
        let mut avnorm = 0.0;
        if !happy {
            h[(m + 1, m)] = C64::new(1.0, 0.0);
            op.apply(&basis[m], &mut p);
            avnorm = vec_norm(&p);
        }

        let mut rejects = 0;
        let (f, err_loc) = loop {
            let mx = if happy { mb } else { m + 2 };
            let sub = h.view((0, 0), (mx, mx)) * C64::new(sgn * t_step, 0.0);
            let f = expm(&sub.into_owned());
            if happy {
                break (f, 0.0);
            }
            let phi1 = libm::fabs(beta * cabs(f[(m, 0)]));
            let phi2 = libm::fabs(beta * cabs(f[(m + 1, 0)]) * avnorm);
            let err_loc = if phi1 > 10.0 * phi2 {
                xm = 1.0 / m as f64;
                phi2
            } else if phi1 > phi2 {
                xm = 1.0 / m as f64;
                (phi1 * phi2) / (phi1 - phi2)
            } else {
                xm = 1.0 / (m as f64 - 1.0).max(1.0);
                phi1
            };
            if err_loc <= delta * t_step * tol {
                break (f, err_loc);
            }
            rejects += 1;
            if rejects > max_reject {
                return Err(Error::Integration {
                    t: t_now,
                    reason: format!("Krylov step rejected {max_reject} times (err {err_loc:.3e})"),
                });
            }
            t_step = round_step(gamma * t_step * libm::pow(t_step * tol / err_loc, xm));
        };

        let mx = if happy { mb } else { m + 1 };
        for wi in w.iter_mut() {
            *wi = ZERO;
        }
        for i in 0..mx {
            let coef = f[(i, 0)] * beta;
            for (wk, bk) in w.iter_mut().zip(&basis[i]) {
                *wk += coef * bk;
            }
        }
        beta = vec_norm(&w);
        t_now += t_step;
        if beta == 0.0 {
            break;
        }
        if !happy {
            let ratio = if err_loc > 0.0 {
                libm::pow(t_step * tol / err_loc, xm)
            } else {
                2.0
            };
            t_new = round_step(gamma * t_step * ratio);
        }
    }
    Ok(w)
}

fn round_step(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return x;
    }
    let s = libm::pow(10.0, libm::floor(libm::log10(x)) - 1.0);
    libm::ceil(x / s) * s
}

/// Propagator of a real symmetric generator via its eigendecomposition.
#[derive(Clone, Debug)]
pub struct SymmetricExp {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl SymmetricExp {
    pub fn new(generator: &DMatrix<f64>) -> Self {
        let eig = generator.clone().symmetric_eigen();
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// `exp(t G) x`.
    pub fn apply(&self, x: &[f64], t: f64) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let mut coeffs = self.vectors.transpose() * xv;
        for (c, l) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= libm::exp(l * t);
        }
        (&self.vectors * coeffs).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_rotation() {
        // exp(-i θ σx) = cos θ I - i sin θ σx
        let theta = 0.7;
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[ZERO, C64::new(0.0, -theta), C64::new(0.0, -theta), ZERO],
        );
        let e = expm(&a);
        assert!(cabs(e[(0, 0)] - C64::new(libm::cos(theta), 0.0)) < 1e-15);
        assert!(cabs(e[(0, 1)] - C64::new(0.0, -libm::sin(theta))) < 1e-15);
    }

    #[test]
    fn expm_large_norm_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(-30.0, 0.0), C64::new(2.0, 5.0)]));
        let e = expm(&a);
        assert!((e[(0, 0)].re - libm::exp(-30.0)).abs() < 1e-25);
        let want = cexp(C64::new(2.0, 5.0));
        assert!(cabs(e[(1, 1)] - want) < 1e-13 * cabs(want));
    }

    #[test]
    fn krylov_matches_dense_exponential() {
        // Discrete Laplacian with a skew part, n = 40.
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(-2.0, 0.3)));
            if i + 1 < n {
                t.push((i, i + 1, C64::new(1.0, 0.2)));
                t.push((i + 1, i, C64::new(1.0, -0.1)));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let v: Vec<C64> = (0..n).map(|i| C64::new(libm::sin(i as f64), 0.1 * i as f64)).collect();
        let time = 7.5;
        let got = expv(&a, time, &v, KrylovOptions::default()).unwrap();
        let dense = expm(&(a.to_dense() * C64::new(time, 0.0)));
        let want = dense * DVector::from_column_slice(&v);
        for i in 0..n {
            assert!(cabs(got[i] - want[i]) < 1e-10, "{i}: {} vs {}", got[i], want[i]);
        }
    }

    #[test]
    fn symmetric_exp_matches_expm() {
        let g = DMatrix::from_row_slice(3, 3, &[-2.0, 2.0, 0.0, 2.0, -4.0, 2.0, 0.0, 2.0, -2.0]);
        let p = SymmetricExp::new(&g);
        let x = [1.0, 0.0, 0.0];
        let got = p.apply(&x, 0.3);
        let gc = g.map(|v| C64::new(0.3 * v, 0.0));
        let e = expm(&gc);
        for i in 0..3 {
            assert!((got[i] - e[(i, 0)].re).abs() < 1e-14);
        }
    }
}
