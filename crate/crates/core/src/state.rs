//! Pure states and density matrices on a (sector) basis.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, cexp};
use crate::operators::{HilbertSpace, OperatorMatrix, SectorBasis};
use crate::sparse::CsrMatrix;

const ZERO: C64 = C64::new(0.0, 0.0);

pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct StateVector {
    basis: Arc<SectorBasis>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(basis: Arc<SectorBasis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::Shape(format!(
                "{} amplitudes for a basis of {} states",
                amps.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, amps })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.amps)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidState("zero vector cannot be normalized".into()));
        }
        for a in self.amps.iter_mut() {
            *a /= n;
        }
        Ok(self)
    }

    /// `⟨ψ|op|ψ⟩`.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        let y = op.apply(&self.amps)?;
        Ok(self.amps.iter().zip(&y).map(|(a, b)| a.conj() * b).sum())
    }

    /// `Σ_i |ψ_i|² N_i`.
    pub fn excitation(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * self.basis.total(i) as f64)
            .sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = DVector::from_column_slice(&self.amps);
        DensityMatrix {
            basis: self.basis.clone(),
            data: &v * v.adjoint(),
        }
    }

    /// Single excitation on a 1-based site, in the one-excitation sector.
    pub fn single_excitation(space: &HilbertSpace, site: usize) -> Result<Self> {
        space.check_site(site)?;
        let mut label = vec![0u8; space.site_count()];
        label[site - 1] = 1;
        Self::basis_state(space, &label)
    }

    /// The basis state with the given occupations, in its own sector.
    pub fn basis_state(space: &HilbertSpace, label: &[u8]) -> Result<Self> {
        check_label(space, label)?;
        let k = label.iter().map(|&o| o as usize).sum();
        let basis = Arc::new(SectorBasis::sector(space, k)?);
        let mut amps = vec![ZERO; basis.len()];
        amps[basis.index_of(label).expect("label belongs to its sector")] = C64::new(1.0, 0.0);
        Ok(Self { basis, amps })
    }

    /// `Σ_k (−1)^k |1_k⟩ / √(N+1)`, annihilated by every hopping jump.
    pub fn dark_state(space: &HilbertSpace) -> Result<Self> {
        let n = space.site_count();
        let basis = Arc::new(SectorBasis::sector(space, 1)?);
        let norm = 1.0 / libm::sqrt(n as f64);
        let mut amps = vec![ZERO; basis.len()];
        let mut label = vec![0u8; n];
        for k in 1..=n {
            label[k - 1] = 1;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            amps[basis.index_of(&label).unwrap()] = C64::new(sign * norm, 0.0);
            label[k - 1] = 0;
        }
        Ok(Self { basis, amps })
    }
}

fn check_label(space: &HilbertSpace, label: &[u8]) -> Result<()> {
    if label.len() != space.site_count() {
        return Err(Error::Shape(format!(
            "occupation tuple has {} sites, chain has {}",
            label.len(),
            space.site_count()
        )));
    }
    if let Some(&o) = label.iter().find(|&&o| o > space.kind().max_occupation()) {
        return Err(Error::InvalidState(format!(
            "occupation {o} exceeds the local maximum {}",
            space.kind().max_occupation()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    basis: Arc<SectorBasis>,
    data: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps a matrix without checking the density-matrix invariants.
    pub fn from_matrix(basis: Arc<SectorBasis>, data: DMatrix<C64>) -> Result<Self> {
        if data.nrows() != basis.len() || data.ncols() != basis.len() {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, basis has {} states",
                data.nrows(),
                data.ncols(),
                basis.len()
            )));
        }
        Ok(Self { basis, data })
    }

    /// Wraps and validates.
    pub fn new(basis: Arc<SectorBasis>, data: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_matrix(basis, data)?;
        rho.validate()?;
        Ok(rho)
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in j..n {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        linalg::min_hermitian_eigenvalue(&h)
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let h = self.hermiticity_defect();
        if h > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {h:.3e})")));
        }
        let m = self.min_eigenvalue();
        if m < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {m:.3e}")));
        }
        Ok(())
    }

    /// Diagonal state with the given weights over the basis states.
    pub fn diagonal(basis: Arc<SectorBasis>, weights: &[f64]) -> Result<Self> {
        if weights.len() != basis.len() {
            return Err(Error::Shape(format!(
                "{} weights for a basis of {} states",
                weights.len(),
                basis.len()
            )));
        }
        let d = DVector::from_iterator(weights.len(), weights.iter().map(|&w| C64::new(w, 0.0)));
        Self::new(basis, DMatrix::from_diagonal(&d))
    }

    /// Projector on a basis state, on the smallest basis that contains it.
    pub fn basis_projector(space: &HilbertSpace, label: &[u8]) -> Result<Self> {
        Ok(StateVector::basis_state(space, label)?.to_density())
    }

    /// Equal-weight mixture of the phase states
    /// `(|1_j⟩ + e^{iθ_j}|0⟩)/√2`, supported on the zero- and one-excitation
    /// sectors.
    pub fn phase_mixture(space: &HilbertSpace, thetas: &[f64]) -> Result<Self> {
        let n = space.site_count();
        if thetas.len() != n {
            return Err(Error::Shape(format!("{} angles for {n} sites", thetas.len())));
        }
        let basis = Arc::new(SectorBasis::union(space, &[0, 1])?);
        let mut data = DMatrix::zeros(basis.len(), basis.len());
        let vac = basis.index_of(&vec![0u8; n]).unwrap();
        let w = 1.0 / (2.0 * n as f64);
        data[(vac, vac)] = C64::new(0.5, 0.0);
        let mut label = vec![0u8; n];
        for (k, &theta) in thetas.iter().enumerate() {
            label[k] = 1;
            let i = basis.index_of(&label).unwrap();
            label[k] = 0;
            data[(i, i)] = C64::new(w, 0.0);
            let c = cexp(C64::new(0.0, -theta)) * w;
            data[(i, vac)] = c;
            data[(vac, i)] = c.conj();
        }
        Self::new(basis, data)
    }

    /// Re-expresses the state on a larger basis (zero outside).
    pub fn embed(&self, into: &Arc<SectorBasis>) -> Result<Self> {
        if Arc::ptr_eq(&self.basis, into) || self.basis.same_as(into) {
            return Ok(Self {
                basis: into.clone(),
                data: self.data.clone(),
            });
        }
        let idx = into.embedding_of(&self.basis)?;
        let mut data = DMatrix::zeros(into.len(), into.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                data[(i, j)] = self.data[(a, b)];
            }
        }
        Ok(Self {
            basis: into.clone(),
            data,
        })
    }

    /// Keeps only the states of `onto`; fails if weight would be dropped.
    pub fn restrict(&self, onto: &Arc<SectorBasis>) -> Result<Self> {
        let idx = self.basis.embedding_of(onto)?;
        let mut keep = vec![false; self.dim()];
        for &i in &idx {
            keep[i] = true;
        }
        for (i, kept) in keep.iter().enumerate() {
            if !kept && self.data.row(i).iter().any(|z| z.norm() > 0.0) {
                return Err(Error::Shape("state has support outside the target basis".into()));
            }
        }
        let data = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.data[(idx[a], idx[b])]);
        Ok(Self {
            basis: onto.clone(),
            data,
        })
    }

    /// `Tr(ρ op)`.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        if !(Arc::ptr_eq(&self.basis, op.basis()) || self.basis.same_as(op.basis())) {
            return Err(Error::Shape("operator and state live on different bases".into()));
        }
        Ok(op
            .entries()
            .iter()
            .map(|(r, c, v)| v * self.data[(c, r)])
            .sum())
    }

    /// Mean occupation of every site.
    pub fn populations(&self) -> Vec<f64> {
        let n = self.basis.space().site_count();
        let mut pops = vec![0.0; n];
        for i in 0..self.dim() {
            let p = self.data[(i, i)].re;
            for (s, &o) in self.basis.label(i).iter().enumerate() {
                if o > 0 {
                    pops[s] += p * o as f64;
                }
            }
        }
        pops
    }

    /// `Tr(ρ N_total)`.
    pub fn excitation(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.data[(i, i)].re * self.basis.total(i) as f64)
            .sum()
    }

    /// Matrix element between two occupation tuples (zero if either state is
    /// outside the basis).
    pub fn element(&self, bra: &[u8], ket: &[u8]) -> C64 {
        match (self.basis.index_of(bra), self.basis.index_of(ket)) {
            (Some(i), Some(j)) => self.data[(i, j)],
            _ => ZERO,
        }
    }

    /// Largest off-diagonal modulus.
    pub fn max_offdiagonal(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    worst = worst.max(self.data[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn sparse(&self) -> CsrMatrix {
        CsrMatrix::from_dense(&self.data)
    }
}

/// Smallest basis containing both states' supports.
pub fn common_basis(a: &Arc<SectorBasis>, b: &Arc<SectorBasis>) -> Result<Arc<SectorBasis>> {
    if Arc::ptr_eq(a, b) || a.same_as(b) {
        return Ok(a.clone());
    }
    if a.space() != b.space() {
        return Err(Error::Shape("states live on different chains".into()));
    }
    if a.is_full() {
        return Ok(a.clone());
    }
    if b.is_full() {
        return Ok(b.clone());
    }
    let mut ks: Vec<usize> = a.counts().to_vec();
    ks.extend_from_slice(b.counts());
    Ok(Arc::new(SectorBasis::union(a.space(), &ks)?))
}

/// `½‖a − b‖₁`, embedding both states in a common basis first.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    let basis = common_basis(&a.basis, &b.basis)?;
    let ea = a.embed(&basis)?;
    let eb = b.embed(&basis)?;
    Ok(0.5 * linalg::trace_norm(&(ea.data - eb.data)))
}

/// Entrywise max-abs difference in a common basis.
pub fn max_abs_difference(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    let basis = common_basis(&a.basis, &b.basis)?;
    Ok(linalg::max_abs(&(a.embed(&basis)?.data - b.embed(&basis)?.data)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_space, SiteKind};

    #[test]
    fn dark_state_is_normalized_with_alternating_signs() {
        let s = build_space(4, SiteKind::Tls).unwrap();
        let d = StateVector::dark_state(&s).unwrap();
        assert!((d.norm() - 1.0).abs() < 1e-15);
        let rho = d.to_density();
        assert!(rho.element(&[1, 0, 0, 0], &[0, 1, 0, 0]).re < 0.0);
        assert!(rho.element(&[1, 0, 0, 0], &[0, 0, 1, 0]).re > 0.0);
        assert!((d.excitation() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phase_mixture_entries() {
        let s = build_space(4, SiteKind::Tls).unwrap();
        let theta = [0.0, core::f64::consts::PI, 0.3, 1.0];
        let rho = DensityMatrix::phase_mixture(&s, &theta).unwrap();
        let pops = rho.populations();
        for p in pops {
            assert!((p - 1.0 / 8.0).abs() < 1e-15);
        }
        let c = rho.element(&[0, 0, 1, 0], &[0, 0, 0, 0]);
        assert!((c - cexp(C64::new(0.0, -0.3)) / 8.0).norm() < 1e-15);
        assert!(rho.min_eigenvalue() > -1e-14);
    }

    #[test]
    fn validation_rejects_bad_states() {
        let s = build_space(2, SiteKind::Tls).unwrap();
        let b = Arc::new(SectorBasis::sector(&s, 1).unwrap());
        assert!(matches!(
            DensityMatrix::diagonal(b.clone(), &[0.5, 0.4]),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            DensityMatrix::diagonal(b.clone(), &[1.5, -0.5]),
            Err(Error::InvalidState(_))
        ));
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(0.5, 0.0), C64::new(0.1, 0.0), ZERO, C64::new(0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(b, m), Err(Error::InvalidState(_))));
    }

    #[test]
    fn trace_distance_across_sectors() {
        let s = build_space(3, SiteKind::Tls).unwrap();
        let a = DensityMatrix::basis_projector(&s, &[1, 0, 0]).unwrap();
        let b = DensityMatrix::basis_projector(&s, &[1, 1, 0]).unwrap();
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        let full = Arc::new(SectorBasis::full(&s).unwrap());
        let ea = a.embed(&full).unwrap();
        assert!(trace_distance(&ea, &a).unwrap() < 1e-15);
        let back = ea.restrict(a.basis()).unwrap();
        assert_eq!(back.matrix(), a.matrix());
        assert!(ea.restrict(b.basis()).is_err());
    }
}
