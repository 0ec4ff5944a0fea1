//! Hilbert spaces of TLS / truncated boson chains, excitation sectors and the
//! excitation-conserving operator algebra used by every model.
//!
//! Basis states are occupation tuples stored little-endian: site 1 is the
//! fastest-varying digit of the parent index. Occupation 1 on a TLS site is the
//! upper level.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub const DEFAULT_DIM_CAP: u128 = 1 << 20;

const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SiteKind {
    Tls,
    Boson { n_max: u8 },
}

impl SiteKind {
    pub fn max_occupation(self) -> u8 {
        match self {
            SiteKind::Tls => 1,
            SiteKind::Boson { n_max } => n_max,
        }
    }

    pub fn local_dim(self) -> usize {
        self.max_occupation() as usize + 1
    }

    fn raise_amp(self, occ: u8) -> f64 {
        match self {
            SiteKind::Tls => 1.0,
            SiteKind::Boson { .. } => libm::sqrt(occ as f64 + 1.0),
        }
    }

    fn lower_amp(self, occ: u8) -> f64 {
        match self {
            SiteKind::Tls => 1.0,
            SiteKind::Boson { .. } => libm::sqrt(occ as f64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    site_count: usize,
    kind: SiteKind,
    /// Saturates at `u128::MAX` for chains far beyond any full-space run.
    dim: u128,
}

impl HilbertSpace {
    /// A space description with no dimension cap. Only sector bases may be
    /// built on it when it is large.
    pub fn unbounded(site_count: usize, kind: SiteKind) -> Result<Self> {
        if site_count < 2 {
            return Err(Error::Config(format!("site_count must be >= 2, got {site_count}")));
        }
        if kind.max_occupation() == 0 {
            return Err(Error::Config("boson n_max must be >= 1".into()));
        }
        let d = kind.local_dim() as u128;
        let mut dim: u128 = 1;
        for _ in 0..site_count {
            dim = dim.saturating_mul(d);
        }
        Ok(Self {
            site_count,
            kind,
            dim,
        })
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn kind(&self) -> SiteKind {
        self.kind
    }

    pub fn dim(&self) -> u128 {
        self.dim
    }

    pub fn max_total(&self) -> usize {
        self.site_count * self.kind.max_occupation() as usize
    }

    /// Occupation tuple of a parent index.
    pub fn label(&self, mut index: u128) -> Vec<u8> {
        let d = self.kind.local_dim() as u128;
        (0..self.site_count)
            .map(|_| {
                let o = (index % d) as u8;
                index /= d;
                o
            })
            .collect()
    }

    pub fn index_of(&self, label: &[u8]) -> u128 {
        let d = self.kind.local_dim() as u128;
        label.iter().rev().fold(0u128, |acc, &o| acc * d + o as u128)
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.site_count {
            Err(Error::SiteIndex {
                index: site,
                count: self.site_count,
            })
        } else {
            Ok(())
        }
    }
}

pub fn build_space(site_count: usize, kind: SiteKind) -> Result<HilbertSpace> {
    build_space_with_cap(site_count, kind, DEFAULT_DIM_CAP)
}

pub fn build_space_with_cap(site_count: usize, kind: SiteKind, cap: u128) -> Result<HilbertSpace> {
    let space = HilbertSpace::unbounded(site_count, kind)?;
    if space.dim > cap {
        return Err(Error::Resource {
            what: "Hilbert-space dimension",
            requested: space.dim,
            cap,
        });
    }
    Ok(space)
}

/// An ordered list of basis states of a parent space, all of whose total
/// occupations lie in `counts`. States are kept in ascending parent-index
/// order.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    space: HilbertSpace,
    counts: Vec<usize>,
    labels: Vec<u8>,
    totals: Vec<usize>,
    /// `None` when the basis is the whole parent space (index is arithmetic).
    lookup: Option<BTreeMap<Vec<u8>, usize>>,
}

impl SectorBasis {
    /// States with exactly `k` excitations.
    pub fn sector(space: &HilbertSpace, k: usize) -> Result<Self> {
        Self::union(space, &[k])
    }

    /// States whose excitation count is any of `ks`.
    pub fn union(space: &HilbertSpace, ks: &[usize]) -> Result<Self> {
        let mut counts: Vec<usize> = ks.to_vec();
        counts.sort_unstable();
        counts.dedup();
        if let Some(&k) = counts.iter().find(|&&k| k > space.max_total()) {
            return Err(Error::Config(format!(
                "excitation count {k} exceeds maximum {}",
                space.max_total()
            )));
        }
        let size: u128 = counts.iter().map(|&k| sector_size(space, k)).sum();
        if size > DEFAULT_DIM_CAP {
            return Err(Error::Resource {
                what: "sector dimension",
                requested: size,
                cap: DEFAULT_DIM_CAP,
            });
        }
        if size == space.dim {
            return Self::full(space);
        }
        let n = space.site_count;
        let mut states: Vec<(Vec<u8>, usize)> = Vec::with_capacity(size as usize);
        for &k in &counts {
            let mut label = vec![0u8; n];
            enumerate(space.kind.max_occupation(), n, k, &mut label, &mut |l| {
                states.push((l.to_vec(), k))
            });
        }
        // ascending parent index = lexicographic on the reversed tuple
        states.sort_by(|a, b| a.0.iter().rev().cmp(b.0.iter().rev()));
        let mut labels = Vec::with_capacity(states.len() * n);
        let mut totals = Vec::with_capacity(states.len());
        let mut lookup = BTreeMap::new();
        for (i, (l, k)) in states.into_iter().enumerate() {
            labels.extend_from_slice(&l);
            totals.push(k);
            lookup.insert(l, i);
        }
        Ok(Self {
            space: *space,
            counts,
            labels,
            totals,
            lookup: Some(lookup),
        })
    }

    /// Every state of the parent space.
    pub fn full(space: &HilbertSpace) -> Result<Self> {
        if space.dim > DEFAULT_DIM_CAP {
            return Err(Error::Resource {
                what: "Hilbert-space dimension",
                requested: space.dim,
                cap: DEFAULT_DIM_CAP,
            });
        }
        let dim = space.dim as usize;
        let n = space.site_count;
        let mut labels = Vec::with_capacity(dim * n);
        let mut totals = Vec::with_capacity(dim);
        for i in 0..dim {
            let l = space.label(i as u128);
            totals.push(l.iter().map(|&o| o as usize).sum());
            labels.extend_from_slice(&l);
        }
        Ok(Self {
            space: *space,
            counts: (0..=space.max_total()).collect(),
            labels,
            totals,
            lookup: None,
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.lookup.is_none()
    }

    pub fn label(&self, i: usize) -> &[u8] {
        let n = self.space.site_count;
        &self.labels[i * n..(i + 1) * n]
    }

    pub fn total(&self, i: usize) -> usize {
        self.totals[i]
    }

    pub fn parent_index(&self, i: usize) -> u128 {
        self.space.index_of(self.label(i))
    }

    pub fn index_of(&self, label: &[u8]) -> Option<usize> {
        match &self.lookup {
            None => Some(self.space.index_of(label) as usize),
            Some(map) => map.get(label).copied(),
        }
    }

    /// Indices of the states carrying exactly `k` excitations.
    pub fn indices_with_total(&self, k: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.totals[i] == k).collect()
    }

    /// Position of each of `other`'s states inside `self`.
    pub fn embedding_of(&self, other: &SectorBasis) -> Result<Vec<usize>> {
        if other.space != self.space {
            return Err(Error::Shape("bases live on different parent spaces".into()));
        }
        (0..other.len())
            .map(|i| {
                self.index_of(other.label(i)).ok_or_else(|| {
                    Error::Shape(format!("state {:?} not contained in target basis", other.label(i)))
                })
            })
            .collect()
    }

    pub fn same_as(&self, other: &SectorBasis) -> bool {
        self.space == other.space && self.labels == other.labels
    }
}

pub fn sector_size(space: &HilbertSpace, k: usize) -> u128 {
    // number of tuples of length n with entries in 0..=m summing to k
    let m = space.kind.max_occupation() as usize;
    let mut ways = vec![0u128; k + 1];
    ways[0] = 1;
    for _ in 0..space.site_count {
        let mut next = vec![0u128; k + 1];
        for (s, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for o in 0..=m.min(k - s) {
                next[s + o] = next[s + o].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[k]
}

fn enumerate(m: u8, n: usize, k: usize, label: &mut [u8], emit: &mut impl FnMut(&[u8])) {
    fn rec(m: u8, site: usize, left: usize, label: &mut [u8], emit: &mut impl FnMut(&[u8])) {
        if site == 0 {
            if left == 0 {
                emit(label);
            }
            return;
        }
        let cap = (m as usize) * site;
        if left > cap {
            return;
        }
        for o in 0..=(m as usize).min(left) {
            label[site - 1] = o as u8;
            rec(m, site - 1, left - o, label, emit);
        }
        label[site - 1] = 0;
    }
    rec(m, n, k, label, emit);
}

/// A complex matrix acting on the states of a basis.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    basis: Arc<SectorBasis>,
    entries: CsrMatrix,
}

impl OperatorMatrix {
    pub fn new(basis: Arc<SectorBasis>, entries: CsrMatrix) -> Result<Self> {
        if entries.nrows() != basis.len() || entries.ncols() != basis.len() {
            return Err(Error::Shape(format!(
                "operator is {}x{}, basis has {} states",
                entries.nrows(),
                entries.ncols(),
                basis.len()
            )));
        }
        Ok(Self { basis, entries })
    }

    pub fn zero(basis: Arc<SectorBasis>) -> Self {
        let n = basis.len();
        Self {
            basis,
            entries: CsrMatrix::zeros(n, n),
        }
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn entries(&self) -> &CsrMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            entries: self.entries.adjoint(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            basis: self.basis.clone(),
            entries: self.entries.scale(s),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            basis: self.basis.clone(),
            entries: self.entries.add_scaled(&other.entries, ONE),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            basis: self.basis.clone(),
            entries: self.entries.add_scaled(&other.entries, -ONE),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            basis: self.basis.clone(),
            entries: self.entries.matmul(&other.entries),
        })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "vector has {} entries, operator acts on {}",
                x.len(),
                self.dim()
            )));
        }
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.entries.mul_vec(x, &mut y);
        Ok(y)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.max_abs()
    }

    /// Max-abs entry of `[self, N_total]`, computed from the basis totals.
    pub fn conservation_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|(r, c, v)| {
                let d = self.basis.total(c) as f64 - self.basis.total(r) as f64;
                crate::sparse::cabs(v) * libm::fabs(d)
            })
            .fold(0.0, f64::max)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis.same_as(&other.basis) {
            Ok(())
        } else {
            Err(Error::Shape("operators act on different bases".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteOp {
    Raise,
    Lower,
    Number,
}

/// A single-site operator on the full space of `space`.
pub fn site_operator(space: &HilbertSpace, site: usize, op: SiteOp) -> Result<OperatorMatrix> {
    space.check_site(site)?;
    let basis = Arc::new(SectorBasis::full(space)?);
    site_operator_on(&basis, site, op)
}

pub fn site_operator_on(basis: &Arc<SectorBasis>, site: usize, op: SiteOp) -> Result<OperatorMatrix> {
    let space = basis.space();
    space.check_site(site)?;
    let kind = space.kind();
    let top = kind.max_occupation();
    let s = site - 1;
    let mut t = Vec::new();
    let mut scratch = Vec::new();
    for i in 0..basis.len() {
        let occ = basis.label(i)[s];
        match op {
            SiteOp::Number => {
                if occ > 0 {
                    t.push((i, i, C64::new(occ as f64, 0.0)));
                }
            }
            SiteOp::Raise | SiteOp::Lower => {
                let (new, amp) = match op {
                    SiteOp::Raise if occ < top => (occ + 1, kind.raise_amp(occ)),
                    SiteOp::Lower if occ > 0 => (occ - 1, kind.lower_amp(occ)),
                    _ => continue,
                };
                scratch.clear();
                scratch.extend_from_slice(basis.label(i));
                scratch[s] = new;
                match basis.index_of(&scratch) {
                    Some(j) => t.push((j, i, C64::new(amp, 0.0))),
                    None => {
                        return Err(Error::NotConserving(amp));
                    }
                }
            }
        }
    }
    let n = basis.len();
    OperatorMatrix::new(basis.clone(), CsrMatrix::from_triplets(n, n, t))
}

pub fn total_number(basis: &Arc<SectorBasis>) -> OperatorMatrix {
    let n = basis.len();
    let t = (0..n)
        .filter(|&i| basis.total(i) > 0)
        .map(|i| (i, i, C64::new(basis.total(i) as f64, 0.0)))
        .collect();
    OperatorMatrix {
        basis: basis.clone(),
        entries: CsrMatrix::from_triplets(n, n, t),
    }
}

/// Restricts an excitation-conserving operator to `sector`, whose states must
/// all belong to the operator's basis.
pub fn project_to_sector(op: &OperatorMatrix, sector: &Arc<SectorBasis>) -> Result<OperatorMatrix> {
    let defect = op.conservation_defect();
    if defect >= 1e-12 {
        return Err(Error::NotConserving(defect));
    }
    let idx = op.basis.embedding_of(sector)?;
    OperatorMatrix::new(sector.clone(), op.entries.submatrix(&idx, &idx))
}

/// Lifts a vector on `from` into the (larger) basis `into`, zero elsewhere.
pub fn embed_vector(from: &SectorBasis, into: &SectorBasis, x: &[C64]) -> Result<Vec<C64>> {
    let idx = into.embedding_of(from)?;
    let mut y = vec![C64::new(0.0, 0.0); into.len()];
    for (&j, &v) in idx.iter().zip(x) {
        y[j] = v;
    }
    Ok(y)
}

/// Number-conserving monomials: `Number(j)` is `n_j`, `Hop { to, from }` is
/// `σ⁺_to σ⁻_from` (or `a†_to a_from`). Sites are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monomial {
    Number(usize),
    Hop { to: usize, from: usize },
}

/// A linear combination of conserving monomials, realized lazily on any
/// basis closed under excitation number.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConservingOperator {
    pub terms: Vec<(C64, Monomial)>,
}

impl ConservingOperator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, coef: C64, m: Monomial) -> &mut Self {
        if coef != C64::new(0.0, 0.0) {
            self.terms.push((coef, m));
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Hermitian conjugate.
    pub fn adjoint(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|&(c, m)| {
                    let m = match m {
                        Monomial::Number(j) => Monomial::Number(j),
                        Monomial::Hop { to, from } => Monomial::Hop { to: from, from: to },
                    };
                    (c.conj(), m)
                })
                .collect(),
        }
    }

    pub fn realize(&self, basis: &Arc<SectorBasis>) -> Result<OperatorMatrix> {
        let space = basis.space();
        let kind = space.kind();
        let top = kind.max_occupation();
        for &(_, m) in &self.terms {
            match m {
                Monomial::Number(j) => space.check_site(j)?,
                Monomial::Hop { to, from } => {
                    space.check_site(to)?;
                    space.check_site(from)?;
                    if to == from {
                        return Err(Error::Config("hop term needs two distinct sites".into()));
                    }
                }
            }
        }
        let mut t = Vec::new();
        let mut scratch = Vec::new();
        for i in 0..basis.len() {
            let label = basis.label(i);
            for &(coef, m) in &self.terms {
                match m {
                    Monomial::Number(j) => {
                        let o = label[j - 1];
                        if o > 0 {
                            t.push((i, i, coef * o as f64));
                        }
                    }
                    Monomial::Hop { to, from } => {
                        let of = label[from - 1];
                        let ot = label[to - 1];
                        if of == 0 || ot >= top {
                            continue;
                        }
                        let amp = kind.lower_amp(of) * kind.raise_amp(ot);
                        scratch.clear();
                        scratch.extend_from_slice(label);
                        scratch[from - 1] -= 1;
                        scratch[to - 1] += 1;
                        let j = basis.index_of(&scratch).ok_or_else(|| {
                            Error::Shape("basis is not closed under excitation-conserving moves".into())
                        })?;
                        t.push((j, i, coef * amp));
                    }
                }
            }
        }
        let n = basis.len();
        OperatorMatrix::new(basis.clone(), CsrMatrix::from_triplets(n, n, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full(n: usize, kind: SiteKind) -> Arc<SectorBasis> {
        Arc::new(SectorBasis::full(&build_space(n, kind).unwrap()).unwrap())
    }

    fn basis_vec(basis: &SectorBasis, label: &[u8]) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); basis.len()];
        v[basis.index_of(label).unwrap()] = ONE;
        v
    }

    #[test]
    fn space_dimensions() {
        assert_eq!(build_space(2, SiteKind::Tls).unwrap().dim(), 4);
        assert_eq!(build_space(5, SiteKind::Tls).unwrap().dim(), 32);
        assert_eq!(build_space(3, SiteKind::Boson { n_max: 2 }).unwrap().dim(), 27);
        assert!(matches!(build_space(1, SiteKind::Tls), Err(Error::Config(_))));
        assert!(matches!(build_space(21, SiteKind::Tls), Err(Error::Resource { .. })));
        assert!(matches!(
            build_space(3, SiteKind::Boson { n_max: 0 }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn labels_are_little_endian() {
        let s = build_space(3, SiteKind::Tls).unwrap();
        assert_eq!(s.label(1), vec![1, 0, 0]);
        assert_eq!(s.label(6), vec![0, 1, 1]);
        assert_eq!(s.index_of(&[0, 0, 1]), 4);
    }

    #[test]
    fn sector_sizes() {
        let s5 = build_space(5, SiteKind::Tls).unwrap();
        assert_eq!(SectorBasis::sector(&s5, 1).unwrap().len(), 5);
        let s4 = build_space(4, SiteKind::Tls).unwrap();
        assert_eq!(SectorBasis::sector(&s4, 2).unwrap().len(), 6);
        let s3 = build_space(3, SiteKind::Tls).unwrap();
        let vac = SectorBasis::sector(&s3, 0).unwrap();
        assert_eq!(vac.len(), 1);
        assert_eq!(vac.label(0), &[0, 0, 0]);
        let big = HilbertSpace::unbounded(100, SiteKind::Tls).unwrap();
        assert_eq!(SectorBasis::sector(&big, 1).unwrap().len(), 100);
        let b = build_space(3, SiteKind::Boson { n_max: 2 }).unwrap();
        assert_eq!(SectorBasis::sector(&b, 2).unwrap().len(), 6);
    }

    #[test]
    fn sector_states_are_ordered_and_complete() {
        let s = build_space(5, SiteKind::Tls).unwrap();
        let sec = SectorBasis::sector(&s, 2).unwrap();
        let mut prev = None;
        for i in 0..sec.len() {
            assert_eq!(sec.label(i).iter().map(|&o| o as usize).sum::<usize>(), 2);
            let p = sec.parent_index(i);
            assert!(prev.map_or(true, |q| q < p));
            prev = Some(p);
        }
        let expected = (0..32u128).filter(|i| i.count_ones() == 2).count();
        assert_eq!(sec.len(), expected);
    }

    #[test]
    fn site_operator_actions() {
        let b = full(2, SiteKind::Tls);
        let n1 = site_operator_on(&b, 1, SiteOp::Number).unwrap();
        let plus_minus = basis_vec(&b, &[1, 0]);
        assert_eq!(n1.apply(&plus_minus).unwrap(), plus_minus);
        let lower = site_operator_on(&b, 1, SiteOp::Lower).unwrap();
        assert_eq!(lower.apply(&plus_minus).unwrap(), basis_vec(&b, &[0, 0]));
        assert!(matches!(
            site_operator_on(&b, 3, SiteOp::Raise),
            Err(Error::SiteIndex { index: 3, count: 2 })
        ));

        let bb = full(2, SiteKind::Boson { n_max: 2 });
        let a1dag = site_operator_on(&bb, 1, SiteOp::Raise).unwrap();
        let top = basis_vec(&bb, &[2, 0]);
        assert_eq!(a1dag.apply(&top).unwrap().iter().map(|z| z.norm()).sum::<f64>(), 0.0);
    }

    #[test]
    fn tls_site_algebra() {
        let b = full(3, SiteKind::Tls);
        for j in 1..=3 {
            let up = site_operator_on(&b, j, SiteOp::Raise).unwrap();
            let dn = site_operator_on(&b, j, SiteOp::Lower).unwrap();
            let num = site_operator_on(&b, j, SiteOp::Number).unwrap();
            assert_eq!(up.matmul(&up).unwrap().max_abs(), 0.0);
            let anti = up.matmul(&dn).unwrap().add(&dn.matmul(&up).unwrap()).unwrap();
            let id = OperatorMatrix::new(b.clone(), CsrMatrix::identity(b.len())).unwrap();
            assert_eq!(anti.sub(&id).unwrap().max_abs(), 0.0);
            assert_eq!(up.matmul(&dn).unwrap().sub(&num).unwrap().max_abs(), 0.0);
            assert_eq!(up.adjoint().sub(&dn).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn boson_commutator_below_truncation() {
        let b = full(2, SiteKind::Boson { n_max: 3 });
        let a = site_operator_on(&b, 1, SiteOp::Lower).unwrap();
        let ad = site_operator_on(&b, 1, SiteOp::Raise).unwrap();
        let comm = a.commutator(&ad).unwrap();
        for i in 0..b.len() {
            let o = b.label(i)[0];
            let d = comm.entries().get(i, i).re;
            if o < 3 {
                assert!((d - 1.0).abs() < 1e-14);
            } else {
                assert!((d + 3.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn projection_of_total_number_and_l1() {
        let b = full(3, SiteKind::Tls);
        let n = total_number(&b);
        let sec = Arc::new(SectorBasis::sector(b.space(), 1).unwrap());
        let p = project_to_sector(&n, &sec).unwrap();
        assert_eq!(p.entries().to_dense(), nalgebra::DMatrix::identity(3, 3));

        let b2 = full(2, SiteKind::Tls);
        let s = |j, op| site_operator_on(&b2, j, op).unwrap();
        let up = s(1, SiteOp::Raise).add(&s(2, SiteOp::Raise)).unwrap();
        let l1 = up.matmul(&up.adjoint()).unwrap();
        let sec2 = Arc::new(SectorBasis::sector(b2.space(), 1).unwrap());
        let p = project_to_sector(&l1, &sec2).unwrap();
        let d = p.entries().to_dense();
        for v in d.iter() {
            assert_eq!(*v, ONE);
        }

        let raise = s(1, SiteOp::Raise);
        assert!(matches!(project_to_sector(&raise, &sec2), Err(Error::NotConserving(_))));
    }

    #[test]
    fn realized_terms_match_site_products() {
        for kind in [SiteKind::Tls, SiteKind::Boson { n_max: 2 }] {
            let b = full(3, kind);
            let s = |j, op| site_operator_on(&b, j, op).unwrap();
            let mut op = ConservingOperator::new();
            op.push(C64::new(0.5, 0.25), Monomial::Hop { to: 1, from: 2 })
                .push(C64::new(-1.0, 0.0), Monomial::Number(3))
                .push(C64::new(0.0, 2.0), Monomial::Hop { to: 3, from: 2 });
            let want = s(1, SiteOp::Raise)
                .matmul(&s(2, SiteOp::Lower))
                .unwrap()
                .scale(C64::new(0.5, 0.25))
                .sub(&s(3, SiteOp::Number))
                .unwrap()
                .add(
                    &s(3, SiteOp::Raise)
                        .matmul(&s(2, SiteOp::Lower))
                        .unwrap()
                        .scale(C64::new(0.0, 2.0)),
                )
                .unwrap();
            let got = op.realize(&b).unwrap();
            assert!(got.sub(&want).unwrap().max_abs() < 1e-15);
            let got_adj = op.adjoint().realize(&b).unwrap();
            assert!(got_adj.sub(&want.adjoint()).unwrap().max_abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn distinct_sites_commute(j in 1usize..=4, k in 1usize..=4, a in 0usize..3, c in 0usize..3, boson in any::<bool>()) {
            prop_assume!(j != k);
            let kind = if boson { SiteKind::Boson { n_max: 2 } } else { SiteKind::Tls };
            let b = full(4, kind);
            let ops = [SiteOp::Raise, SiteOp::Lower, SiteOp::Number];
            let x = site_operator_on(&b, j, ops[a]).unwrap();
            let y = site_operator_on(&b, k, ops[c]).unwrap();
            prop_assert!(x.commutator(&y).unwrap().max_abs() < 1e-14);
            let back = x.adjoint().adjoint();
            prop_assert_eq!(back.entries(), x.entries());
        }

        #[test]
        fn projection_round_trip(seed in 0u64..1000, k in 0usize..=4) {
            let b = full(4, SiteKind::Tls);
            let mut op = ConservingOperator::new();
            let mut s = seed;
            for j in 1..=3 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let c = C64::new((s >> 40) as f64 / 1e7, (s >> 20 & 0xfff) as f64 / 1e3);
                op.push(c, Monomial::Hop { to: j, from: j + 1 });
                op.push(c.conj() * 0.5, Monomial::Number(j));
            }
            let full_op = op.realize(&b).unwrap();
            let sec = Arc::new(SectorBasis::sector(b.space(), k).unwrap());
            let red = project_to_sector(&full_op, &sec).unwrap();
            let direct = op.realize(&sec).unwrap();
            prop_assert!(red.sub(&direct).unwrap().max_abs() < 1e-14);
            for i in 0..sec.len() {
                let mut x = vec![C64::new(0.0, 0.0); sec.len()];
                x[i] = C64::new(0.3, -0.7);
                let y_red = embed_vector(&sec, &b, &red.apply(&x).unwrap()).unwrap();
                let y_full = full_op.apply(&embed_vector(&sec, &b, &x).unwrap()).unwrap();
                for (u, v) in y_red.iter().zip(&y_full) {
                    prop_assert!((u - v).norm() < 1e-14);
                }
            }
        }
    }
}
