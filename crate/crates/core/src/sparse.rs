//! Compressed sparse row storage for complex matrices.
//!
//! Structural zeros are dropped at build time, so `nnz` counts only entries
//! that carry a nonzero value.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub(crate) fn cabs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            debug_assert!(r < nrows && c < ncols);
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != ZERO {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != ZERO {
                    t.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => ZERO,
        }
    }

    pub fn adjoint(&self) -> Self {
        let t = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn scale(&self, s: C64) -> Self {
        let t = self.iter().map(|(r, c, v)| (r, c, v * s)).collect();
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, s: C64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.iter().collect();
        t.extend(other.iter().map(|(r, c, v)| (r, c, v * s)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![ZERO; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        let mut t = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = ZERO;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                t.push((r, c, acc[c]));
            }
        }
        Self::from_triplets(self.nrows, other.ncols, t)
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    /// Dense product `self * x`.
    pub fn mul_dense(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        assert_eq!(self.ncols, x.nrows());
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            let xcol = x.column(j);
            let mut ocol = out.column_mut(j);
            for r in 0..self.nrows {
                let mut s = ZERO;
                for (c, v) in self.row(r) {
                    s += v * xcol[c];
                }
                ocol[r] = s;
            }
        }
        out
    }

    /// Dense product `x * self`.
    pub fn dense_mul(x: &DMatrix<C64>, m: &CsrMatrix) -> DMatrix<C64> {
        assert_eq!(x.ncols(), m.nrows);
        let mut out = DMatrix::zeros(x.nrows(), m.ncols);
        for k in 0..m.nrows {
            for (j, v) in m.row(k) {
                let xcol = x.column(k);
                let mut ocol = out.column_mut(j);
                for i in 0..x.nrows() {
                    ocol[i] += xcol[i] * v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| f64::max(m, cabs(v)))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| cabs(v)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Extracts the submatrix on the given row and column index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut t = Vec::new();
        for (new_r, &old_r) in rows.iter().enumerate() {
            for (c, v) in self.row(old_r) {
                let nc = col_map[c];
                if nc != usize::MAX {
                    t.push((new_r, nc, v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0)), (0, 1, c(-1.0)), (1, 0, c(2.0)), (1, 0, c(0.5))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), c(2.5));
        assert_eq!(m.get(0, 1), ZERO);
    }

    #[test]
    fn products_match_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, c(1.0)), (0, 2, C64::new(0.0, 2.0)), (2, 1, c(-3.0)), (1, 1, c(4.0))],
        );
        let b = a.adjoint();
        let ad = a.to_dense();
        let bd = b.to_dense();
        assert_eq!(a.matmul(&b).to_dense(), &ad * &bd);
        assert_eq!(a.mul_dense(&bd), &ad * &bd);
        assert_eq!(CsrMatrix::dense_mul(&ad, &b), &ad * &bd);
        let x = [c(1.0), C64::new(0.5, -1.0), c(2.0)];
        let mut y = [ZERO; 3];
        a.mul_vec(&x, &mut y);
        let yd = &ad * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!(cabs(y[i] - yd[i]) < 1e-15);
        }
    }

    #[test]
    fn submatrix_picks_entries() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 2, c(5.0)), (2, 0, c(7.0)), (1, 1, c(1.0))]);
        let s = a.submatrix(&[2, 0], &[0, 2]);
        assert_eq!(s.get(0, 0), c(7.0));
        assert_eq!(s.get(1, 1), c(5.0));
        assert_eq!(s.nnz(), 2);
    }
}
