//! Square complex sparse matrices in compressed-row form.
//!
//! Entries are kept sorted by (row, column) with duplicates merged, so any
//! sequence of constructions yields identical storage and identical
//! floating-point results.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{check_dim, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    /// Builds from (row, col, value) triplets. Repeated positions are summed
    /// in input order; exact zeros are dropped.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
        }
        // stable sort keeps the summation order of duplicates deterministic
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (r, c) => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != C64::new(0.0, 0.0));

        let mut row_ptr = vec![0; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let cols = merged.iter().map(|e| e.1).collect();
        let vals = merged.iter().map(|e| e.2).collect();
        Self { dim, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                triplets.push((r, c, m[(r, c)]));
            }
        }
        Self::from_triplets(m.nrows(), triplets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of one row as (column, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(i) => self.vals[span.start + i],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Rows holding at least one entry.
    pub fn nonempty_rows(&self) -> Vec<usize> {
        (0..self.dim).filter(|&r| self.row_ptr[r + 1] > self.row_ptr[r]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (r, c, v * s)))
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).vals.iter().fold(0.0, |acc, v| acc.max(v.norm()))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// `y = self · x` for a dense vector.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[i] * x[self.cols[i]];
            }
            *out = acc;
        }
    }

    /// `self · m` for a dense square matrix.
    pub fn mul_dense(&self, m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        check_dim(self.dim, m.nrows())?;
        let mut out = DMatrix::zeros(self.dim, m.ncols());
        for c in 0..m.ncols() {
            let col = m.column(c);
            for r in 0..self.dim {
                let mut acc = C64::new(0.0, 0.0);
                for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[i] * col[self.cols[i]];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(out)
    }

    /// `m · self` for a dense square matrix.
    pub fn dense_mul(&self, m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        check_dim(self.dim, m.ncols())?;
        let mut out = DMatrix::zeros(m.nrows(), self.dim);
        for (k, c, v) in self.iter() {
            let src = m.column(k).clone_owned();
            let mut dst = out.column_mut(c);
            dst.axpy(v, &src, C64::new(1.0, 0.0));
        }
        Ok(out)
    }

    /// Kronecker product `a ⊗ b`.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let dim = a.dim * b.dim;
        let mut triplets = Vec::with_capacity(a.nnz() * b.nnz());
        for (ar, ac, av) in a.iter() {
            for (br, bc, bv) in b.iter() {
                triplets.push((ar * b.dim + br, ac * b.dim + bc, av * bv));
            }
        }
        Self::from_triplets(dim, triplets)
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        OperatorMatrix::from_triplets(self.dim, self.iter().chain(rhs.iter()))
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        OperatorMatrix::from_triplets(
            self.dim,
            self.iter().chain(rhs.iter().map(|(r, c, v)| (r, c, -v))),
        )
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn neg(self) -> OperatorMatrix {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        let mut triplets = Vec::new();
        for r in 0..self.dim {
            for (k, v) in self.row(r) {
                for (c, w) in rhs.row(k) {
                    triplets.push((r, c, v * w));
                }
            }
        }
        OperatorMatrix::from_triplets(self.dim, triplets)
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: f64) -> OperatorMatrix {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Mul<C64> for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: C64) -> OperatorMatrix {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = OperatorMatrix::from_triplets(
            3,
            vec![(2, 1, c(1.0, 0.0)), (0, 0, c(2.0, 1.0)), (2, 1, c(-1.0, 0.0)), (1, 2, c(0.5, 0.0))],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), c(2.0, 1.0));
        assert_eq!(m.get(2, 1), c(0.0, 0.0));
        assert_eq!(m.get(1, 2), c(0.5, 0.0));
    }

    #[test]
    fn products_match_dense() {
        let a = OperatorMatrix::from_triplets(
            3,
            vec![(0, 1, c(1.0, 2.0)), (1, 2, c(-0.5, 0.0)), (2, 0, c(0.0, 3.0)), (2, 2, c(1.0, 0.0))],
        );
        let b = OperatorMatrix::from_triplets(
            3,
            vec![(0, 0, c(1.0, 0.0)), (1, 0, c(0.0, 1.0)), (2, 1, c(2.0, -1.0))],
        );
        let dense = a.to_dense() * b.to_dense();
        assert!(((&a * &b).to_dense() - &dense).norm() < 1e-14);
        assert!((a.mul_dense(&b.to_dense()).unwrap() - &dense).norm() < 1e-14);
        assert!((b.dense_mul(&a.to_dense()).unwrap() - &dense).norm() < 1e-14);
        assert!((a.adjoint().to_dense() - a.to_dense().adjoint()).norm() < 1e-15);

        let k = OperatorMatrix::kron(&a, &b).to_dense();
        let kd = a.to_dense().kronecker(&b.to_dense());
        assert!((k - kd).norm() < 1e-14);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = OperatorMatrix::from_triplets(2, vec![(0, 1, c(1.0, 1.0)), (1, 0, c(2.0, 0.0))]);
        let x = [c(1.0, 0.0), c(0.0, 1.0)];
        let mut y = [C64::default(); 2];
        a.matvec(&x, &mut y);
        assert_eq!(y, [c(-1.0, 1.0), c(2.0, 0.0)]);
    }
}
