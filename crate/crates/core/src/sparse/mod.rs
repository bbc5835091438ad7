//! Matrix-free sparse symmetric linear algebra.
//!
//! [`SparseSymmetric`] stores each off-diagonal pair once (upper triangle) and keeps an
//! expanded CSR copy for products. Everything downstream works through the
//! [`LinearOperator`] trait so that pencils `A + lambda B`, deflated operators and the
//! regularized operator of the near-singular solve never need to be assembled.

mod cg;
mod eig;

pub use cg::{cg_solve, cg_solve_deflated, CgStats};
pub(crate) use eig::euclidean_orthonormalize;
pub use eig::{min_gen_eig, nullspace_basis, EigOptions, EigResult, NullBasis};

use std::cell::Cell;

use crate::error::{check_dim, Error, Result};
use crate::vecops;

/// Sparse symmetric matrix.
///
/// Invariants: every stored `(row, col)` has `row <= col < n`, appears once, and is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    /// Upper-triangle triplets sorted by `(row, col)`.
    entries: Vec<(usize, usize, f64)>,
    csr: Csr,
}

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from triplets in either triangle. Duplicates (after folding `(j, i)` onto
    /// `(i, j)`) are summed and exact zeros dropped.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut upper: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::Input(format!(
                    "entry ({i}, {j}) outside a {n}x{n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Input(format!("non-finite entry at ({i}, {j})")));
            }
            upper.push((i.min(j), i.max(j), v));
        }
        upper.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(upper.len());
        for (i, j, v) in upper {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        Ok(Self::from_sorted_upper(n, merged))
    }

    fn from_sorted_upper(n: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        let csr = Csr::expand(n, &entries);
        SparseSymmetric { n, entries, csr }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_sorted_upper(n, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let entries = d
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, i, *v))
            .collect();
        Self::from_sorted_upper(d.len(), entries)
    }

    /// Builds from a dense row-major symmetric matrix, reading the upper triangle.
    pub fn from_dense(n: usize, data: &[f64]) -> Result<Self> {
        check_dim("SparseSymmetric::from_dense", n * n, data.len())?;
        let mut t = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = data[i * n + j];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored upper-triangle entries.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Number of nonzeros of the full symmetric matrix.
    pub fn nnz_full(&self) -> usize {
        self.csr.vals.len()
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        check_dim("SparseSymmetric::linear_combination", self.n, other.n)?;
        let t = self
            .entries
            .iter()
            .map(|&(i, j, v)| (i, j, alpha * v))
            .chain(other.entries.iter().map(|&(i, j, v)| (i, j, beta * v)));
        Self::from_triplets(self.n, t)
    }

    /// Row-major dense expansion.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n * n];
        for &(i, j, v) in &self.entries {
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
        d
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            if i == j {
                d[i] = v;
            }
        }
        d
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("matvec", self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `y = M x`, rows traversed in order.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        let csr = &self.csr;
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in csr.row_ptr[row]..csr.row_ptr[row + 1] {
                acc += csr.vals[k] * x[csr.cols[k]];
            }
            *out = acc;
        }
    }

    /// Crude bound on ‖M‖₂ (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let csr = &self.csr;
        (0..self.n)
            .map(|r| {
                csr.vals[csr.row_ptr[r]..csr.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

impl Csr {
    fn expand(n: usize, upper: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n];
        for &(i, j, _) in upper {
            counts[i] += 1;
            if i != j {
                counts[j] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for r in 0..n {
            row_ptr[r + 1] = row_ptr[r] + counts[r];
        }
        let nnz = row_ptr[n];
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut fill = row_ptr[..n].to_vec();
        // Lower-triangle entries of a row come from earlier upper rows, so a single pass
        // over the sorted upper list yields column-sorted rows.
        for &(i, j, v) in upper {
            if i != j {
                let p = fill[j];
                cols[p] = i;
                vals[p] = v;
                fill[j] += 1;
            }
            let p = fill[i];
            cols[p] = j;
            vals[p] = v;
            fill[i] += 1;
        }
        Csr {
            row_ptr,
            cols,
            vals,
        }
    }
}

/// A symmetric linear map applied without forming a matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y = Op x`; `y` is fully overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for SparseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// Counts sparse matrix products performed by operators that carry it.
#[derive(Debug, Default)]
pub struct MatvecCounter(Cell<u64>);

impl MatvecCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, k: u64) {
        self.0.set(self.0.get() + k);
    }

    pub fn get(&self) -> u64 {
        self.0.get()
    }
}

/// `alpha * A + beta * B`, optionally with a matvec counter.
#[derive(Clone, Copy)]
pub struct Pencil<'a> {
    first: &'a SparseSymmetric,
    alpha: f64,
    second: Option<(&'a SparseSymmetric, f64)>,
    counter: Option<&'a MatvecCounter>,
}

impl<'a> Pencil<'a> {
    /// `A + lambda B`.
    pub fn new(a: &'a SparseSymmetric, b: &'a SparseSymmetric, lambda: f64) -> Self {
        Pencil {
            first: a,
            alpha: 1.0,
            second: Some((b, lambda)),
            counter: None,
        }
    }

    /// `alpha * M`.
    pub fn scaled(m: &'a SparseSymmetric, alpha: f64) -> Self {
        Pencil {
            first: m,
            alpha,
            second: None,
            counter: None,
        }
    }

    pub fn counted(mut self, counter: &'a MatvecCounter) -> Self {
        self.counter = Some(counter);
        self
    }
}

impl LinearOperator for Pencil<'_> {
    fn dim(&self) -> usize {
        self.first.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.first.matvec_into(x, y);
        if self.alpha != 1.0 {
            vecops::scale(self.alpha, y);
        }
        let mut products = 1;
        if let Some((b, beta)) = self.second {
            if beta != 0.0 {
                let mut t = vec![0.0; x.len()];
                b.matvec_into(x, &mut t);
                vecops::axpy(beta, &t, y);
                products += 1;
            }
        }
        if let Some(c) = self.counter {
            c.add(products);
        }
    }
}

/// Identity operator of a given dimension.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Operator defined by a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Estimate of ‖Op‖₂ from a few power iterations on a fixed start vector.
pub fn norm_estimate<O: LinearOperator + ?Sized>(op: &O, iterations: usize) -> f64 {
    let n = op.dim();
    if n == 0 {
        return 0.0;
    }
    // Irrational-step start vector has components along every eigenvector generically.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_75).fract())
        .collect();
    let nv = vecops::norm(&v);
    vecops::scale(1.0 / nv, &mut v);
    let mut est = 0.0;
    let mut w = vec![0.0; n];
    for _ in 0..iterations.max(1) {
        op.apply(&v, &mut w);
        let nw = vecops::norm(&w);
        if nw == 0.0 {
            break;
        }
        est = nw;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(n: usize, d: &[f64], x: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| d[i * n + j] * x[j]).sum())
            .collect()
    }

    #[test]
    fn example_one_matvec() {
        let a = SparseSymmetric::from_diagonal(&[-1.0, 1.0]);
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let z = SparseSymmetric::zeros(4);
        assert_eq!(z.matvec(&[1.0, -2.0, 3.0, 4.0]).unwrap(), vec![0.0; 4]);
        assert_eq!(z.nnz_full(), 0);
    }

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let m = SparseSymmetric::from_triplets(
            3,
            vec![
                (0, 1, 1.0),
                (1, 0, 2.0),
                (2, 2, 0.0),
                (1, 1, 5.0),
                (1, 1, -5.0),
            ],
        )
        .unwrap();
        assert_eq!(m.entries(), &[(0, 1, 3.0)]);
    }

    #[test]
    fn random_sparse_matches_dense_expansion() {
        let t = vec![
            (0, 0, 2.0),
            (0, 3, -1.5),
            (1, 2, 0.25),
            (4, 1, 3.0),
            (2, 2, -4.0),
            (3, 4, 0.75),
        ];
        let m = SparseSymmetric::from_triplets(5, t).unwrap();
        let d = m.to_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(d[i * 5 + j], d[j * 5 + i]);
            }
        }
        let x = [0.3, -1.2, 2.5, 0.7, -0.9];
        let y = m.matvec(&x).unwrap();
        let yd = dense_mul(5, &d, &x);
        for (a, b) in y.iter().zip(&yd) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let m = SparseSymmetric::identity(3);
        assert!(matches!(m.matvec(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn out_of_range_entry_rejected() {
        assert!(SparseSymmetric::from_triplets(2, vec![(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn pencil_counts_products() {
        let a = SparseSymmetric::identity(2);
        let b = SparseSymmetric::from_diagonal(&[1.0, -1.0]);
        let c = MatvecCounter::new();
        let p = Pencil::new(&a, &b, 0.5).counted(&c);
        assert_eq!(p.apply_vec(&[1.0, 1.0]), vec![1.5, 0.5]);
        assert_eq!(c.get(), 2);
    }

    #[test]
    fn norm_estimate_diagonal() {
        let m = SparseSymmetric::from_diagonal(&[1.0, -3.0, 2.0]);
        let e = norm_estimate(&m, 60);
        assert!((e - 3.0).abs() < 1e-6);
    }
}
