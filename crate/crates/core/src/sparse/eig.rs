//! Smallest eigenpairs of a symmetric pencil `(M, S)` with `S` positive definite.
//!
//! The search space is grown with `S⁻¹ r` for the residual `r = M u − θ S u` of each
//! unconverged Ritz pair (the `S⁻¹` applications are CG solves), so the space stays a
//! Krylov space of `S⁻¹M`. Rayleigh–Ritz is done on the projected pencil and the basis
//! is thick-restarted with the leading Ritz vectors when it fills up.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{cg_solve, norm_estimate, LinearOperator};
use crate::error::{check_dim, Error, Result};
use crate::vecops::{axpy, dot, norm, scale};

#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Accept a pair when ‖M v − θ S v‖ ≤ tol · (‖M‖ + |θ| ‖S‖) with vᵀSv = 1.
    pub tol: f64,
    pub max_iter: usize,
    pub max_basis: usize,
    /// Relative tolerance of the inner CG solves with `S`.
    pub inner_tol: f64,
    pub inner_max_iter: Option<usize>,
    pub seed: u64,
    /// Fill the basis with fixed quasi-random vectors instead of seeded random ones.
    pub seedless: bool,
    /// Warm-start vectors placed first in the initial basis.
    pub start: Vec<Vec<f64>>,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            tol: 1e-11,
            max_iter: 3000,
            max_basis: 32,
            inner_tol: 1e-11,
            inner_max_iter: None,
            seed: 0x5eed,
            seedless: false,
            start: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Ascending.
    pub values: Vec<f64>,
    /// S-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    /// ‖M v − θ S v‖ per pair, recomputed from fresh products.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub m_norm: f64,
    pub s_norm: f64,
}

impl EigResult {
    /// Residual bound each pair satisfies.
    pub fn residual_bound(&self, tol: f64, i: usize) -> f64 {
        tol * (self.m_norm + self.values[i].abs() * self.s_norm)
    }
}

struct Basis {
    v: Vec<Vec<f64>>,
    sv: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
    /// Projected `VᵀSV` and `VᵀMV`.
    g: DMatrix<f64>,
    h: DMatrix<f64>,
}

impl Basis {
    fn new() -> Self {
        Basis {
            v: Vec::new(),
            sv: Vec::new(),
            mv: Vec::new(),
            g: DMatrix::zeros(0, 0),
            h: DMatrix::zeros(0, 0),
        }
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    /// S-orthogonalizes `t` against the basis and appends it. Returns false if `t` is
    /// numerically inside the span.
    fn push<M, S>(&mut self, mut t: Vec<f64>, m: &M, s: &S) -> bool
    where
        M: LinearOperator + ?Sized,
        S: LinearOperator + ?Sized,
    {
        let before = norm(&t);
        if before == 0.0 || !before.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for (vj, svj) in self.v.iter().zip(&self.sv) {
                let c = dot(svj, &t);
                axpy(-c, vj, &mut t);
            }
        }
        if norm(&t) <= 1e-10 * before {
            return false;
        }
        let mut st = s.apply_vec(&t);
        let sn2 = dot(&t, &st);
        if !(sn2 > 0.0) {
            return false;
        }
        let inv = 1.0 / sn2.sqrt();
        scale(inv, &mut t);
        scale(inv, &mut st);
        let mt = m.apply_vec(&t);

        let k = self.len();
        let mut g = DMatrix::zeros(k + 1, k + 1);
        let mut h = DMatrix::zeros(k + 1, k + 1);
        g.view_mut((0, 0), (k, k)).copy_from(&self.g);
        h.view_mut((0, 0), (k, k)).copy_from(&self.h);
        for j in 0..k {
            let gj = dot(&self.v[j], &st);
            let hj = dot(&self.v[j], &mt);
            g[(j, k)] = gj;
            g[(k, j)] = gj;
            h[(j, k)] = hj;
            h[(k, j)] = hj;
        }
        g[(k, k)] = dot(&t, &st);
        h[(k, k)] = dot(&t, &mt);
        self.g = g;
        self.h = h;
        self.v.push(t);
        self.sv.push(st);
        self.mv.push(mt);
        true
    }

    /// Rayleigh–Ritz on `(H, G)`: ascending values and G-orthonormal coefficient columns.
    fn ritz(&self) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let m = self.len();
        let chol = self.g.clone().cholesky()?;
        let linv = chol.l().try_inverse()?;
        let mut c = &linv * &self.h * linv.transpose();
        c = (&c + c.transpose()) * 0.5;
        let eig = c.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let w = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        Some((values, linv.transpose() * w))
    }

    fn combine(cols: &[Vec<f64>], y: &DMatrix<f64>, j: usize) -> Vec<f64> {
        let n = cols[0].len();
        let mut out = vec![0.0; n];
        for (i, c) in cols.iter().enumerate() {
            let coef = y[(i, j)];
            if coef != 0.0 {
                axpy(coef, c, &mut out);
            }
        }
        out
    }

    /// Replaces the basis by the first `keep` Ritz vectors.
    fn restart(&mut self, values: &[f64], y: &DMatrix<f64>, keep: usize) {
        let v: Vec<_> = (0..keep).map(|j| Self::combine(&self.v, y, j)).collect();
        let sv: Vec<_> = (0..keep).map(|j| Self::combine(&self.sv, y, j)).collect();
        let mv: Vec<_> = (0..keep).map(|j| Self::combine(&self.mv, y, j)).collect();
        self.v = v;
        self.sv = sv;
        self.mv = mv;
        self.g = DMatrix::identity(keep, keep);
        self.h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&values[..keep]));
    }
}

/// Source of basis-filling vectors.
struct Filler {
    rng: Option<ChaCha8Rng>,
    drawn: usize,
}

impl Filler {
    fn new(opts: &EigOptions) -> Self {
        Filler {
            rng: (!opts.seedless).then(|| ChaCha8Rng::seed_from_u64(opts.seed)),
            drawn: 0,
        }
    }

    fn next(&mut self, n: usize) -> Vec<f64> {
        self.drawn += 1;
        match &mut self.rng {
            Some(rng) => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            None => {
                // Weyl sequence in the golden ratio, distinct per call.
                let k = self.drawn as f64;
                (0..n)
                    .map(|i| ((i as f64 + 1.0) * k * 0.618_033_988_749_895 + 0.5 * k).fract() - 0.5)
                    .collect()
            }
        }
    }
}

/// The `k` algebraically smallest eigenpairs of `M v = θ S v`.
pub fn min_gen_eig<M, S>(m: &M, s: &S, k: usize, opts: &EigOptions) -> Result<EigResult>
where
    M: LinearOperator + ?Sized,
    S: LinearOperator + ?Sized,
{
    let n = m.dim();
    check_dim("min_gen_eig S", n, s.dim())?;
    if k == 0 || k > n {
        return Err(Error::Input(format!(
            "requested {k} eigenpairs of a dimension-{n} pencil"
        )));
    }
    for v in &opts.start {
        check_dim("min_gen_eig start vector", n, v.len())?;
    }
    let m_norm = norm_estimate(m, 30);
    let s_norm = norm_estimate(s, 30);
    let inner_max = opts.inner_max_iter.unwrap_or((10 * n).max(50));
    let max_basis = opts.max_basis.max(2 * k + 2).min(n);
    let keep = (k + 2).max(max_basis / 2).min(max_basis - 1).max(k);

    let mut filler = Filler::new(opts);
    let mut basis = Basis::new();
    for v in &opts.start {
        if basis.len() < max_basis {
            basis.push(v.clone(), m, s);
        }
    }
    let mut guard = 0;
    while basis.len() < k.min(max_basis) && guard < 10 * n + 10 {
        basis.push(filler.next(n), m, s);
        guard += 1;
    }
    if basis.len() < 2.min(n) {
        basis.push(filler.next(n), m, s);
    }

    let mut inner_iterations = 0;
    let mut worst = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let (values, y) = basis
            .ritz()
            .ok_or_else(|| Error::Internal("projected S-Gram matrix lost definiteness".into()))?;
        let mdim = basis.len();

        let mut pending = Vec::new();
        worst = 0.0f64;
        for i in 0..k.min(mdim) {
            let mu = Basis::combine(&basis.mv, &y, i);
            let su = Basis::combine(&basis.sv, &y, i);
            let r: Vec<f64> = mu.iter().zip(&su).map(|(a, b)| a - values[i] * b).collect();
            let rn = norm(&r);
            let bound = opts.tol * (m_norm + values[i].abs() * s_norm);
            worst = worst.max(rn / (m_norm + values[i].abs() * s_norm).max(f64::MIN_POSITIVE));
            if rn > bound {
                pending.push(r);
            }
        }
        if mdim >= k && (pending.is_empty() || mdim == n) {
            return finalize(
                m,
                s,
                &basis,
                &values,
                &y,
                k,
                iter + 1,
                inner_iterations,
                m_norm,
                s_norm,
            );
        }

        if basis.len() + pending.len().max(1) > max_basis {
            basis.restart(&values, &y, keep.min(mdim));
        }
        let mut added = false;
        for r in pending.into_iter().take(max_basis - basis.len()) {
            let (t, st) = cg_solve(s, &r, opts.inner_tol, inner_max, None)?;
            inner_iterations += st.iterations;
            if st.breakdown {
                return Err(Error::NotPositiveDefinite {
                    context: "eigensolver metric".into(),
                });
            }
            added |= basis.push(t, m, s);
        }
        let mut tries = 0;
        while !added && tries < 5 && basis.len() < max_basis {
            added = basis.push(filler.next(n), m, s);
            tries += 1;
        }
    }
    Err(Error::EigenNotConverged {
        iterations: opts.max_iter,
        residual: worst,
    })
}

#[allow(clippy::too_many_arguments)]
fn finalize<M, S>(
    m: &M,
    s: &S,
    basis: &Basis,
    values: &[f64],
    y: &DMatrix<f64>,
    k: usize,
    iterations: usize,
    inner_iterations: usize,
    m_norm: f64,
    s_norm: f64,
) -> Result<EigResult>
where
    M: LinearOperator + ?Sized,
    S: LinearOperator + ?Sized,
{
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut out_values = Vec::with_capacity(k);
    for i in 0..k {
        let mut u = Basis::combine(&basis.v, y, i);
        let su = s.apply_vec(&u);
        let sn = dot(&u, &su).sqrt();
        scale(1.0 / sn, &mut u);
        let mu = m.apply_vec(&u);
        let su = s.apply_vec(&u);
        let theta = dot(&u, &mu);
        let r: Vec<f64> = mu.iter().zip(&su).map(|(a, b)| a - theta * b).collect();
        residuals.push(norm(&r));
        out_values.push(if values[i].is_finite() {
            theta
        } else {
            values[i]
        });
        vectors.push(u);
    }
    Ok(EigResult {
        values: out_values,
        vectors,
        residuals,
        iterations,
        inner_iterations,
        m_norm,
        s_norm,
    })
}

/// Numerical null space of a singular PSD operator `P`.
#[derive(Debug, Clone)]
pub struct NullBasis {
    /// `Zᵀ S Z = I`.
    pub s_orthonormal: Vec<Vec<f64>>,
    /// `Zᵀ Z = I`, same span.
    pub orthonormal: Vec<Vec<f64>>,
    /// Pencil eigenvalues of the returned directions.
    pub eigenvalues: Vec<f64>,
    /// Smallest pencil eigenvalue above the cutoff, when one was computed.
    pub next_eigenvalue: Option<f64>,
    pub threshold: f64,
}

impl NullBasis {
    pub fn rank(&self) -> usize {
        self.orthonormal.len()
    }
}

/// Eigenvectors of `(P, S)` with eigenvalue ≤ `rank_tol · ‖P‖/‖S‖`, S-orthonormal, plus a
/// Euclidean-orthonormal copy. Grows the number of requested pairs until one lands above
/// the cutoff or `max_dim` is reached.
pub fn nullspace_basis<P, S>(
    p: &P,
    s: &S,
    rank_tol: f64,
    max_dim: usize,
    opts: &EigOptions,
) -> Result<NullBasis>
where
    P: LinearOperator + ?Sized,
    S: LinearOperator + ?Sized,
{
    let n = p.dim();
    check_dim("nullspace_basis S", n, s.dim())?;
    let p_norm = norm_estimate(p, 30);
    let s_norm = norm_estimate(s, 30);
    let threshold = rank_tol * p_norm / s_norm.max(f64::MIN_POSITIVE);
    let max_dim = max_dim.max(1).min(n);

    let mut k = (opts.start.len() + 1).min(n).min(max_dim + 1);
    let mut o = opts.clone();
    loop {
        let res = min_gen_eig(p, s, k, &o)?;
        let count = res.values.iter().take_while(|v| **v <= threshold).count();
        if count == 0 {
            return Err(Error::EndpointNotSingular {
                endpoint: f64::NAN,
                smallest: res.values[0],
            });
        }
        if count < k || k == n || count >= max_dim {
            let r = count.min(max_dim);
            let s_orthonormal: Vec<Vec<f64>> = res.vectors[..r].to_vec();
            let orthonormal = euclidean_orthonormalize(&s_orthonormal);
            return Ok(NullBasis {
                s_orthonormal,
                orthonormal,
                eigenvalues: res.values[..r].to_vec(),
                next_eigenvalue: res.values.get(r).copied(),
                threshold,
            });
        }
        o.start = res.vectors;
        k += 1;
    }
}

/// Modified Gram–Schmidt, two passes.
pub(crate) fn euclidean_orthonormalize(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for c in cols {
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &out {
                let d = dot(q, &v);
                axpy(-d, q, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > 0.0 {
            scale(1.0 / nv, &mut v);
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{Pencil, SparseSymmetric};

    #[test]
    fn example_one_pencil_minimum() {
        let b = SparseSymmetric::from_diagonal(&[2.0, -1.0]);
        let s = SparseSymmetric::from_diagonal(&[0.5, 0.25]);
        let neg_b = Pencil::scaled(&b, -1.0);
        let res = min_gen_eig(&neg_b, &s, 1, &EigOptions::default()).unwrap();
        assert!((res.values[0] + 4.0).abs() < 1e-12);
        let lower = 0.75 + 1.0 / res.values[0];
        assert!((lower - 0.5).abs() < 1e-12);
        let v = &res.vectors[0];
        assert!((dot(v, &s.apply_vec(v)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seedless_start_is_reproducible() {
        let m = SparseSymmetric::from_diagonal(&[3.0, -1.0, 2.0, 0.5, 4.0, -2.0]);
        let s = SparseSymmetric::identity(6);
        let opts = EigOptions {
            seedless: true,
            ..EigOptions::default()
        };
        let a = min_gen_eig(&m, &s, 2, &opts).unwrap();
        let b = min_gen_eig(&m, &s, 2, &opts).unwrap();
        assert_eq!(a.values, b.values);
        assert!((a.values[0] + 2.0).abs() < 1e-12 && (a.values[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_pencil_has_unit_spectrum() {
        let s = SparseSymmetric::from_triplets(
            4,
            vec![
                (0, 0, 2.0),
                (1, 1, 3.0),
                (2, 2, 1.0),
                (3, 3, 4.0),
                (0, 1, 0.5),
                (2, 3, -0.3),
            ],
        )
        .unwrap();
        let res = min_gen_eig(&s, &s, 3, &EigOptions::default()).unwrap();
        for v in &res.values {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn too_many_pairs_rejected() {
        let s = SparseSymmetric::identity(2);
        assert!(min_gen_eig(&s, &s, 3, &EigOptions::default()).is_err());
    }

    #[test]
    fn example_two_null_vector() {
        let p = SparseSymmetric::from_diagonal(&[0.0, 0.5]);
        let s = SparseSymmetric::from_diagonal(&[0.5, 0.25]);
        let nb = nullspace_basis(&p, &s, 1e-8, 4, &EigOptions::default()).unwrap();
        assert_eq!(nb.rank(), 1);
        let z = &nb.s_orthonormal[0];
        let expect = 1.0 / 0.5f64.sqrt();
        assert!((z[0].abs() - expect).abs() < 1e-10);
        assert!(z[1].abs() < 1e-10);
        let e = &nb.orthonormal[0];
        assert!((e[0].abs() - 1.0).abs() < 1e-12 && e[1].abs() < 1e-10);
    }

    #[test]
    fn zero_operator_full_null_space() {
        let p = SparseSymmetric::zeros(2);
        let s = SparseSymmetric::identity(2);
        let nb = nullspace_basis(&p, &s, 1e-8, 4, &EigOptions::default()).unwrap();
        assert_eq!(nb.rank(), 2);
        // Z Zᵀ = I
        for i in 0..2 {
            for j in 0..2 {
                let zz: f64 = nb.orthonormal.iter().map(|z| z[i] * z[j]).sum();
                assert!((zz - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nonsingular_operator_rejected() {
        let p = SparseSymmetric::identity(3);
        let s = SparseSymmetric::identity(3);
        let err = nullspace_basis(&p, &s, 1e-8, 2, &EigOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EndpointNotSingular { .. }));
    }
}
