use serde::{Deserialize, Serialize};

use super::LinearOperator;
use crate::error::{check_dim, Result};
use crate::vecops::{axpy, dot, norm, project_out};

/// Diagnostics of one conjugate-gradient run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgStats {
    pub iterations: usize,
    /// True residual ‖rhs − Op x‖ of the returned iterate.
    pub final_residual_norm: f64,
    pub converged: bool,
    /// `p'Op p <= 0` was met: the operator is not positive definite.
    pub breakdown: bool,
}

/// Plain conjugate gradient for a symmetric positive definite operator.
///
/// Converged means ‖rhs − Op x‖ ≤ `tol · max(1, ‖rhs‖)`, checked on the true residual.
/// On breakdown the current iterate is returned with `breakdown = true`.
pub fn cg_solve<O: LinearOperator + ?Sized>(
    op: &O,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, CgStats)> {
    check_dim("cg_solve rhs", op.dim(), rhs.len())?;
    if let Some(x0) = x0 {
        check_dim("cg_solve x0", op.dim(), x0.len())?;
    }
    Ok(cg_core(op, rhs, tol, max_iter, x0, &[]))
}

/// Conjugate gradient restricted to the orthogonal complement of `null` (Euclidean-
/// orthonormal columns). For a consistent singular PSD system with a zero start this
/// returns the minimum-norm (pseudo-inverse) solution.
pub fn cg_solve_deflated<O: LinearOperator + ?Sized>(
    op: &O,
    rhs: &[f64],
    null: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    check_dim("cg_solve_deflated rhs", op.dim(), rhs.len())?;
    for z in null {
        check_dim("cg_solve_deflated basis", op.dim(), z.len())?;
    }
    Ok(cg_core(op, rhs, tol, max_iter, None, null))
}

fn cg_core<O: LinearOperator + ?Sized>(
    op: &O,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
    x0: Option<&[f64]>,
    null: &[Vec<f64>],
) -> (Vec<f64>, CgStats) {
    let n = op.dim();
    let mut b = rhs.to_vec();
    project_out(null, &mut b);
    let threshold = tol * norm(&b).max(1.0);

    let mut x = match x0 {
        Some(x0) => {
            let mut x = x0.to_vec();
            project_out(null, &mut x);
            x
        }
        None => vec![0.0; n],
    };
    let mut q = vec![0.0; n];
    let true_residual = |x: &[f64], out: &mut Vec<f64>| {
        let mut ax = vec![0.0; n];
        op.apply(x, &mut ax);
        out.clear();
        out.extend(b.iter().zip(&ax).map(|(bi, ai)| bi - ai));
        project_out(null, out);
    };

    let mut r = Vec::with_capacity(n);
    if x.iter().any(|v| *v != 0.0) {
        true_residual(&x, &mut r);
    } else {
        r.extend_from_slice(&b);
    }
    let mut rr = dot(&r, &r);
    let mut stats = CgStats {
        iterations: 0,
        final_residual_norm: rr.sqrt(),
        converged: rr.sqrt() <= threshold,
        breakdown: false,
    };
    if stats.converged {
        return (x, stats);
    }

    let mut p = r.clone();
    while stats.iterations < max_iter {
        stats.iterations += 1;
        op.apply(&p, &mut q);
        project_out(null, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            stats.breakdown = true;
            break;
        }
        let alpha = rr / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        let mut rr_new = dot(&r, &r);
        if rr_new.sqrt() <= threshold {
            true_residual(&x, &mut r);
            rr_new = dot(&r, &r);
            if rr_new.sqrt() <= threshold {
                stats.converged = true;
                stats.final_residual_norm = rr_new.sqrt();
                return (x, stats);
            }
            // Recursive residual drifted: restart from the true one.
            p.copy_from_slice(&r);
            rr = rr_new;
            continue;
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    true_residual(&x, &mut r);
    stats.final_residual_norm = norm(&r);
    stats.converged = !stats.breakdown && stats.final_residual_norm <= threshold;
    (x, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{Identity, SparseSymmetric};

    #[test]
    fn identity_one_iteration() {
        let r = vec![1.0, -2.0, 3.0];
        let (x, st) = cg_solve(&Identity(3), &r, 1e-12, 10, None).unwrap();
        assert_eq!(st.iterations, 1);
        assert!(st.converged);
        assert_eq!(x, r);
    }

    #[test]
    fn example_one_lambda_hat_system() {
        // A + 0.75 B of the 2x2 golden problem.
        let s = SparseSymmetric::from_diagonal(&[0.5, 0.25]);
        let (x, st) = cg_solve(&s, &[-12.5, -2.25], 1e-12, 20, None).unwrap();
        assert!(st.converged);
        assert!((x[0] + 25.0).abs() < 1e-12);
        assert!((x[1] + 9.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_operator_breaks_down() {
        let m = SparseSymmetric::from_diagonal(&[1.0, -1.0]);
        let (_, st) = cg_solve(&m, &[0.0, 1.0], 1e-12, 20, None).unwrap();
        assert!(st.breakdown);
        assert!(!st.converged);
    }

    #[test]
    fn zero_rhs_converges_immediately() {
        let m = SparseSymmetric::identity(4);
        let (x, st) = cg_solve(&m, &[0.0; 4], 1e-10, 10, None).unwrap();
        assert_eq!(st.iterations, 0);
        assert_eq!(x, vec![0.0; 4]);
    }

    #[test]
    fn deflated_gives_minimum_norm_solution() {
        // diag(0, 0.5): kernel e1, consistent rhs.
        let p = SparseSymmetric::from_diagonal(&[0.0, 0.5]);
        let z = vec![vec![1.0, 0.0]];
        let (x, st) = cg_solve_deflated(&p, &[0.0, 4.0], &z, 1e-12, 20).unwrap();
        assert!(st.converged);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rhs_dimension_checked() {
        assert!(cg_solve(&Identity(3), &[1.0], 1e-10, 5, None).is_err());
    }
}
