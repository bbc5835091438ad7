//! Dense reference solver for small problems.
//!
//! With S = A + λ̂B ≻ 0, the congruence Q = S^{-1/2}W (W the eigenvectors of
//! S^{-1/2}BS^{-1/2}) diagonalizes both matrices: QᵀBQ = diag(e) and QᵀAQ = diag(d) with
//! d = 1 − λ̂e. In the coordinates x = Qy the stationary path, the secular function and
//! the endpoint tests are all coordinate-wise, so every decision the sparse solver makes
//! with tolerances can be made here from explicit spectra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gtrs::{Case, Side};
use crate::problem::GtrsProblem;
use crate::sparse::SparseSymmetric;

/// Matrices above this dimension are refused.
pub const DENSE_LIMIT: usize = 500;

#[derive(Debug, Clone)]
pub struct SimDiag {
    pub q: DMatrix<f64>,
    pub d: DVector<f64>,
    pub e: DVector<f64>,
}

pub fn to_dense(m: &SparseSymmetric) -> DMatrix<f64> {
    let n = m.n();
    DMatrix::from_row_slice(n, n, &m.to_dense())
}

/// Simultaneous diagonalization through the definite combination A + λ̂B.
pub fn simdiag(a: &DMatrix<f64>, b: &DMatrix<f64>, lambda_hat: f64) -> Result<SimDiag> {
    let s = a + b * lambda_hat;
    let se = s.clone().symmetric_eigen();
    let smin = se.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = se.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(smin > 1e-14 * smax) {
        return Err(Error::Input(
            "A + lambda_hat B is not positive definite".into(),
        ));
    }
    let inv_sqrt = DVector::from_iterator(
        se.eigenvalues.len(),
        se.eigenvalues.iter().map(|v| 1.0 / v.sqrt()),
    );
    let s_inv_half =
        &se.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * se.eigenvectors.transpose();
    let m = &s_inv_half * b * &s_inv_half;
    let m = (&m + m.transpose()) * 0.5;
    let me = m.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| me.eigenvalues[i].total_cmp(&me.eigenvalues[j]));
    let w = DMatrix::from_fn(n, n, |r, c| me.eigenvectors[(r, order[c])]);
    let e = DVector::from_iterator(n, order.iter().map(|&i| me.eigenvalues[i]));
    let d = e.map(|ei| 1.0 - lambda_hat * ei);
    Ok(SimDiag {
        q: s_inv_half * w,
        d,
        e,
    })
}

/// Dense solution with the decisions that led to it.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub x_star: Vec<f64>,
    pub lambda_star: f64,
    pub case: Case,
    pub q_star: f64,
    pub g_star: f64,
    pub stationarity: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_star: Option<f64>,
    /// Some decision was within a tolerance margin, so a different classification by
    /// another solver is not an error.
    pub ambiguous: bool,
}

struct Diag<'a> {
    d: &'a DVector<f64>,
    e: &'a DVector<f64>,
    at: DVector<f64>,
    bt: DVector<f64>,
    beta: f64,
}

impl Diag<'_> {
    fn y(&self, lambda: f64) -> DVector<f64> {
        DVector::from_fn(self.d.len(), |i, _| {
            -(self.at[i] + lambda * self.bt[i]) / (self.d[i] + lambda * self.e[i])
        })
    }

    fn g(&self, y: &DVector<f64>) -> f64 {
        (0..y.len())
            .map(|i| self.e[i] * y[i] * y[i] + 2.0 * self.bt[i] * y[i])
            .sum::<f64>()
            + self.beta
    }

    fn phi(&self, lambda: f64) -> f64 {
        self.g(&self.y(lambda))
    }
}

/// Root of a non-increasing function on (lo, hi) with f(lo) > 0 > f(hi) (values at the
/// ends need not be finite).
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v > 0.0 {
            lo = mid;
        } else if v < 0.0 {
            hi = mid;
        } else {
            return mid;
        }
        if (hi - lo) <= 1e-14 * (lo.abs() + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Globally optimal solution of a small problem.
pub fn dense_solve(prob: &GtrsProblem) -> Result<OracleOutcome> {
    let n = prob.n();
    if n > DENSE_LIMIT {
        return Err(Error::Input(format!(
            "dense reference solver limited to n <= {DENSE_LIMIT}, got {n}"
        )));
    }
    let a = to_dense(&prob.q_mat);
    let b = to_dense(&prob.g_mat);
    let lhat = prob.lambda_hat;
    let sd = simdiag(&a, &b, lhat)?;
    let av = DVector::from_column_slice(&prob.q_lin);
    let bv = DVector::from_column_slice(&prob.g_lin);
    let diag = Diag {
        d: &sd.d,
        e: &sd.e,
        at: sd.q.transpose() * &av,
        bt: sd.q.transpose() * &bv,
        beta: prob.g_const,
    };
    let gscale = prob.g_scale();
    let margin = 1e-6 * gscale;

    let lower =
        sd.e.iter()
            .filter(|e| **e > 0.0)
            .map(|e| lhat - 1.0 / e)
            .fold(f64::NEG_INFINITY, f64::max);
    let upper =
        sd.e.iter()
            .filter(|e| **e < 0.0)
            .map(|e| lhat - 1.0 / e)
            .fold(f64::INFINITY, f64::min);

    let finish =
        |y: DVector<f64>, lambda: f64, case: Case, p_star: Option<f64>, ambiguous: bool| {
            let x = &sd.q * &y;
            let xs: Vec<f64> = x.iter().copied().collect();
            let r = (&a + &b * lambda) * &x + &av + &bv * lambda;
            OracleOutcome {
                q_star: prob.eval_q(&xs).unwrap_or(f64::NAN),
                g_star: prob.eval_g(&xs).unwrap_or(f64::NAN),
                stationarity: r.norm(),
                x_star: xs,
                lambda_star: lambda,
                case,
                lower,
                upper,
                p_star,
                ambiguous,
            }
        };

    let phi_hat = diag.phi(lhat);
    let mut ambiguous = phi_hat.abs() <= margin;
    if phi_hat.abs() <= 1e-10 * gscale {
        return Ok(finish(
            diag.y(lhat),
            lhat,
            Case::ExactAtLambdaHat,
            None,
            ambiguous,
        ));
    }
    if phi_hat < 0.0 && lhat == 0.0 {
        return Ok(finish(diag.y(0.0), 0.0, Case::Interior, None, ambiguous));
    }
    let side = if phi_hat > 0.0 {
        Side::Upper
    } else {
        Side::Lower
    };
    let endpoint = if side == Side::Upper { upper } else { lower };

    if side == Side::Lower && endpoint < 0.0 {
        ambiguous |= endpoint > -1e-6;
        let g0 = diag.phi(0.0);
        ambiguous |= g0.abs() <= margin;
        if g0 <= 0.0 {
            return Ok(finish(diag.y(0.0), 0.0, Case::Interior, None, ambiguous));
        }
        let l = bisect(|l| diag.phi(l), 0.0, lhat);
        return Ok(finish(diag.y(l), l, Case::BoundaryEasy, None, ambiguous));
    }
    if side == Side::Upper && !endpoint.is_finite() {
        let mut hi = lhat + lhat.abs().max(1.0);
        let mut lo = lhat;
        while diag.phi(hi) >= 0.0 {
            lo = hi;
            hi = lhat + 2.0 * (hi - lhat);
            if !hi.is_finite() {
                return Err(Error::Internal(
                    "no sign change toward an infinite endpoint".into(),
                ));
            }
        }
        let l = bisect(|l| diag.phi(l), lo, hi);
        return Ok(finish(diag.y(l), l, Case::BoundaryEasy, None, ambiguous));
    }

    // Finite endpoint: null coordinates are those with d + λₑe ≈ 0.
    let null: Vec<usize> = (0..n)
        .filter(|&i| (sd.d[i] + endpoint * sd.e[i]).abs() <= 1e-8)
        .collect();
    let r_e = &av + &bv * endpoint;
    let z_cols: Vec<DVector<f64>> = {
        let cols: Vec<DVector<f64>> = null.iter().map(|&i| sd.q.column(i).into_owned()).collect();
        let mut out: Vec<DVector<f64>> = Vec::new();
        for c in cols {
            let mut v = c;
            for _ in 0..2 {
                for q in &out {
                    let proj = q.dot(&v);
                    v -= q * proj;
                }
            }
            let nv = v.norm();
            out.push(v / nv);
        }
        out
    };
    let range_residual = z_cols
        .iter()
        .map(|z| z.dot(&r_e).powi(2))
        .sum::<f64>()
        .sqrt();
    let limit = 1e-8 * (1.0 + r_e.norm());
    let consistent = range_residual <= limit;
    ambiguous |= range_residual > 1e-2 * limit && range_residual < 1e2 * limit;

    let mut p_star = None;
    if consistent {
        let mut y = diag.y(endpoint);
        for &i in &null {
            y[i] = -diag.bt[i] / diag.e[i];
        }
        let p = diag.g(&y);
        p_star = Some(p);
        ambiguous |= p.abs() <= margin;
        let tol = 1e-10 * gscale;
        let hc2 = match side {
            Side::Lower => p <= tol,
            Side::Upper => p >= -tol,
        };
        if hc2 {
            let k = null[0];
            let step = (-p / diag.e[k]).max(0.0).sqrt();
            let mut best: Option<(DVector<f64>, f64, f64)> = None;
            for t in [step, -step] {
                let mut yt = y.clone();
                yt[k] += t;
                let x = &sd.q * &yt;
                let xs: Vec<f64> = x.iter().copied().collect();
                let q = prob.eval_q(&xs)?;
                let nx = x.norm();
                let better = match &best {
                    None => true,
                    Some((_, bq, bn)) => {
                        if (q - bq).abs() <= 1e-12 * (1.0 + bq.abs()) {
                            nx < *bn
                        } else {
                            q < *bq
                        }
                    }
                };
                if better {
                    best = Some((yt, q, nx));
                }
            }
            let case = if side == Side::Lower {
                Case::HardCase2Lower
            } else {
                Case::HardCase2Upper
            };
            return Ok(finish(best.unwrap().0, endpoint, case, p_star, ambiguous));
        }
    }
    let (lo, hi) = match side {
        Side::Upper => (lhat, endpoint),
        Side::Lower => (endpoint, lhat),
    };
    let l = bisect(|l| diag.phi(l), lo, hi);
    ambiguous |= (l - endpoint).abs() < 1e-6 * endpoint.abs().max(1.0);
    let case = if consistent {
        Case::HardCase1
    } else {
        Case::BoundaryEasy
    };
    Ok(finish(diag.y(l), l, case, p_star, ambiguous))
}

/// Relative objective difference (q* − q_best)/|q_best|; the flag is set when |q_best|
/// is too small and the absolute difference is returned instead.
pub fn accuracy(q_x_star: f64, q_x_best: f64) -> (f64, bool) {
    if q_x_best.abs() < 1e-300 {
        (q_x_star - q_x_best, true)
    } else {
        ((q_x_star - q_x_best) / q_x_best.abs(), false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::fixtures::{example_one, unit_ball};

    #[test]
    fn example_one_reference() {
        let o = dense_solve(&example_one()).unwrap();
        assert_eq!(o.case, Case::HardCase2Lower);
        assert!((o.lambda_star - 0.5).abs() < 1e-12);
        assert!((o.lower - 0.5).abs() < 1e-12 && (o.upper - 1.0).abs() < 1e-12);
        assert!((o.x_star[0] - (-25.0 + 457f64.sqrt())).abs() < 1e-10);
        assert!((o.x_star[1] - 8.0).abs() < 1e-10);
        assert!((o.p_star.unwrap() + 914.0).abs() < 1e-8);
    }

    #[test]
    fn interior_reference() {
        let o = dense_solve(&unit_ball(vec![0.0, 0.0])).unwrap();
        assert_eq!(o.case, Case::Interior);
        assert_eq!(o.x_star, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_pair_diagonalizes() {
        let i = DMatrix::<f64>::identity(3, 3);
        let sd = simdiag(&i, &i, 0.0).unwrap();
        for k in 0..3 {
            assert!((sd.e[k] - 1.0).abs() < 1e-14);
            assert!((sd.d[k] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn random_pair_reconstructs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut sym = || {
            let m = DMatrix::<f64>::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
            &m + m.transpose()
        };
        let b = sym();
        let a = sym() + DMatrix::identity(8, 8) * 20.0;
        let sd = simdiag(&a, &b, 0.0).unwrap();
        let qinv = sd.q.clone().try_inverse().unwrap();
        let a_back = qinv.transpose() * DMatrix::from_diagonal(&sd.d) * &qinv;
        let b_back = qinv.transpose() * DMatrix::from_diagonal(&sd.e) * &qinv;
        assert!((&a_back - &a).norm() <= 1e-10 * a.norm());
        assert!((&b_back - &b).norm() <= 1e-10 * b.norm());
        let bd = sd.q.transpose() * &b * &sd.q;
        assert!((bd - DMatrix::from_diagonal(&sd.e)).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn generated_hard_case_2_sits_at_endpoint() {
        use crate::probgen::{generate, CaseKind, ClassKind, GenSpec};
        for (class, seed) in [(ClassKind::Class1, 3), (ClassKind::Class2, 4), (ClassKind::Class1, 5)] {
            let art = generate(&GenSpec::new(10, 0.5, 10.0, CaseKind::Hard2, class, seed)).unwrap();
            let o = dense_solve(&art.problem).unwrap();
            assert!(o.case.is_hard_case_2());
            let endpoint = if o.case == Case::HardCase2Upper { o.upper } else { o.lower };
            assert!((o.lambda_star - endpoint).abs() <= 1e-10 * endpoint.abs().max(1.0));
            assert!(o.g_star.abs() < 1e-9 * art.problem.g_scale());
        }
    }

    #[test]
    fn accuracy_metric() {
        assert_eq!(accuracy(-3.0, -3.0), (0.0, false));
        let (v, _) = accuracy(-99.9999999, -100.0);
        assert!((v - 1e-9).abs() < 1e-15);
        assert_eq!(accuracy(1e-3, 0.0), (1e-3, true));
    }
}
