use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::interval::{Endpoint, Side};
use super::Context;
use crate::error::{Error, Result};
use crate::problem::{quad_value, GtrsProblem};
use crate::sparse::{cg_solve, cg_solve_deflated, euclidean_orthonormalize};
use crate::vecops::{dot, norm, project_coeffs};

/// Outcome of the endpoint test deciding whether λ* sits at a singular endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HardCase2Report {
    pub side: Side,
    pub endpoint: f64,
    pub null_dim: usize,
    /// ‖Zᵀ(a + λₑb)‖ with Euclidean-orthonormal Z.
    pub range_residual: f64,
    /// a + λₑb lies in the range of A + λₑB.
    pub consistent: bool,
    /// The range residual is within a factor 100 of the tolerance.
    pub range_borderline: bool,
    /// Extremum of g over the solution set of the endpoint system.
    pub p_star: Option<f64>,
    pub y_star: Option<Vec<f64>>,
    /// g at the minimum-norm endpoint solution: the value a test without the null-space
    /// correction would look at.
    pub naive_g: Option<f64>,
    /// What that uncorrected test would have concluded.
    pub naive_is_hard_case_2: Option<bool>,
    pub is_hard_case_2: bool,
    /// Euclidean-orthonormal null basis.
    #[serde(skip)]
    pub null_basis: Vec<Vec<f64>>,
    /// Minimum-norm solution of (A + λₑB)x = −(a + λₑb).
    #[serde(skip)]
    pub x_particular: Option<Vec<f64>>,
    /// `x_particular + Z y*`, where g attains `p_star`.
    #[serde(skip)]
    pub x_base: Option<Vec<f64>>,
}

/// Decides hard case 2 at a finite endpoint.
///
/// When the endpoint system is consistent, its solutions are `x_particular + Z y`.
/// The constraint restricted to that set is a definite quadratic in `y` (convex at the
/// lower end, concave at the upper), whose extremum `p*` decides the case: λ* equals the
/// lower end iff p* ≤ 0, the upper end iff p* ≥ 0.
pub fn detect_hard_case2(ctx: &Context, ep: &Endpoint) -> Result<HardCase2Report> {
    let prob = ctx.prob;
    let cfg = ctx.cfg;
    if !ep.is_finite() {
        return Err(Error::Input(
            "hard-case test needs a finite endpoint".into(),
        ));
    }
    if ep.null_vectors.is_empty() {
        return Err(Error::EndpointNotSingular {
            endpoint: ep.value,
            smallest: ep.pencil_eig,
        });
    }
    let lambda = ep.value;
    let z = euclidean_orthonormalize(&ep.null_vectors);
    let shifted = prob.shifted_linear(lambda);
    let range_residual = norm(&project_coeffs(&z, &shifted));
    let limit = cfg.range_tol * (1.0 + norm(&shifted));
    let consistent = range_residual <= limit;
    let range_borderline = range_residual > 1e-2 * limit && range_residual < 1e2 * limit;

    let mut report = HardCase2Report {
        side: ep.side,
        endpoint: lambda,
        null_dim: z.len(),
        range_residual,
        consistent,
        range_borderline,
        p_star: None,
        y_star: None,
        naive_g: None,
        naive_is_hard_case_2: None,
        is_hard_case_2: false,
        null_basis: z,
        x_particular: None,
        x_base: None,
    };
    if !consistent {
        return Ok(report);
    }

    let op = ctx.pencil(lambda);
    let rhs: Vec<f64> = shifted.iter().map(|v| -v).collect();
    let tol = cfg.cg_rel_tol(norm(&rhs));
    let (xp, st) = cg_solve_deflated(
        &op,
        &rhs,
        &report.null_basis,
        tol,
        cfg.cg_iterations(prob.n()),
    )?;
    ctx.add_cg(st.iterations as u64);
    if st.breakdown {
        return Err(Error::EndpointInconsistent {
            endpoint: lambda,
            reason: "A + λB is not semidefinite on the range of the computed null space".into(),
        });
    }

    let z = &report.null_basis;
    let r = z.len();
    let bz: Vec<Vec<f64>> = z.iter().map(|v| ctx.b_times(v)).collect();
    let zbz = DMatrix::from_fn(r, r, |i, j| 0.5 * (dot(&z[i], &bz[j]) + dot(&z[j], &bz[i])));
    let signed = match ep.side {
        Side::Lower => zbz.clone(),
        Side::Upper => -zbz.clone(),
    };
    if signed.cholesky().is_none() {
        return Err(Error::EndpointInconsistent {
            endpoint: lambda,
            reason: format!(
                "ZᵀBZ is not {} definite",
                if ep.side == Side::Lower {
                    "positive"
                } else {
                    "negative"
                }
            ),
        });
    }
    let bxp = ctx.b_times(&xp);
    let naive_g = quad_value(&xp, &bxp, &prob.g_lin, prob.g_const);
    let w: Vec<f64> = bxp.iter().zip(&prob.g_lin).map(|(p, b)| p + b).collect();
    let rhs_y = DVector::from_vec(project_coeffs(z, &w).iter().map(|v| -v).collect());
    let y = zbz
        .lu()
        .solve(&rhs_y)
        .ok_or_else(|| Error::Internal("reduced null-space system is singular".into()))?;
    let mut x_base = xp.clone();
    for (k, zk) in z.iter().enumerate() {
        for (xi, zi) in x_base.iter_mut().zip(zk) {
            *xi += y[k] * zi;
        }
    }
    let p_star = prob.eval_g(&x_base)?;
    let tol = cfg.hard_case_tol * prob.g_scale();
    let (is_hc2, naive) = match ep.side {
        Side::Lower => (p_star <= tol, naive_g <= tol),
        Side::Upper => (p_star >= -tol, naive_g >= -tol),
    };
    report.p_star = Some(p_star);
    report.y_star = Some(y.iter().copied().collect());
    report.naive_g = Some(naive_g);
    report.naive_is_hard_case_2 = Some(naive);
    report.is_hard_case_2 = is_hc2;
    report.x_particular = Some(xp);
    report.x_base = Some(x_base);
    Ok(report)
}

/// Moves from `x_base` along the null direction `v` to the boundary g = 0.
///
/// Solves vᵀBv α² + 2α vᵀ(Bx + b) + p* = 0, with p* = g(x_base), and keeps the root of
/// smaller objective (smaller ‖x‖ on a tie).
pub fn boundary_step(
    prob: &GtrsProblem,
    x_base: &[f64],
    v: &[f64],
    p_star: f64,
) -> Result<Vec<f64>> {
    let bv = prob.g_mat.matvec(v)?;
    let bx = prob.g_mat.matvec(x_base)?;
    let c2 = dot(v, &bv);
    let c1 = dot(v, &bx) + dot(v, &prob.g_lin);
    let c0 = p_star;
    let roots: Vec<f64> = if c2 == 0.0 {
        if c1 == 0.0 {
            if c0 == 0.0 {
                vec![0.0]
            } else {
                return Err(Error::Internal(
                    "boundary step along a direction that leaves g unchanged".into(),
                ));
            }
        } else {
            vec![-c0 / (2.0 * c1)]
        }
    } else {
        let disc = c1 * c1 - c2 * c0;
        let tol = 1e-10 * (c1 * c1 + (c2 * c0).abs());
        if disc < -tol {
            return Err(Error::Internal(format!(
                "boundary step has no real root (discriminant {disc:e})"
            )));
        }
        let sq = disc.max(0.0).sqrt();
        let t = -(c1 + if c1 >= 0.0 { sq } else { -sq });
        if t == 0.0 {
            vec![0.0]
        } else {
            vec![t / c2, c0 / t]
        }
    };
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for alpha in roots {
        let x: Vec<f64> = x_base.iter().zip(v).map(|(b, d)| b + alpha * d).collect();
        let q = prob.eval_q(&x)?;
        let nx = norm(&x);
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
            best = Some((x, q, nx));
        }
    }
    Ok(best.expect("at least one root").0)
}

/// Result of testing the unconstrained minimizer.
#[derive(Debug, Clone)]
pub struct InteriorCheck {
    pub x: Vec<f64>,
    pub g: f64,
    pub bx: Vec<f64>,
    pub stationarity: f64,
    pub cg_iterations: usize,
}

impl InteriorCheck {
    pub fn is_interior(&self) -> bool {
        self.g <= 0.0
    }
}

/// Solves Ax = −a (valid only when A is known to be positive definite) and evaluates g.
pub fn check_interior(ctx: &Context) -> Result<InteriorCheck> {
    let prob = ctx.prob;
    let op = ctx.pencil(0.0);
    let rhs: Vec<f64> = prob.q_lin.iter().map(|v| -v).collect();
    let tol = ctx.cfg.cg_rel_tol(norm(&rhs));
    let (x, st) = cg_solve(&op, &rhs, tol, ctx.cfg.cg_iterations(prob.n()), None)?;
    ctx.add_cg(st.iterations as u64);
    if st.breakdown {
        return Err(Error::Internal(
            "A is not positive definite although the lower endpoint is negative".into(),
        ));
    }
    let bx = ctx.b_times(&x);
    Ok(InteriorCheck {
        g: quad_value(&x, &bx, &prob.g_lin, prob.g_const),
        x,
        bx,
        stationarity: st.final_residual_norm,
        cg_iterations: st.iterations,
    })
}
