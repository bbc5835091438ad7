use super::interval::Endpoint;
use super::Context;
use crate::error::{Error, Result};
use crate::problem::quad_value;
use crate::secular::{Evaluation, PhiEvaluator};
use crate::sparse::{cg_solve, CgStats, FnOperator, LinearOperator};
use crate::vecops::{dot, norm};

fn breakdown(lambda: f64) -> Error {
    Error::NotPositiveDefinite {
        context: format!("A + {lambda:e} B"),
    }
}

/// x(λ) = −(A+λB)⁻¹(a+λb) by CG, and φ(λ) = g(x(λ)).
pub fn eval_phi(ctx: &Context, lambda: f64) -> Result<Evaluation> {
    let prob = ctx.prob;
    let op = ctx.pencil(lambda);
    let rhs: Vec<f64> = prob.shifted_linear(lambda).iter().map(|v| -v).collect();
    let tol = ctx.cfg.cg_rel_tol(norm(&rhs));
    let (x, st) = cg_solve(&op, &rhs, tol, ctx.cfg.cg_iterations(prob.n()), None)?;
    ctx.add_cg(st.iterations as u64);
    if st.breakdown {
        return Err(breakdown(lambda));
    }
    let bx = ctx.b_times(&x);
    Ok(Evaluation {
        lambda,
        phi: quad_value(&x, &bx, &prob.g_lin, prob.g_const),
        x,
        bx,
        stationarity: st.final_residual_norm,
        cg_iterations: st.iterations,
        regularized: false,
    })
}

/// Data of the regularized system near a singular endpoint whose system is consistent.
///
/// The operator is `Ã = A + λB + α Σ wᵢwᵢᵀ` with `wᵢ = S vᵢ`, `vᵢ` the S-orthonormal
/// null vectors, and the system `Ã y = (λ − λ̂)(Bz − b)` with `S z = a + λ̂b`. Its
/// solution satisfies `x = y − z = x(λ)`, and `Ã` stays positive definite up to and
/// including the endpoint.
#[derive(Debug, Clone)]
pub struct Regularizer {
    pub endpoint: f64,
    w: Vec<Vec<f64>>,
    alpha: f64,
    z: Vec<f64>,
    bz_minus_b: Vec<f64>,
}

impl Regularizer {
    /// `x_hat` is x(λ̂), so z = −x_hat.
    pub fn new(ctx: &Context, endpoint: &Endpoint, x_hat: &[f64]) -> Self {
        Self::from_vectors(ctx, endpoint.value, &endpoint.null_vectors, x_hat)
    }

    pub fn from_vectors(ctx: &Context, endpoint: f64, vectors: &[Vec<f64>], x_hat: &[f64]) -> Self {
        let s = ctx.s_op();
        let w = vectors.iter().map(|v| s.apply_vec(v)).collect();
        let z: Vec<f64> = x_hat.iter().map(|v| -v).collect();
        let bz = ctx.b_times(&z);
        let bz_minus_b = bz.iter().zip(&ctx.prob.g_lin).map(|(p, b)| p - b).collect();
        Regularizer {
            endpoint,
            w,
            alpha: ctx.cfg.reg_alpha,
            z,
            bz_minus_b,
        }
    }

    pub fn rank(&self) -> usize {
        self.w.len()
    }

    /// `Ã` at `lambda` as a matrix-free operator.
    pub fn operator<'c>(&'c self, ctx: &'c Context, lambda: f64) -> impl LinearOperator + 'c {
        let pencil = ctx.pencil(lambda);
        FnOperator::new(ctx.prob.n(), move |x: &[f64], y: &mut [f64]| {
            pencil.apply(x, y);
            for w in &self.w {
                let c = self.alpha * dot(w, x);
                for (yi, wi) in y.iter_mut().zip(w) {
                    *yi += c * wi;
                }
            }
        })
    }
}

/// Solves for x(λ) through the regularized system.
pub fn regularized_solve(
    ctx: &Context,
    lambda: f64,
    reg: &Regularizer,
) -> Result<(Vec<f64>, CgStats)> {
    let prob = ctx.prob;
    let shift = lambda - prob.lambda_hat;
    let rhs: Vec<f64> = reg.bz_minus_b.iter().map(|v| shift * v).collect();
    let op = reg.operator(ctx, lambda);
    let tol = ctx
        .cfg
        .cg_rel_tol(norm(&rhs).max(norm(&prob.shifted_linear(lambda))));
    let (y, st) = cg_solve(&op, &rhs, tol, ctx.cfg.cg_iterations(prob.n()), None)?;
    ctx.add_cg(st.iterations as u64);
    if st.breakdown {
        return Err(breakdown(lambda));
    }
    let x = y.iter().zip(&reg.z).map(|(a, b)| a - b).collect();
    Ok((x, st))
}

/// Routes evaluations near a consistent endpoint through the regularized system.
pub struct PathEvaluator<'c> {
    ctx: &'c Context<'c>,
    reg: Option<Regularizer>,
}

impl<'c> PathEvaluator<'c> {
    pub fn new(ctx: &'c Context<'c>, reg: Option<Regularizer>) -> Self {
        PathEvaluator { ctx, reg }
    }

    fn near_endpoint(&self, lambda: f64) -> Option<&Regularizer> {
        let reg = self.reg.as_ref()?;
        let guard = self.ctx.cfg.endpoint_guard * reg.endpoint.abs().max(1.0);
        ((lambda - reg.endpoint).abs() < guard).then_some(reg)
    }
}

impl PhiEvaluator for PathEvaluator<'_> {
    fn evaluate(&mut self, lambda: f64) -> Result<Evaluation> {
        let Some(reg) = self.near_endpoint(lambda) else {
            return eval_phi(self.ctx, lambda);
        };
        let ctx = self.ctx;
        let (x, st) = regularized_solve(ctx, lambda, reg)?;
        let bx = ctx.b_times(&x);
        let ax = ctx.a_times(&x);
        let r: Vec<f64> = (0..x.len())
            .map(|i| ax[i] + lambda * bx[i] + ctx.prob.q_lin[i] + lambda * ctx.prob.g_lin[i])
            .collect();
        Ok(Evaluation {
            lambda,
            phi: quad_value(&x, &bx, &ctx.prob.g_lin, ctx.prob.g_const),
            x,
            bx,
            stationarity: norm(&r),
            cg_iterations: st.iterations,
            regularized: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolverConfig;
    use crate::problem::fixtures::example_one;

    #[test]
    fn example_one_at_lambda_hat() {
        let p = example_one();
        let cfg = SolverConfig::default();
        let ctx = Context::new(&p, &cfg);
        let e = eval_phi(&ctx, 0.75).unwrap();
        assert!((e.x[0] + 25.0).abs() < 1e-12);
        assert!((e.x[1] + 9.0).abs() < 1e-12);
        assert!((e.phi + 1781.0).abs() < 1e-9);
    }

    #[test]
    fn outside_interval_is_an_error() {
        let p = example_one();
        let cfg = SolverConfig::default();
        let ctx = Context::new(&p, &cfg);
        assert!(matches!(
            eval_phi(&ctx, 2.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn empty_regularization_matches_direct_solve() {
        let p = example_one();
        let cfg = SolverConfig::default();
        let ctx = Context::new(&p, &cfg);
        let hat = eval_phi(&ctx, 0.75).unwrap();
        let reg = Regularizer::from_vectors(&ctx, 0.5, &[], &hat.x);
        let (x, _) = regularized_solve(&ctx, 0.8, &reg).unwrap();
        let direct = eval_phi(&ctx, 0.8).unwrap();
        for (a, b) in x.iter().zip(&direct.x) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }
}
