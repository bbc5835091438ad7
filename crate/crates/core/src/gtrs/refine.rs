use super::Context;
use crate::error::{Error, Result};
use crate::secular::{Evaluation, PhiEvaluator};
use crate::sparse::cg_solve;
use crate::vecops::dot;

/// φ′(λ) = −2 wᵀ(A+λB)⁻¹w with w = Bx(λ) + b. One CG solve.
pub fn phi_derivative(ctx: &Context, eval: &Evaluation) -> Result<f64> {
    let prob = ctx.prob;
    let w: Vec<f64> = eval
        .bx
        .iter()
        .zip(&prob.g_lin)
        .map(|(p, b)| p + b)
        .collect();
    let op = ctx.pencil(eval.lambda);
    let tol = ctx.cfg.cg_tol;
    let (u, st) = cg_solve(&op, &w, tol, ctx.cfg.cg_iterations(prob.n()), None)?;
    ctx.add_cg(st.iterations as u64);
    if st.breakdown {
        return Err(Error::NotPositiveDefinite {
            context: format!("A + {:e} B", eval.lambda),
        });
    }
    Ok(-2.0 * dot(&w, &u))
}

/// Newton steps on φ from a path point, kept only while max{|φ|, stationarity} drops and
/// the iterate stays inside `(lo, hi)`.
pub fn refine<E: PhiEvaluator + ?Sized>(
    ctx: &Context,
    start: Evaluation,
    evaluator: &mut E,
    lo: f64,
    hi: f64,
) -> (Evaluation, usize) {
    let mut cur = start;
    let mut taken = 0;
    for _ in 0..ctx.cfg.refine_steps {
        if cur.phi == 0.0 {
            break;
        }
        let Ok(d) = phi_derivative(ctx, &cur) else {
            break;
        };
        if !(d < 0.0) {
            break;
        }
        let next = cur.lambda - cur.phi / d;
        if !(next > lo && next < hi) || next == cur.lambda {
            break;
        }
        let Ok(ev) = evaluator.evaluate(next) else {
            break;
        };
        if ev.metric() < cur.metric() {
            cur = ev;
            taken += 1;
        } else {
            break;
        }
    }
    (cur, taken)
}
