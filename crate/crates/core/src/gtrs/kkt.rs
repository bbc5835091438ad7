use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::problem::GtrsProblem;
use crate::vecops::norm;

/// Residuals of the global optimality conditions at a pair (x, λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// ‖(A+λB)x + (a+λb)‖.
    pub stationarity: f64,
    /// g(x).
    pub feasibility: f64,
    /// |λ g(x)|.
    pub complementarity: f64,
    /// λ ≥ 0 and λ within the known part of the semidefiniteness interval.
    pub multiplier_in_interval: bool,
}

impl KktReport {
    /// max{|g|, stationarity} for boundary solutions, max{g⁺, stationarity} otherwise.
    pub fn metric(&self, boundary: bool) -> f64 {
        let g = if boundary {
            self.feasibility.abs()
        } else {
            self.feasibility.max(0.0)
        };
        g.max(self.stationarity)
    }
}

/// Evaluates the optimality residuals; `bounds` are the interval ends known so far.
pub fn kkt_residual(
    prob: &GtrsProblem,
    x: &[f64],
    lambda: f64,
    bounds: (f64, f64),
) -> Result<KktReport> {
    let r = prob.stationarity_residual(x, lambda)?;
    let g = prob.eval_g(x)?;
    let slack = 1e-8 * lambda.abs().max(1.0);
    let (lo, hi) = bounds;
    Ok(KktReport {
        stationarity: norm(&r),
        feasibility: g,
        complementarity: (lambda * g).abs(),
        multiplier_in_interval: lambda >= -slack && lambda >= lo - slack && lambda <= hi + slack,
    })
}
