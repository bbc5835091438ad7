use serde::{Deserialize, Serialize};

use crate::sparse::EigOptions;

/// Stopping rules of the secular-equation iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecularConfig {
    /// Accept when max{|g|, ‖(A+λB)x + (a+λb)‖} falls below this.
    pub kkt_tol: f64,
    /// Stop when hi − lo falls below this times |lo₀| + |hi₀| of the initial bracket.
    pub width_tol: f64,
    pub max_iters: usize,
    /// Secant steps are skipped when |φ₊ − φ₋| is below this times the φ scale.
    pub interp_guard: f64,
    /// Inverse interpolation and the primal boundary step. When off the iteration is
    /// plain bisection stopped by the width rule only.
    pub accelerate: bool,
}

impl Default for SecularConfig {
    fn default() -> Self {
        SecularConfig {
            kkt_tol: 1e-8,
            width_tol: 1e-11,
            max_iters: 200,
            interp_guard: 1e-14,
            accelerate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub max_basis: usize,
    pub inner_tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub seedless: bool,
}

impl Default for EigConfig {
    fn default() -> Self {
        let d = EigOptions::default();
        EigConfig {
            tol: d.tol,
            max_iter: d.max_iter,
            max_basis: d.max_basis,
            inner_tol: d.inner_tol,
            seed: d.seed,
            seedless: d.seedless,
        }
    }
}

impl EigConfig {
    pub fn options(&self, start: Vec<Vec<f64>>) -> EigOptions {
        EigOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            max_basis: self.max_basis,
            inner_tol: self.inner_tol,
            inner_max_iter: None,
            seed: self.seed,
            seedless: self.seedless,
            start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub secular: SecularConfig,
    pub eig: EigConfig,
    /// Relative CG tolerance; further tightened so the residual stays well below
    /// `secular.kkt_tol`.
    pub cg_tol: f64,
    /// Defaults to `10 n` (at least 100).
    pub cg_max_iter: Option<usize>,
    /// |φ(λ̂)| ≤ phi_tol·(1+|β|) accepts x(λ̂) outright.
    pub phi_tol: f64,
    /// Sign tolerance of the hard-case-2 test on p*, scaled by 1+|β|.
    pub hard_case_tol: f64,
    /// Endpoint system consistent iff ‖Zᵀ(a+λb)‖ ≤ range_tol·(1+‖a+λb‖).
    pub range_tol: f64,
    /// Pencil eigenvalues within this relative distance of the extreme one are treated
    /// as one null space at the endpoint.
    pub rank_tol: f64,
    pub max_null_dim: usize,
    /// Pencil eigenvalues above −infinite_tol·‖B‖/‖A+λ̂B‖ mean an infinite endpoint.
    pub infinite_tol: f64,
    /// Use the regularized system when |λ − λₑ| < endpoint_guard·max(1, |λₑ|).
    pub endpoint_guard: f64,
    /// Weight of the null-space term in the regularized operator.
    pub reg_alpha: f64,
    pub refine_steps: usize,
    /// Doubling steps when bracketing toward an infinite endpoint.
    pub max_doubling: u32,
    /// Also compute the interval end the solve did not need, for reporting.
    pub full_interval: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            secular: SecularConfig::default(),
            eig: EigConfig::default(),
            cg_tol: 1e-12,
            cg_max_iter: None,
            phi_tol: 1e-10,
            hard_case_tol: 1e-10,
            range_tol: 1e-8,
            rank_tol: 1e-8,
            max_null_dim: 8,
            infinite_tol: 1e-12,
            endpoint_guard: 1e-5,
            reg_alpha: 1.0,
            refine_steps: 3,
            max_doubling: 60,
            full_interval: true,
        }
    }
}

impl SolverConfig {
    pub(crate) fn cg_iterations(&self, n: usize) -> usize {
        self.cg_max_iter.unwrap_or((10 * n).max(100))
    }

    /// Relative CG tolerance for a right-hand side of norm `rhs_norm`.
    pub(crate) fn cg_rel_tol(&self, rhs_norm: f64) -> f64 {
        self.cg_tol
            .min(1e-2 * self.secular.kkt_tol / rhs_norm.max(1.0))
            .max(1e-15)
    }
}
