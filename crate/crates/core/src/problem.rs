use crate::error::{check_dim, Error, Result};
use crate::sparse::SparseSymmetric;
use crate::vecops::dot;

/// `min q(x) = xᵀAx + 2aᵀx  s.t.  g(x) = xᵀBx + 2bᵀx + β ≤ 0`, with `A + λ̂B` positive
/// definite.
///
/// Fields are named after the function they belong to: `q_mat` = A, `q_lin` = a,
/// `g_mat` = B, `g_lin` = b, `g_const` = β.
#[derive(Debug, Clone, PartialEq)]
pub struct GtrsProblem {
    pub q_mat: SparseSymmetric,
    pub g_mat: SparseSymmetric,
    pub q_lin: Vec<f64>,
    pub g_lin: Vec<f64>,
    pub g_const: f64,
    pub lambda_hat: f64,
}

impl GtrsProblem {
    pub fn new(
        q_mat: SparseSymmetric,
        g_mat: SparseSymmetric,
        q_lin: Vec<f64>,
        g_lin: Vec<f64>,
        g_const: f64,
        lambda_hat: f64,
    ) -> Result<Self> {
        let n = q_mat.n();
        check_dim("constraint matrix", n, g_mat.n())?;
        check_dim("objective linear term", n, q_lin.len())?;
        check_dim("constraint linear term", n, g_lin.len())?;
        if n == 0 {
            return Err(Error::Input("problem dimension is zero".into()));
        }
        if !g_const.is_finite() {
            return Err(Error::Input("constraint constant is not finite".into()));
        }
        if !(lambda_hat.is_finite() && lambda_hat >= 0.0) {
            return Err(Error::Input(format!(
                "lambda_hat must be finite and nonnegative, got {lambda_hat}"
            )));
        }
        if q_lin.iter().chain(&g_lin).any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite entry in a linear term".into()));
        }
        Ok(GtrsProblem {
            q_mat,
            g_mat,
            q_lin,
            g_lin,
            g_const,
            lambda_hat,
        })
    }

    pub fn n(&self) -> usize {
        self.q_mat.n()
    }

    /// Objective `xᵀAx + 2aᵀx`.
    pub fn eval_q(&self, x: &[f64]) -> Result<f64> {
        let qx = self.q_mat.matvec(x)?;
        Ok(quad_value(x, &qx, &self.q_lin, 0.0))
    }

    /// Constraint `xᵀBx + 2bᵀx + β`.
    pub fn eval_g(&self, x: &[f64]) -> Result<f64> {
        let gx = self.g_mat.matvec(x)?;
        Ok(quad_value(x, &gx, &self.g_lin, self.g_const))
    }

    /// `(A + λB)x + (a + λb)`.
    pub fn stationarity_residual(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let mut r = self.q_mat.matvec(x)?;
        let gx = self.g_mat.matvec(x)?;
        for i in 0..r.len() {
            r[i] += lambda * gx[i] + self.q_lin[i] + lambda * self.g_lin[i];
        }
        Ok(r)
    }

    /// `a + λb`.
    pub fn shifted_linear(&self, lambda: f64) -> Vec<f64> {
        self.q_lin
            .iter()
            .zip(&self.g_lin)
            .map(|(a, b)| a + lambda * b)
            .collect()
    }

    /// Magnitude used to scale constraint-value tolerances.
    pub fn g_scale(&self) -> f64 {
        1.0 + self.g_const.abs()
    }
}

/// `xᵀ(Mx) + 2 cᵀx + k` given the product `Mx`.
pub(crate) fn quad_value(x: &[f64], mx: &[f64], c: &[f64], k: f64) -> f64 {
    dot(x, mx) + 2.0 * dot(c, x) + k
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The 2×2 problem whose lower endpoint is hard case 2 although the pseudo-inverse
    /// point is infeasible.
    pub fn example_one() -> GtrsProblem {
        GtrsProblem::new(
            SparseSymmetric::from_diagonal(&[-1.0, 1.0]),
            SparseSymmetric::from_diagonal(&[2.0, -1.0]),
            vec![-25.0, -16.5],
            vec![50.0, 25.0],
            0.0,
            0.75,
        )
        .unwrap()
    }

    pub fn unit_ball(q_lin: Vec<f64>) -> GtrsProblem {
        let n = q_lin.len();
        GtrsProblem::new(
            SparseSymmetric::identity(n),
            SparseSymmetric::identity(n),
            q_lin,
            vec![0.0; n],
            -1.0,
            0.0,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::example_one;
    use super::*;

    #[test]
    fn example_one_values() {
        let p = example_one();
        assert_eq!(p.eval_g(&[0.0, 8.0]).unwrap(), 336.0);
        assert_eq!(p.eval_g(&[-25.0, 8.0]).unwrap(), -914.0);
    }

    #[test]
    fn origin_gives_constant_terms() {
        let p = example_one();
        assert_eq!(p.eval_g(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(p.eval_q(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_negative_lambda_hat() {
        let p = example_one();
        let r = GtrsProblem::new(p.q_mat, p.g_mat, p.q_lin, p.g_lin, 0.0, -1.0);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let p = example_one();
        let r = GtrsProblem::new(p.q_mat, p.g_mat, vec![1.0], p.g_lin, 0.0, 0.75);
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }
}
