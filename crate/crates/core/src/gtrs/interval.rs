use serde::{Deserialize, Serialize};

use super::Context;
use crate::error::Result;
use crate::sparse::{min_gen_eig, Pencil};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

/// One end of the interval of λ with A + λB positive semidefinite.
#[derive(Debug, Clone)]
pub struct Endpoint {
    pub side: Side,
    /// ±∞ when A + λB stays definite in that direction.
    pub value: f64,
    /// Smallest eigenvalue of (−B, S) for the lower end, of (B, S) for the upper end,
    /// with S = A + λ̂B.
    pub pencil_eig: f64,
    /// S-orthonormal eigenvectors whose eigenvalue coincides with `pencil_eig` to the
    /// rank tolerance. For a finite endpoint these span the null space of A + λₑB.
    pub null_vectors: Vec<Vec<f64>>,
    pub cluster_eigs: Vec<f64>,
    /// First computed eigenvalue outside the cluster.
    pub next_eig: Option<f64>,
}

impl Endpoint {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierInterval {
    /// `None` when not computed; −∞ is reported as `Some(-inf)`.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub eig_low: Option<f64>,
    pub eig_up: Option<f64>,
}

impl MultiplierInterval {
    pub fn record(&mut self, ep: &Endpoint) {
        match ep.side {
            Side::Lower => {
                self.lower = Some(ep.value);
                self.eig_low = Some(ep.pencil_eig);
            }
            Side::Upper => {
                self.upper = Some(ep.value);
                self.eig_up = Some(ep.pencil_eig);
            }
        }
    }

    /// Bounds with unknown ends open.
    pub fn bounds(&self) -> (f64, f64) {
        (
            self.lower.unwrap_or(f64::NEG_INFINITY),
            self.upper.unwrap_or(f64::INFINITY),
        )
    }
}

/// Computes one endpoint from the extreme eigenpairs of `(∓B, A + λ̂B)`.
///
/// With θ the smallest eigenvalue, the lower end is λ̂ + 1/θ for the pencil (−B, S) and
/// the upper end λ̂ − 1/θ for (B, S); θ ≥ 0 (to a small relative tolerance) means the
/// end is infinite.
pub fn compute_endpoint(ctx: &Context, side: Side) -> Result<Endpoint> {
    let prob = ctx.prob;
    let cfg = ctx.cfg;
    let n = prob.n();
    let sign = match side {
        Side::Lower => -1.0,
        Side::Upper => 1.0,
    };
    let m = Pencil::scaled(&prob.g_mat, sign).counted(&ctx.counter);
    let s = ctx.s_op();
    let cap = (cfg.max_null_dim + 1).min(n);
    let mut k = 2.min(cap).max(1);
    let mut start = Vec::new();
    loop {
        let res = min_gen_eig(&m, &s, k, &cfg.eig.options(start))?;
        ctx.add_cg(res.inner_iterations as u64);
        let theta = res.values[0];
        let threshold = cfg.infinite_tol * res.m_norm / res.s_norm.max(f64::MIN_POSITIVE);
        if theta >= -threshold {
            let value = match side {
                Side::Lower => f64::NEG_INFINITY,
                Side::Upper => f64::INFINITY,
            };
            return Ok(Endpoint {
                side,
                value,
                pencil_eig: theta,
                null_vectors: Vec::new(),
                cluster_eigs: Vec::new(),
                next_eig: res.values.get(1).copied(),
            });
        }
        let cluster = res
            .values
            .iter()
            .take_while(|t| (**t - theta) <= cfg.rank_tol * theta.abs())
            .count();
        if cluster == k && k < cap {
            k = (2 * k).min(cap);
            start = res.vectors;
            continue;
        }
        let value = match side {
            Side::Lower => prob.lambda_hat + 1.0 / theta,
            Side::Upper => prob.lambda_hat - 1.0 / theta,
        };
        let cluster = cluster.min(cfg.max_null_dim);
        return Ok(Endpoint {
            side,
            value,
            pencil_eig: theta,
            null_vectors: res.vectors[..cluster].to_vec(),
            cluster_eigs: res.values[..cluster].to_vec(),
            next_eig: res.values.get(cluster).copied(),
        });
    }
}

/// Both endpoints.
pub fn multiplier_interval(ctx: &Context) -> Result<(MultiplierInterval, Endpoint, Endpoint)> {
    let lo = compute_endpoint(ctx, Side::Lower)?;
    let hi = compute_endpoint(ctx, Side::Upper)?;
    let mut iv = MultiplierInterval::default();
    iv.record(&lo);
    iv.record(&hi);
    Ok((iv, lo, hi))
}

impl Default for MultiplierInterval {
    fn default() -> Self {
        MultiplierInterval {
            lower: None,
            upper: None,
            eig_low: None,
            eig_up: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolverConfig;
    use crate::problem::fixtures::{example_one, unit_ball};

    #[test]
    fn example_one_interval() {
        let p = example_one();
        let cfg = SolverConfig::default();
        let ctx = Context::new(&p, &cfg);
        let (iv, lo, hi) = multiplier_interval(&ctx).unwrap();
        assert!((iv.lower.unwrap() - 0.5).abs() < 1e-12);
        assert!((iv.upper.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(lo.null_vectors.len(), 1);
        assert_eq!(hi.null_vectors.len(), 1);
    }

    #[test]
    fn definite_constraint_has_no_upper_end() {
        let p = unit_ball(vec![1.0, 0.0, -1.0]);
        let cfg = SolverConfig::default();
        let ctx = Context::new(&p, &cfg);
        let (iv, _, _) = multiplier_interval(&ctx).unwrap();
        assert_eq!(iv.upper, Some(f64::INFINITY));
        assert!((iv.lower.unwrap() + 1.0).abs() < 1e-12);
    }
}
