//! Root finding for the secular function φ(λ) = g(x(λ)) on a sign-change bracket.
//!
//! Each step starts from the midpoint, replaces it by the inverse linear interpolant of
//! the two bracket values when that lands strictly inside, and, once a feasible and an
//! infeasible point are known, also moves along the segment between them to the
//! constraint boundary. The boundary points only feed a primal incumbent; the bracket
//! itself is driven by φ alone.

use serde::{Deserialize, Serialize};

use crate::config::SecularConfig;
use crate::error::{Error, Result};
use crate::problem::{quad_value, GtrsProblem};
use crate::vecops::{dot, norm};

/// One point on the stationary path.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub lambda: f64,
    /// g(x).
    pub phi: f64,
    pub x: Vec<f64>,
    /// B x.
    pub bx: Vec<f64>,
    /// ‖(A+λB)x + (a+λb)‖.
    pub stationarity: f64,
    pub cg_iterations: usize,
    pub regularized: bool,
}

impl Evaluation {
    /// max{|φ|, stationarity}.
    pub fn metric(&self) -> f64 {
        self.phi.abs().max(self.stationarity)
    }
}

/// Produces x(λ) and φ(λ) for the secular iteration.
pub trait PhiEvaluator {
    fn evaluate(&mut self, lambda: f64) -> Result<Evaluation>;
}

impl<F: FnMut(f64) -> Result<Evaluation>> PhiEvaluator for F {
    fn evaluate(&mut self, lambda: f64) -> Result<Evaluation> {
        self(lambda)
    }
}

/// `lo < hi` with φ > 0 to the left of the root and φ < 0 to the right. Known endpoint
/// evaluations enable interpolation from the first step.
#[derive(Debug, Clone)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub lo_eval: Option<Evaluation>,
    pub hi_eval: Option<Evaluation>,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Input(format!("invalid bracket [{lo}, {hi}]")));
        }
        Ok(Bracket {
            lo,
            hi,
            lo_eval: None,
            hi_eval: None,
        })
    }

    pub fn with_lo(mut self, e: Evaluation) -> Self {
        self.lo_eval = Some(e);
        self
    }

    pub fn with_hi(mut self, e: Evaluation) -> Self {
        self.hi_eval = Some(e);
        self
    }

    pub fn relative_width(&self) -> f64 {
        relative_width(self.lo, self.hi)
    }
}

fn relative_width(lo: f64, hi: f64) -> f64 {
    let s = lo.abs() + hi.abs();
    if s == 0.0 {
        0.0
    } else {
        (hi - lo).abs() / s
    }
}

/// Zero of the line through `(λ₊, φ₊)` and `(λ₋, φ₋)` if it lies strictly between them and
/// the values are not numerically equal.
pub fn inverse_interp(pos: (f64, f64), neg: (f64, f64), guard: f64) -> Option<f64> {
    let (lp, fp) = pos;
    let (ln, fn_) = neg;
    let denom = fn_ - fp;
    let scale = fp.abs().max(fn_.abs()).max(f64::MIN_POSITIVE);
    if !(denom.abs() >= guard * scale) {
        return None;
    }
    let l = lp + (0.0 - fp) * (ln - lp) / denom;
    let (a, b) = if lp < ln { (lp, ln) } else { (ln, lp) };
    (l > a && l < b).then_some(l)
}

/// A point on the constraint boundary obtained from a secant in x-space.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    pub bx: Vec<f64>,
    /// Position on the segment: `x = x₋ + α(x₊ − x₋)`.
    pub alpha: f64,
    pub q: f64,
    pub g: f64,
}

/// Intersects the segment from the feasible `neg` to the infeasible `pos` with the
/// boundary g = 0. B-products are reused from the evaluations; one A-product is spent
/// on the objective.
pub fn primal_boundary_point(
    prob: &GtrsProblem,
    pos: &Evaluation,
    neg: &Evaluation,
) -> Option<BoundaryPoint> {
    let n = pos.x.len();
    let d: Vec<f64> = pos.x.iter().zip(&neg.x).map(|(p, q)| p - q).collect();
    let bd: Vec<f64> = pos.bx.iter().zip(&neg.bx).map(|(p, q)| p - q).collect();
    // g(α) = c0 + 2 c1 α + c2 α²
    let c2 = dot(&d, &bd);
    let c1 = dot(&d, &neg.bx) + dot(&d, &prob.g_lin);
    let c0 = neg.phi;
    let scale = c0.abs() + 2.0 * c1.abs() + c2.abs();
    let roots: Vec<f64> = if c2.abs() <= 1e-14 * scale {
        if c1 == 0.0 {
            return None;
        }
        vec![-c0 / (2.0 * c1)]
    } else {
        let disc = c1 * c1 - c2 * c0;
        if disc < -1e-12 * (c1 * c1 + (c2 * c0).abs()) {
            return None;
        }
        let sq = disc.max(0.0).sqrt();
        let t = -(c1 + c1.signum() * sq);
        if t == 0.0 {
            vec![0.0]
        } else {
            vec![t / c2, c0 / t]
        }
    };
    let slack = 1e-12;
    let mut best: Option<BoundaryPoint> = None;
    for alpha in roots {
        if !(alpha >= -slack && alpha <= 1.0 + slack) {
            continue;
        }
        let alpha = alpha.clamp(0.0, 1.0);
        let mut x = vec![0.0; n];
        let mut bx = vec![0.0; n];
        for i in 0..n {
            x[i] = neg.x[i] + alpha * d[i];
            bx[i] = neg.bx[i] + alpha * bd[i];
        }
        let q = prob.eval_q(&x).ok()?;
        let g = quad_value(&x, &bx, &prob.g_lin, prob.g_const);
        if best.as_ref().is_none_or(|b| q < b.q) {
            best = Some(BoundaryPoint { x, bx, alpha, q, g });
        }
    }
    best
}

/// One evaluation of the iteration, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecularStep {
    pub lambda: f64,
    pub phi: f64,
    pub stationarity: f64,
    pub cg_iterations: usize,
    pub regularized: bool,
    pub interpolated: bool,
    pub lo: f64,
    pub hi: f64,
    /// Objective of the boundary incumbent after this step.
    pub incumbent_q: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecularStatus {
    /// The optimality criterion held at an iterate or at the incumbent.
    Kkt,
    /// The relative bracket width fell below the tolerance.
    Width,
    /// φ vanished exactly at an iterate.
    ExactRoot,
    /// Iteration budget spent; the best point found is returned.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SecularOutcome {
    pub lambda: f64,
    pub x: Vec<f64>,
    pub g: f64,
    pub stationarity: f64,
    pub from_incumbent: bool,
    pub status: SecularStatus,
    /// Evaluations of φ performed.
    pub iterations: usize,
    pub steps: Vec<SecularStep>,
    /// The path evaluation with the smallest criterion value.
    pub best_eval: Option<Evaluation>,
    pub lo: f64,
    pub hi: f64,
}

struct Incumbent {
    point: BoundaryPoint,
    lambda: f64,
    stationarity: f64,
}

impl Incumbent {
    fn metric(&self) -> f64 {
        self.point.g.abs().max(self.stationarity)
    }
}

/// Multiplier minimizing ‖(Ax + a) + λ(Bx + b)‖ over `[lo, hi]`, and the residual there.
fn least_squares_multiplier(
    prob: &GtrsProblem,
    x: &[f64],
    bx: &[f64],
    lo: f64,
    hi: f64,
) -> Option<(f64, f64)> {
    let mut u = prob.q_mat.matvec(x).ok()?;
    for (ui, ai) in u.iter_mut().zip(&prob.q_lin) {
        *ui += ai;
    }
    let w: Vec<f64> = bx.iter().zip(&prob.g_lin).map(|(p, b)| p + b).collect();
    let ww = dot(&w, &w);
    let lambda = if ww > 0.0 {
        (-dot(&u, &w) / ww).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    let r: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + lambda * b).collect();
    Some((lambda, norm(&r)))
}

/// Finds the root of φ on `bracket`.
pub fn solve_secular<E: PhiEvaluator + ?Sized>(
    prob: &GtrsProblem,
    bracket: Bracket,
    evaluator: &mut E,
    cfg: &SecularConfig,
) -> Result<SecularOutcome> {
    let Bracket {
        mut lo,
        mut hi,
        lo_eval: mut pos,
        hi_eval: mut neg,
    } = bracket;
    if !(lo < hi) {
        return Err(Error::Input(format!("invalid bracket [{lo}, {hi}]")));
    }
    if pos.as_ref().is_some_and(|e| !(e.phi > 0.0)) || neg.as_ref().is_some_and(|e| !(e.phi < 0.0))
    {
        return Err(Error::Input(
            "bracket evaluations violate the sign invariant".into(),
        ));
    }

    // Widths are measured against the initial bracket so the bisection count is fixed.
    let width_scale = lo.abs() + hi.abs();
    let narrow = |lo: f64, hi: f64| (hi - lo) < cfg.width_tol * width_scale;

    let mut steps: Vec<SecularStep> = Vec::new();
    let mut incumbent: Option<Incumbent> = None;
    let mut best: Option<Evaluation> = None;
    let consider = |e: &Evaluation, best: &mut Option<Evaluation>| {
        if best.as_ref().is_none_or(|b| e.metric() < b.metric()) {
            *best = Some(e.clone());
        }
    };
    for e in pos.iter().chain(neg.iter()) {
        consider(e, &mut best);
    }

    let update_incumbent = |pos: &Option<Evaluation>,
                            neg: &Option<Evaluation>,
                            lo: f64,
                            hi: f64,
                            inc: &mut Option<Incumbent>| {
        if let (Some(p), Some(m)) = (pos, neg) {
            if let Some(bp) = primal_boundary_point(prob, p, m) {
                if inc.as_ref().is_none_or(|i| bp.q < i.point.q) {
                    if let Some((lambda, st)) =
                        least_squares_multiplier(prob, &bp.x, &bp.bx, lo, hi)
                    {
                        *inc = Some(Incumbent {
                            point: bp,
                            lambda,
                            stationarity: st,
                        });
                    }
                }
            }
        }
    };

    if cfg.accelerate {
        update_incumbent(&pos, &neg, lo, hi, &mut incumbent);
        if let Some(out) = kkt_exit(&best, &incumbent, cfg.kkt_tol, 0, &steps, lo, hi) {
            return Ok(out);
        }
    }

    let mut iterations = 0usize;
    // Side replaced by the last two interpolation steps, to stop one-sided stagnation.
    let mut last_sides: [Option<bool>; 2] = [None, None];
    let mut phi_seen: Vec<f64> = pos.iter().chain(neg.iter()).map(|e| e.phi).collect();
    while iterations < cfg.max_iters {
        let width_done = narrow(lo, hi);
        let mut candidate = 0.5 * (lo + hi);
        let mut interpolated = false;
        if cfg.accelerate && !width_done {
            let stagnating = last_sides[0].is_some() && last_sides[0] == last_sides[1];
            if let (Some(p), Some(m), false) = (&pos, &neg, stagnating) {
                if let Some(l) =
                    inverse_interp((p.lambda, p.phi), (m.lambda, m.phi), cfg.interp_guard)
                {
                    if l > lo && l < hi {
                        candidate = l;
                        interpolated = true;
                    }
                }
            }
        }

        let ev = evaluator.evaluate(candidate)?;
        iterations += 1;
        consider(&ev, &mut best);

        let scale = phi_seen.iter().fold(prob.g_scale(), |m, v| m.max(v.abs()));
        if ev.phi != 0.0 && phi_seen.iter().any(|v| (v - ev.phi).abs() < 1e-12 * scale) {
            let far = phi_seen.iter().all(|v| v.signum() == ev.phi.signum());
            if far {
                return Err(Error::ConstantPhi);
            }
        }
        phi_seen.push(ev.phi);

        let side_lo = ev.phi > 0.0;
        if ev.phi == 0.0 {
            steps.push(step_record(&ev, interpolated, lo, hi, &incumbent));
            return Ok(SecularOutcome {
                lambda: ev.lambda,
                x: ev.x.clone(),
                g: ev.phi,
                stationarity: ev.stationarity,
                from_incumbent: false,
                status: SecularStatus::ExactRoot,
                iterations,
                steps,
                best_eval: Some(ev),
                lo,
                hi,
            });
        }
        if side_lo {
            lo = candidate;
            pos = Some(ev.clone());
        } else {
            hi = candidate;
            neg = Some(ev.clone());
        }
        last_sides = [last_sides[1], interpolated.then_some(side_lo)];

        if cfg.accelerate {
            update_incumbent(&pos, &neg, lo, hi, &mut incumbent);
        }
        steps.push(step_record(&ev, interpolated, lo, hi, &incumbent));

        if cfg.accelerate {
            if let Some(out) = kkt_exit(&best, &incumbent, cfg.kkt_tol, iterations, &steps, lo, hi)
            {
                return Ok(out);
            }
        }
        if width_done || narrow(lo, hi) {
            return Ok(finish(
                best,
                incumbent,
                SecularStatus::Width,
                iterations,
                steps,
                lo,
                hi,
            ));
        }
    }
    Ok(finish(
        best,
        incumbent,
        SecularStatus::MaxIterations,
        iterations,
        steps,
        lo,
        hi,
    ))
}

fn step_record(
    ev: &Evaluation,
    interpolated: bool,
    lo: f64,
    hi: f64,
    inc: &Option<Incumbent>,
) -> SecularStep {
    SecularStep {
        lambda: ev.lambda,
        phi: ev.phi,
        stationarity: ev.stationarity,
        cg_iterations: ev.cg_iterations,
        regularized: ev.regularized,
        interpolated,
        lo,
        hi,
        incumbent_q: inc.as_ref().map(|i| i.point.q),
    }
}

fn kkt_exit(
    best: &Option<Evaluation>,
    inc: &Option<Incumbent>,
    tol: f64,
    iterations: usize,
    steps: &[SecularStep],
    lo: f64,
    hi: f64,
) -> Option<SecularOutcome> {
    let it_ok = best.as_ref().is_some_and(|b| b.metric() < tol);
    let inc_ok = inc.as_ref().is_some_and(|i| i.metric() < tol);
    if !(it_ok || inc_ok) {
        return None;
    }
    Some(finish(
        best.clone(),
        inc.as_ref().map(|i| Incumbent {
            point: i.point.clone(),
            lambda: i.lambda,
            stationarity: i.stationarity,
        }),
        SecularStatus::Kkt,
        iterations,
        steps.to_vec(),
        lo,
        hi,
    ))
}

fn finish(
    best: Option<Evaluation>,
    inc: Option<Incumbent>,
    status: SecularStatus,
    iterations: usize,
    steps: Vec<SecularStep>,
    lo: f64,
    hi: f64,
) -> SecularOutcome {
    let use_inc = match (&best, &inc) {
        (_, None) => false,
        (None, Some(_)) => true,
        (Some(b), Some(i)) => i.metric() < b.metric(),
    };
    if use_inc {
        let i = inc.unwrap();
        SecularOutcome {
            lambda: i.lambda,
            g: i.point.g,
            stationarity: i.stationarity,
            x: i.point.x,
            from_incumbent: true,
            status,
            iterations,
            steps,
            best_eval: best,
            lo,
            hi,
        }
    } else {
        let b = best.expect("at least one evaluation");
        SecularOutcome {
            lambda: b.lambda,
            x: b.x.clone(),
            g: b.phi,
            stationarity: b.stationarity,
            from_incumbent: false,
            status,
            iterations,
            steps,
            best_eval: Some(b),
            lo,
            hi,
        }
    }
}

/// Bisection steps needed to shrink `[lo, hi]` below the relative width `tol`.
pub fn bisection_bound(lo: f64, hi: f64, tol: f64) -> usize {
    let scale = lo.abs() + hi.abs();
    let ratio = (hi - lo) / (tol * scale);
    if ratio <= 1.0 {
        1
    } else {
        ratio.log2().ceil() as usize
    }
}
