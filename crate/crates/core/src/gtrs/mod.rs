//! The solver driver.
//!
//! The sign of φ(λ̂) tells on which side of λ̂ the optimal multiplier lies, so only that
//! endpoint of the definiteness interval is computed. A finite endpoint is first tested
//! for hard case 2; otherwise the secular equation is solved on the bracket between λ̂
//! and the endpoint (or 0, or a doubling bound when the endpoint is infinite).

mod hard_case;
mod interval;
mod kkt;
mod phi;
mod refine;

pub use hard_case::{
    boundary_step, check_interior, detect_hard_case2, HardCase2Report, InteriorCheck,
};
pub use interval::{compute_endpoint, multiplier_interval, Endpoint, MultiplierInterval, Side};
pub use kkt::{kkt_residual, KktReport};
pub use phi::{eval_phi, regularized_solve, PathEvaluator, Regularizer};
pub use refine::{phi_derivative, refine};

use std::cell::Cell;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::problem::GtrsProblem;
use crate::secular::{solve_secular, Bracket, Evaluation, SecularStatus, SecularStep};
use crate::sparse::{LinearOperator, MatvecCounter, Pencil};

/// Shared state of one solve: the problem, the configuration and work counters.
pub struct Context<'a> {
    pub prob: &'a GtrsProblem,
    pub cfg: &'a SolverConfig,
    pub counter: MatvecCounter,
    cg_iterations: Cell<u64>,
}

impl<'a> Context<'a> {
    pub fn new(prob: &'a GtrsProblem, cfg: &'a SolverConfig) -> Self {
        Context {
            prob,
            cfg,
            counter: MatvecCounter::new(),
            cg_iterations: Cell::new(0),
        }
    }

    /// `A + λB`, counted.
    pub fn pencil(&self, lambda: f64) -> Pencil<'_> {
        Pencil::new(&self.prob.q_mat, &self.prob.g_mat, lambda).counted(&self.counter)
    }

    /// `S = A + λ̂B`, counted.
    pub fn s_op(&self) -> Pencil<'_> {
        self.pencil(self.prob.lambda_hat)
    }

    pub fn a_times(&self, x: &[f64]) -> Vec<f64> {
        Pencil::scaled(&self.prob.q_mat, 1.0)
            .counted(&self.counter)
            .apply_vec(x)
    }

    pub fn b_times(&self, x: &[f64]) -> Vec<f64> {
        Pencil::scaled(&self.prob.g_mat, 1.0)
            .counted(&self.counter)
            .apply_vec(x)
    }

    pub fn add_cg(&self, k: u64) {
        self.cg_iterations.set(self.cg_iterations.get() + k);
    }

    pub fn cg_iterations(&self) -> u64 {
        self.cg_iterations.get()
    }

    pub fn matvecs(&self) -> u64 {
        self.counter.get()
    }
}

/// Which structure the optimal solution has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// The unconstrained minimizer is feasible; λ* = 0.
    #[serde(rename = "interior")]
    Interior,
    /// λ* strictly inside the interval and the endpoint system toward λ* is inconsistent
    /// (or that endpoint is infinite or negative).
    #[serde(rename = "boundary_easy")]
    BoundaryEasy,
    /// λ* strictly inside the interval although the endpoint system toward λ* is
    /// consistent.
    #[serde(rename = "hard_case_1")]
    HardCase1,
    /// λ* is the lower endpoint.
    #[serde(rename = "hard_case_2_lower")]
    HardCase2Lower,
    /// λ* is the upper endpoint.
    #[serde(rename = "hard_case_2_upper")]
    HardCase2Upper,
    /// φ(λ̂) = 0, so x(λ̂) is optimal.
    #[serde(rename = "exact_at_lambda_hat")]
    ExactAtLambdaHat,
}

impl Case {
    pub fn as_str(self) -> &'static str {
        match self {
            Case::Interior => "interior",
            Case::BoundaryEasy => "boundary_easy",
            Case::HardCase1 => "hard_case_1",
            Case::HardCase2Lower => "hard_case_2_lower",
            Case::HardCase2Upper => "hard_case_2_upper",
            Case::ExactAtLambdaHat => "exact_at_lambda_hat",
        }
    }

    /// g(x*) = 0 is expected.
    pub fn is_boundary(self) -> bool {
        self != Case::Interior
    }

    pub fn is_hard_case_2(self) -> bool {
        matches!(self, Case::HardCase2Lower | Case::HardCase2Upper)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    LambdaHat,
    Interior,
    Bracketing,
    Secular,
    Refine,
}

/// One φ evaluation made by the driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: Stage,
    pub lambda: f64,
    pub phi: f64,
    pub stationarity: f64,
    pub cg_iterations: usize,
    pub regularized: bool,
}

impl TraceEntry {
    fn from_eval(stage: Stage, e: &Evaluation) -> Self {
        TraceEntry {
            stage,
            lambda: e.lambda,
            phi: e.phi,
            stationarity: e.stationarity,
            cg_iterations: e.cg_iterations,
            regularized: e.regularized,
        }
    }

    fn from_step(s: &SecularStep) -> Self {
        TraceEntry {
            stage: Stage::Secular,
            lambda: s.lambda,
            phi: s.phi,
            stationarity: s.stationarity,
            cg_iterations: s.cg_iterations,
            regularized: s.regularized,
        }
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub interval: f64,
    pub hard_case: f64,
    pub secular: f64,
    pub refine: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// The endpoint range test was close to its tolerance.
    pub range_borderline: bool,
    /// The secular iteration stopped on its iteration budget.
    pub secular_max_iterations: bool,
    /// φ was found constant on the bracket.
    pub constant_phi: bool,
}

#[derive(Debug, Clone)]
pub struct GtrsOutcome {
    pub x_star: Vec<f64>,
    pub lambda_star: f64,
    pub case: Case,
    pub kkt: KktReport,
    /// The criterion value compared against the KKT tolerance.
    pub kkt_metric: f64,
    pub success: bool,
    /// q(x*).
    pub q_star: f64,
    pub interval: MultiplierInterval,
    pub hard_case: Option<HardCase2Report>,
    pub secular_iterations: usize,
    pub secular_status: Option<SecularStatus>,
    /// Whether the returned point came from the boundary incumbent of the secular iteration.
    pub from_incumbent: bool,
    pub refine_steps: usize,
    pub trace: Vec<TraceEntry>,
    pub secular_steps: Vec<SecularStep>,
    /// The bracket handed to the secular root finder.
    pub secular_bracket: Option<(f64, f64)>,
    pub matvecs: u64,
    pub cg_iterations: u64,
    pub timings: PhaseTimings,
    pub diagnostics: Diagnostics,
}

struct Draft {
    x: Vec<f64>,
    lambda: f64,
    case: Case,
    interval: MultiplierInterval,
    hard_case: Option<HardCase2Report>,
    secular_iterations: usize,
    secular_status: Option<SecularStatus>,
    from_incumbent: bool,
    refine_steps: usize,
    secular_steps: Vec<SecularStep>,
    secular_bracket: Option<(f64, f64)>,
}

impl Draft {
    fn new(x: Vec<f64>, lambda: f64, case: Case, interval: MultiplierInterval) -> Self {
        Draft {
            x,
            lambda,
            case,
            interval,
            hard_case: None,
            secular_iterations: 0,
            secular_status: None,
            from_incumbent: false,
            refine_steps: 0,
            secular_steps: Vec::new(),
            secular_bracket: None,
        }
    }
}

fn seconds(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// The limit point of the stationary path at a consistent endpoint, as an evaluation.
fn endpoint_limit(ctx: &Context, rep: &HardCase2Report) -> Option<Evaluation> {
    let x = rep.x_base.clone()?;
    let phi = rep.p_star?;
    let bx = ctx.b_times(&x);
    let r = ctx.prob.stationarity_residual(&x, rep.endpoint).ok()?;
    Some(Evaluation {
        lambda: rep.endpoint,
        phi,
        x,
        bx,
        stationarity: crate::vecops::norm(&r),
        cg_iterations: 0,
        regularized: false,
    })
}

/// Solves the problem.
pub fn solve(prob: &GtrsProblem, cfg: &SolverConfig) -> Result<GtrsOutcome> {
    let start = Instant::now();
    let ctx = Context::new(prob, cfg);
    let mut timings = PhaseTimings::default();
    let mut trace = Vec::new();
    let mut diagnostics = Diagnostics::default();
    let mut interval = MultiplierInterval::default();
    let lambda_hat = prob.lambda_hat;

    let hat = eval_phi(&ctx, lambda_hat).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => {
            Error::Input("A + lambda_hat B is not positive definite".into())
        }
        other => other.in_phase("evaluating phi at lambda_hat"),
    })?;
    trace.push(TraceEntry::from_eval(Stage::LambdaHat, &hat));

    let draft = if hat.phi.abs() <= cfg.phi_tol * prob.g_scale() {
        Draft::new(hat.x.clone(), lambda_hat, Case::ExactAtLambdaHat, interval)
    } else if hat.phi < 0.0 && lambda_hat == 0.0 {
        // x(0) = −A⁻¹a is feasible and A ≻ 0.
        Draft::new(hat.x.clone(), 0.0, Case::Interior, interval)
    } else {
        let side = if hat.phi > 0.0 {
            Side::Upper
        } else {
            Side::Lower
        };
        let t = Instant::now();
        let ep = compute_endpoint(&ctx, side)
            .map_err(|e| e.in_phase("computing the interval endpoint"))?;
        timings.interval = seconds(t);
        interval.record(&ep);

        let mut bracket: Option<(Bracket, Option<Regularizer>, Case)> = None;
        let mut hard_case = None;
        let mut result: Option<Draft> = None;

        match side {
            Side::Upper if !ep.is_finite() => {
                let t = Instant::now();
                let mut lo = lambda_hat;
                let mut pos = hat.clone();
                let step = lambda_hat.abs().max(1.0);
                let mut found = None;
                for k in 0..=cfg.max_doubling {
                    let l = lambda_hat + 2f64.powi(k as i32) * step;
                    let ev = eval_phi(&ctx, l).map_err(|e| e.in_phase("bracketing upward"))?;
                    trace.push(TraceEntry::from_eval(Stage::Bracketing, &ev));
                    if ev.phi < 0.0 {
                        found = Some(ev);
                        break;
                    }
                    if ev.phi == 0.0 {
                        result = Some(Draft::new(ev.x.clone(), l, Case::BoundaryEasy, interval));
                        break;
                    }
                    lo = l;
                    pos = ev;
                }
                timings.secular += seconds(t);
                if result.is_none() {
                    let neg = found.ok_or_else(|| {
                        Error::Internal(
                            "no sign change of phi found toward an infinite endpoint".into(),
                        )
                    })?;
                    let b = Bracket::new(lo, neg.lambda)?.with_lo(pos).with_hi(neg);
                    bracket = Some((b, None, Case::BoundaryEasy));
                }
            }
            Side::Lower if ep.value < 0.0 => {
                let t = Instant::now();
                let ic = check_interior(&ctx).map_err(|e| e.in_phase("interior check"))?;
                timings.hard_case = seconds(t);
                let ev = Evaluation {
                    lambda: 0.0,
                    phi: ic.g,
                    x: ic.x.clone(),
                    bx: ic.bx.clone(),
                    stationarity: ic.stationarity,
                    cg_iterations: ic.cg_iterations,
                    regularized: false,
                };
                trace.push(TraceEntry::from_eval(Stage::Interior, &ev));
                if ic.is_interior() {
                    result = Some(Draft::new(ic.x, 0.0, Case::Interior, interval));
                } else {
                    let b = Bracket::new(0.0, lambda_hat)?
                        .with_lo(ev)
                        .with_hi(hat.clone());
                    bracket = Some((b, None, Case::BoundaryEasy));
                }
            }
            _ => {
                let t = Instant::now();
                let rep = detect_hard_case2(&ctx, &ep).map_err(|e| e.in_phase("hard case test"))?;
                timings.hard_case = seconds(t);
                diagnostics.range_borderline = rep.range_borderline;
                if rep.is_hard_case_2 {
                    let x = boundary_step(
                        prob,
                        rep.x_base.as_ref().unwrap(),
                        &rep.null_basis[0],
                        rep.p_star.unwrap(),
                    )?;
                    let case = if side == Side::Lower {
                        Case::HardCase2Lower
                    } else {
                        Case::HardCase2Upper
                    };
                    let mut d = Draft::new(x, ep.value, case, interval);
                    d.hard_case = Some(rep);
                    result = Some(d);
                } else {
                    let limit = if rep.consistent {
                        endpoint_limit(&ctx, &rep)
                    } else {
                        None
                    };
                    let reg = rep.consistent.then(|| Regularizer::new(&ctx, &ep, &hat.x));
                    let case = if rep.consistent {
                        Case::HardCase1
                    } else {
                        Case::BoundaryEasy
                    };
                    let b = match side {
                        Side::Upper => {
                            let b = Bracket::new(lambda_hat, ep.value)?.with_lo(hat.clone());
                            match limit {
                                Some(l) if l.phi < 0.0 => b.with_hi(l),
                                _ => b,
                            }
                        }
                        Side::Lower => {
                            let lo = ep.value.max(0.0);
                            let b = Bracket::new(lo, lambda_hat)?.with_hi(hat.clone());
                            match limit {
                                Some(l) if l.phi > 0.0 && ep.value >= 0.0 => b.with_lo(l),
                                _ => b,
                            }
                        }
                    };
                    bracket = Some((b, reg, case));
                    hard_case = Some(rep);
                }
            }
        }

        match (result, bracket) {
            (Some(d), _) => d,
            (None, Some((b, reg, case))) => {
                let (lo, hi) = (b.lo, b.hi);
                let mut evaluator = PathEvaluator::new(&ctx, reg);
                let t = Instant::now();
                let sec = solve_secular(prob, b, &mut evaluator, &cfg.secular);
                timings.secular += seconds(t);
                match sec {
                    Ok(sec) => {
                        trace.extend(sec.steps.iter().map(TraceEntry::from_step));
                        diagnostics.secular_max_iterations =
                            sec.status == SecularStatus::MaxIterations;
                        let mut d = Draft::new(sec.x.clone(), sec.lambda, case, interval);
                        d.secular_iterations = sec.iterations;
                        d.secular_status = Some(sec.status);
                        d.from_incumbent = sec.from_incumbent;
                        d.secular_steps = sec.steps.clone();
                        d.secular_bracket = Some((lo, hi));
                        d.hard_case = hard_case;

                        let t = Instant::now();
                        if let Some(best) = sec.best_eval.clone() {
                            let (refined, steps) = refine(&ctx, best, &mut evaluator, lo, hi);
                            let sec_metric = sec.g.abs().max(sec.stationarity);
                            if steps > 0 && refined.metric() < sec_metric {
                                trace.push(TraceEntry::from_eval(Stage::Refine, &refined));
                                d.x = refined.x;
                                d.lambda = refined.lambda;
                                d.refine_steps = steps;
                                d.from_incumbent = false;
                            }
                        }
                        timings.refine = seconds(t);
                        d
                    }
                    Err(Error::ConstantPhi) => {
                        diagnostics.constant_phi = true;
                        let rep = hard_case
                            .filter(|r| r.consistent)
                            .ok_or_else(|| Error::ConstantPhi.in_phase("secular solve"))?;
                        let x = boundary_step(
                            prob,
                            rep.x_base.as_ref().unwrap(),
                            &rep.null_basis[0],
                            rep.p_star.unwrap(),
                        )?;
                        let case = if side == Side::Lower {
                            Case::HardCase2Lower
                        } else {
                            Case::HardCase2Upper
                        };
                        let mut d = Draft::new(x, rep.endpoint, case, interval);
                        d.hard_case = Some(rep);
                        d
                    }
                    Err(e) => return Err(e.in_phase("secular solve")),
                }
            }
            (None, None) => return Err(Error::Internal("driver reached no result".into())),
        }
    };

    let mut draft = draft;
    if cfg.full_interval {
        let t = Instant::now();
        for side in [Side::Lower, Side::Upper] {
            let known = match side {
                Side::Lower => draft.interval.lower.is_some(),
                Side::Upper => draft.interval.upper.is_some(),
            };
            // Reporting only; a failure here leaves that end unknown.
            if !known {
                if let Ok(ep) = compute_endpoint(&ctx, side) {
                    draft.interval.record(&ep);
                }
            }
        }
        timings.interval += seconds(t);
    }

    let bounds = draft.interval.bounds();
    let kkt = kkt_residual(prob, &draft.x, draft.lambda, bounds)?;
    let kkt_metric = kkt.metric(draft.case.is_boundary());
    let q_star = prob.eval_q(&draft.x)?;
    timings.total = seconds(start);
    Ok(GtrsOutcome {
        success: kkt_metric < cfg.secular.kkt_tol && kkt.multiplier_in_interval,
        x_star: draft.x,
        lambda_star: draft.lambda,
        case: draft.case,
        kkt,
        kkt_metric,
        q_star,
        interval: draft.interval,
        hard_case: draft.hard_case,
        secular_iterations: draft.secular_iterations,
        secular_status: draft.secular_status,
        from_incumbent: draft.from_incumbent,
        refine_steps: draft.refine_steps,
        trace,
        secular_steps: draft.secular_steps,
        secular_bracket: draft.secular_bracket,
        matvecs: ctx.matvecs(),
        cg_iterations: ctx.cg_iterations(),
        timings,
        diagnostics,
    })
}
