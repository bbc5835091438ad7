//! Run reports: a fixed-field JSON document and a human-readable table.

use std::fmt::Write as _;

use gtrs_core::gtrs::{kkt_residual, Side, TraceEntry};
use gtrs_core::oracle::OracleOutcome;
use gtrs_core::{GtrsOutcome, GtrsProblem};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// An interval end; infinite values are written as the strings `"inf"` and `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Bound(v)),
            Raw::Text(t) if t == "inf" => Ok(Bound(f64::INFINITY)),
            Raw::Text(t) if t == "-inf" => Ok(Bound(f64::NEG_INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad bound '{t}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: String,
    pub n: usize,
    pub case: String,
    pub success: bool,
    pub lambda_star: f64,
    pub q_star: f64,
    pub g_star: f64,
    pub kkt_stationarity: f64,
    pub kkt_feasibility: f64,
    pub kkt_complementarity: f64,
    pub kkt_metric: f64,
    pub kkt_tol: f64,
    pub multiplier_in_interval: bool,
    pub lambda_lower: Option<Bound>,
    pub lambda_upper: Option<Bound>,
    pub hard_case_side: Option<String>,
    pub p_star: Option<f64>,
    pub range_residual: Option<f64>,
    /// g at the minimum-norm endpoint solution.
    pub naive_endpoint_g: Option<f64>,
    /// The test on `naive_endpoint_g` disagrees with the actual hard-case decision.
    pub naive_misclassifies: Option<bool>,
    pub secular_iterations: usize,
    pub secular_status: Option<String>,
    pub refine_steps: usize,
    pub matvecs: u64,
    pub cg_iterations: u64,
    pub diagnostics: Vec<String>,
    pub oracle_ambiguous: Option<bool>,
    pub expected_case: Option<String>,
    pub planted_lambda: Option<f64>,
    pub time_interval_s: f64,
    pub time_hard_case_s: f64,
    pub time_secular_s: f64,
    pub time_refine_s: f64,
    pub time_total_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

fn side_name(s: Side) -> String {
    match s {
        Side::Lower => "lower".into(),
        Side::Upper => "upper".into(),
    }
}

impl RunReport {
    pub fn from_outcome(prob: &GtrsProblem, out: &GtrsOutcome, kkt_tol: f64, with_trace: bool) -> Self {
        let hc = out.hard_case.as_ref();
        let d = &out.diagnostics;
        let mut diagnostics = Vec::new();
        if d.range_borderline {
            diagnostics.push("range_borderline".to_string());
        }
        if d.secular_max_iterations {
            diagnostics.push("secular_max_iterations".to_string());
        }
        if d.constant_phi {
            diagnostics.push("constant_phi".to_string());
        }
        RunReport {
            solver: "gtrs".into(),
            n: prob.n(),
            case: out.case.as_str().into(),
            success: out.success,
            lambda_star: out.lambda_star,
            q_star: out.q_star,
            g_star: prob.eval_g(&out.x_star).unwrap_or(f64::NAN),
            kkt_stationarity: out.kkt.stationarity,
            kkt_feasibility: out.kkt.feasibility,
            kkt_complementarity: out.kkt.complementarity,
            kkt_metric: out.kkt_metric,
            kkt_tol,
            multiplier_in_interval: out.kkt.multiplier_in_interval,
            lambda_lower: out.interval.lower.map(Bound),
            lambda_upper: out.interval.upper.map(Bound),
            hard_case_side: hc.map(|h| side_name(h.side)),
            p_star: hc.and_then(|h| h.p_star),
            range_residual: hc.map(|h| h.range_residual),
            naive_endpoint_g: hc.and_then(|h| h.naive_g),
            naive_misclassifies: hc.and_then(|h| h.naive_is_hard_case_2.map(|n| n != h.is_hard_case_2)),
            secular_iterations: out.secular_iterations,
            secular_status: out.secular_status.map(|s| format!("{s:?}").to_lowercase()),
            refine_steps: out.refine_steps,
            matvecs: out.matvecs,
            cg_iterations: out.cg_iterations,
            diagnostics,
            oracle_ambiguous: None,
            expected_case: None,
            planted_lambda: None,
            time_interval_s: out.timings.interval,
            time_hard_case_s: out.timings.hard_case,
            time_secular_s: out.timings.secular,
            time_refine_s: out.timings.refine,
            time_total_s: out.timings.total,
            trace: with_trace.then(|| out.trace.clone()),
        }
    }

    pub fn from_oracle(
        prob: &GtrsProblem,
        out: &OracleOutcome,
        kkt_tol: f64,
        seconds: f64,
    ) -> Result<Self, CliError> {
        let kkt = kkt_residual(prob, &out.x_star, out.lambda_star, (out.lower, out.upper))?;
        let metric = kkt.metric(out.case.is_boundary());
        let side = if out.case.is_hard_case_2() || out.p_star.is_some() {
            Some(if out.lambda_star <= prob.lambda_hat { "lower" } else { "upper" }.to_string())
        } else {
            None
        };
        Ok(RunReport {
            solver: "oracle".into(),
            n: prob.n(),
            case: out.case.as_str().into(),
            success: metric < kkt_tol && kkt.multiplier_in_interval,
            lambda_star: out.lambda_star,
            q_star: out.q_star,
            g_star: out.g_star,
            kkt_stationarity: kkt.stationarity,
            kkt_feasibility: kkt.feasibility,
            kkt_complementarity: kkt.complementarity,
            kkt_metric: metric,
            kkt_tol,
            multiplier_in_interval: kkt.multiplier_in_interval,
            lambda_lower: Some(Bound(out.lower)),
            lambda_upper: Some(Bound(out.upper)),
            hard_case_side: side,
            p_star: out.p_star,
            range_residual: None,
            naive_endpoint_g: None,
            naive_misclassifies: None,
            secular_iterations: 0,
            secular_status: None,
            refine_steps: 0,
            matvecs: 0,
            cg_iterations: 0,
            diagnostics: Vec::new(),
            oracle_ambiguous: Some(out.ambiguous),
            expected_case: None,
            planted_lambda: None,
            time_interval_s: 0.0,
            time_hard_case_s: 0.0,
            time_secular_s: 0.0,
            time_refine_s: 0.0,
            time_total_s: seconds,
            trace: None,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report with every timing field zeroed, for comparisons across runs.
    pub fn without_timings(&self) -> Self {
        RunReport {
            time_interval_s: 0.0,
            time_hard_case_s: 0.0,
            time_secular_s: 0.0,
            time_refine_s: 0.0,
            time_total_s: 0.0,
            ..self.clone()
        }
    }

    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.12e}"));
        let bound = |v: Option<Bound>| v.map_or("-".to_string(), |b| format!("{:.12e}", b.0));
        let mut rows: Vec<(&str, String)> = vec![
            ("solver", self.solver.clone()),
            ("n", self.n.to_string()),
            ("case", self.case.clone()),
            ("success", self.success.to_string()),
            ("lambda_star", format!("{:.12e}", self.lambda_star)),
            ("q_star", format!("{:.12e}", self.q_star)),
            ("g_star", format!("{:.3e}", self.g_star)),
            ("kkt_stationarity", format!("{:.3e}", self.kkt_stationarity)),
            ("kkt_feasibility", format!("{:.3e}", self.kkt_feasibility)),
            ("kkt_complementarity", format!("{:.3e}", self.kkt_complementarity)),
            ("kkt_metric", format!("{:.3e} (tol {:.1e})", self.kkt_metric, self.kkt_tol)),
            ("lambda_lower", bound(self.lambda_lower)),
            ("lambda_upper", bound(self.lambda_upper)),
        ];
        if let Some(side) = &self.hard_case_side {
            rows.push(("hard_case_side", side.clone()));
            rows.push(("p_star", opt(self.p_star)));
        }
        if self.naive_endpoint_g.is_some() {
            rows.push(("naive_endpoint_g", opt(self.naive_endpoint_g)));
            rows.push((
                "naive_misclassifies",
                self.naive_misclassifies.map_or("-".into(), |b| b.to_string()),
            ));
        }
        if let Some(amb) = self.oracle_ambiguous {
            rows.push(("oracle_ambiguous", amb.to_string()));
        }
        if self.solver == "gtrs" {
            rows.push(("secular_iterations", self.secular_iterations.to_string()));
            rows.push(("matvecs", self.matvecs.to_string()));
            rows.push(("cg_iterations", self.cg_iterations.to_string()));
        }
        if !self.diagnostics.is_empty() {
            rows.push(("diagnostics", self.diagnostics.join(",")));
        }
        rows.push(("time_total_s", format!("{:.4}", self.time_total_s)));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<width$}  {v}");
        }
        s
    }
}
