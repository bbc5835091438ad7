//! Benchmark sweeps over generated problems.

use std::fmt::Write as _;
use std::time::Instant;

use gtrs_core::oracle::{accuracy, dense_solve};
use gtrs_core::probgen::{generate, CaseKind, ClassKind, GenSpec};
use gtrs_core::{solve, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::default_density;
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub sizes: Vec<usize>,
    pub conds: Vec<f64>,
    pub cases: Vec<CaseKind>,
    pub classes: Vec<ClassKind>,
    pub reps: usize,
    pub density: Option<f64>,
    pub oracle_max_n: usize,
    pub jobs: usize,
    pub seed: u64,
    pub kkt_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The dense solver.
    Oracle,
    /// The better objective among the default and unaccelerated solves.
    Variants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub n: usize,
    pub cond: f64,
    pub case_kind: CaseKind,
    pub class: u8,
    pub rep: usize,
    pub seed: u64,
    pub reference: Reference,
    pub case: Option<String>,
    pub reference_case: Option<String>,
    pub reference_ambiguous: bool,
    pub accuracy: Option<f64>,
    pub kkt_metric: Option<f64>,
    pub success: bool,
    pub secular_iterations: usize,
    pub matvecs: u64,
    pub error: Option<String>,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub cond: f64,
    pub case_kind: CaseKind,
    pub class: u8,
    pub reps: usize,
    pub failures: usize,
    pub case_mismatches: usize,
    pub mean_accuracy: Option<f64>,
    pub max_abs_accuracy: Option<f64>,
    pub mean_secular_iterations: f64,
    pub mean_matvecs: f64,
    pub time_mean_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub cells: Vec<CellSummary>,
    pub instances: Vec<InstanceResult>,
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn instance_seed(base: u64, n: usize, cond: f64, case: CaseKind, class: ClassKind, rep: usize) -> u64 {
    let case_idx = CaseKind::ALL.iter().position(|c| *c == case).unwrap_or(0) as u64;
    [n as u64, cond.to_bits(), case_idx, class.number() as u64, rep as u64]
        .iter()
        .fold(mix(base), |h, v| mix(h ^ v))
}

struct Job {
    n: usize,
    cond: f64,
    case: CaseKind,
    class: ClassKind,
    rep: usize,
}

fn run_one(plan: &BenchPlan, job: &Job) -> InstanceResult {
    let seed = instance_seed(plan.seed, job.n, job.cond, job.case, job.class, job.rep);
    let reference = if job.n <= plan.oracle_max_n {
        Reference::Oracle
    } else {
        Reference::Variants
    };
    let mut res = InstanceResult {
        n: job.n,
        cond: job.cond,
        case_kind: job.case,
        class: job.class.number(),
        rep: job.rep,
        seed,
        reference,
        case: None,
        reference_case: None,
        reference_ambiguous: false,
        accuracy: None,
        kkt_metric: None,
        success: false,
        secular_iterations: 0,
        matvecs: 0,
        error: None,
        time_s: 0.0,
    };
    let density = plan.density.unwrap_or_else(|| default_density(job.n));
    let art = match generate(&GenSpec::new(job.n, density, job.cond, job.case, job.class, seed)) {
        Ok(a) => a,
        Err(e) => {
            res.error = Some(format!("generation: {e}"));
            return res;
        }
    };
    let mut cfg = SolverConfig::default();
    cfg.secular.kkt_tol = plan.kkt_tol;
    let start = Instant::now();
    let out = solve(&art.problem, &cfg);
    res.time_s = start.elapsed().as_secs_f64();
    let out = match out {
        Ok(o) => o,
        Err(e) => {
            res.error = Some(format!("solve: {e}"));
            return res;
        }
    };
    res.case = Some(out.case.as_str().to_string());
    res.kkt_metric = Some(out.kkt_metric);
    res.success = out.success;
    res.secular_iterations = out.secular_iterations;
    res.matvecs = out.matvecs;
    let best = match reference {
        Reference::Oracle => match dense_solve(&art.problem) {
            Ok(o) => {
                res.reference_case = Some(o.case.as_str().to_string());
                res.reference_ambiguous = o.ambiguous;
                o.q_star
            }
            Err(e) => {
                res.error = Some(format!("oracle: {e}"));
                return res;
            }
        },
        Reference::Variants => {
            let mut plain = cfg.clone();
            plain.secular.accelerate = false;
            match solve(&art.problem, &plain) {
                Ok(o) if o.success => {
                    res.reference_case = Some(o.case.as_str().to_string());
                    o.q_star.min(out.q_star)
                }
                _ => out.q_star,
            }
        }
    };
    res.accuracy = Some(accuracy(out.q_star, best).0);
    res
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchResult, CliError> {
    let mut jobs = Vec::new();
    for &n in &plan.sizes {
        for &cond in &plan.conds {
            for &case in &plan.cases {
                for &class in &plan.classes {
                    for rep in 0..plan.reps {
                        jobs.push(Job { n, cond, case, class, rep });
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let instances: Vec<InstanceResult> = pool.install(|| jobs.par_iter().map(|j| run_one(plan, j)).collect());

    let mut cells = Vec::new();
    for chunk in instances.chunk_by(|a, b| (a.n, a.cond.to_bits(), a.case_kind, a.class) == (b.n, b.cond.to_bits(), b.case_kind, b.class)) {
        let first = &chunk[0];
        let acc: Vec<f64> = chunk.iter().filter_map(|r| r.accuracy).collect();
        let k = chunk.len() as f64;
        cells.push(CellSummary {
            n: first.n,
            cond: first.cond,
            case_kind: first.case_kind,
            class: first.class,
            reps: chunk.len(),
            failures: chunk.iter().filter(|r| !r.success || r.error.is_some()).count(),
            case_mismatches: chunk
                .iter()
                .filter(|r| r.reference == Reference::Oracle && !r.reference_ambiguous && r.reference_case.is_some() && r.case != r.reference_case)
                .count(),
            mean_accuracy: (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64),
            max_abs_accuracy: acc.iter().map(|a| a.abs()).reduce(f64::max),
            mean_secular_iterations: chunk.iter().map(|r| r.secular_iterations as f64).sum::<f64>() / k,
            mean_matvecs: chunk.iter().map(|r| r.matvecs as f64).sum::<f64>() / k,
            time_mean_s: chunk.iter().map(|r| r.time_s).sum::<f64>() / k,
        });
    }
    Ok(BenchResult { cells, instances })
}

impl BenchResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bench result serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>7} {:>6} {:>6} {:>5} {:>4} {:>5} {:>9} {:>11} {:>11} {:>7} {:>10}",
            "n", "cond", "case", "class", "reps", "fail", "mismatch", "accuracy", "max|acc|", "iters", "time_s"
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2e}"));
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:>7} {:>6} {:>6} {:>5} {:>4} {:>5} {:>9} {:>11} {:>11} {:>7.1} {:>10.4}",
                c.n,
                c.cond,
                c.case_kind.as_str(),
                c.class,
                c.reps,
                c.failures,
                c.case_mismatches,
                opt(c.mean_accuracy),
                opt(c.max_abs_accuracy),
                c.mean_secular_iterations,
                c.time_mean_s
            );
        }
        s
    }
}
