use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gtrs_core::oracle::dense_solve;
use gtrs_core::probgen::{generate, CaseKind, ClassKind, GenSpec};
use gtrs_core::{solve, SolverConfig};

use crate::bench::{run_bench, BenchPlan};
use crate::bundle::{write_bundle, BundleSource, GeneratorInfo, Manifest, ProblemBundle};
use crate::error::{CliError, EXIT_INPUT, EXIT_OK, EXIT_TOLERANCE};
use crate::mm;
use crate::report::RunReport;

#[derive(Debug, Parser)]
#[command(name = "gtrs", version, about = "Large-scale generalized trust-region subproblem solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem bundle with the matrix-free solver.
    Solve(SolveArgs),
    /// Generate a random test problem bundle.
    Generate(GenerateArgs),
    /// Run a benchmark sweep over generated problems.
    Bench(BenchArgs),
    /// Solve a small bundle with the dense reference solver.
    Oracle(OracleArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct BundleArgs {
    /// Manifest file, or a directory containing manifest.json.
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub a_matrix: Option<PathBuf>,
    #[arg(long)]
    pub b_matrix: Option<PathBuf>,
    #[arg(long)]
    pub a_vector: Option<PathBuf>,
    #[arg(long)]
    pub b_vector: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda_hat: Option<f64>,
}

impl BundleArgs {
    fn source(&self) -> BundleSource {
        BundleSource {
            manifest: self.manifest.clone(),
            a_matrix: self.a_matrix.clone(),
            b_matrix: self.b_matrix.clone(),
            a_vector: self.a_vector.clone(),
            b_vector: self.b_vector.clone(),
            beta: self.beta,
            lambda_hat: self.lambda_hat,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Write the machine-readable report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the machine-readable report on standard output instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub bundle: BundleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_kkt: f64,
    #[arg(long, default_value_t = 1e-11)]
    pub tol_width: f64,
    /// Iteration budget of the secular root finder.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Seed of the eigensolver start vectors.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use fixed quasi-random eigensolver start vectors instead of a seeded generator.
    #[arg(long, conflicts_with = "seed")]
    pub seedless: bool,
    /// Plain bisection in the secular phase.
    #[arg(long)]
    pub no_accelerate: bool,
    /// Write x* as a Matrix Market array vector.
    #[arg(long)]
    pub x_out: Option<PathBuf>,
    /// Include the evaluation trace in the machine-readable report.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args, Clone)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    /// Off-diagonal density; defaults to min(1, 10/n).
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub cond: f64,
    #[arg(long, default_value = "easy")]
    pub case: CaseKind,
    #[arg(long, default_value = "1")]
    pub class: ClassKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use B = I instead of a random B.
    #[arg(long)]
    pub identity_constraint: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// A comma-separated flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn parse_list<T>(s: &str) -> Result<List<T>, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<Vec<T>, String>>()
        .map(List)
}

#[derive(Debug, Args, Clone)]
pub struct BenchArgs {
    /// Comma-separated; an empty list gives an empty sweep.
    #[arg(long, value_parser = parse_list::<usize>, default_value = "100")]
    pub sizes: List<usize>,
    #[arg(long, value_parser = parse_list::<f64>, default_value = "10")]
    pub conds: List<f64>,
    #[arg(long, value_parser = parse_list::<CaseKind>, default_value = "easy,hard1,hard2")]
    pub cases: List<CaseKind>,
    #[arg(long, value_parser = parse_list::<ClassKind>, default_value = "1,2")]
    pub classes: List<ClassKind>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Off-diagonal density; defaults to min(1, 10/n) per size.
    #[arg(long)]
    pub density: Option<f64>,
    /// Largest size checked against the dense reference solver.
    #[arg(long, default_value_t = 500)]
    pub oracle_max_n: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_kkt: f64,
    /// Write the machine-readable results here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct OracleArgs {
    #[command(flatten)]
    pub bundle: BundleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_kkt: f64,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Generate(a) => cmd_generate(&a).map(|_| EXIT_OK),
        Command::Bench(a) => cmd_bench(&a),
        Command::Oracle(a) => cmd_oracle(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn solver_config(args: &SolveArgs) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    cfg.secular.kkt_tol = args.tol_kkt;
    cfg.secular.width_tol = args.tol_width;
    cfg.secular.accelerate = !args.no_accelerate;
    if let Some(m) = args.max_iter {
        cfg.secular.max_iters = m;
    }
    if let Some(s) = args.seed {
        cfg.eig.seed = s;
    }
    cfg.eig.seedless = args.seedless;
    cfg
}

fn load(args: &BundleArgs) -> Result<ProblemBundle, CliError> {
    let bundle = ProblemBundle::load(&args.source())?;
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
    Ok(bundle)
}

fn emit(report: &RunReport, output: &OutputArgs) -> Result<(), CliError> {
    let json = report.to_json();
    if let Some(path) = &output.out {
        fs::write(path, &json).map_err(|e| CliError::io(path, e))?;
    }
    let text = if output.json { json } else { report.table() };
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes());
    Ok(())
}

pub fn solve_report(args: &SolveArgs) -> Result<(RunReport, Vec<f64>), CliError> {
    let bundle = load(&args.bundle)?;
    let cfg = solver_config(args);
    let out = solve(&bundle.problem, &cfg)?;
    let mut report = RunReport::from_outcome(&bundle.problem, &out, args.tol_kkt, args.trace);
    report.expected_case = bundle.expected_case.clone();
    report.planted_lambda = bundle.planted_lambda;
    Ok((report, out.x_star))
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let (report, x) = solve_report(args)?;
    if let Some(path) = &args.x_out {
        mm::write_vector(path, &x)?;
    }
    emit(&report, &args.output)?;
    Ok(if report.success { EXIT_OK } else { EXIT_TOLERANCE })
}

pub fn oracle_report(args: &OracleArgs) -> Result<RunReport, CliError> {
    let bundle = load(&args.bundle)?;
    let start = Instant::now();
    let out = dense_solve(&bundle.problem)?;
    let mut report = RunReport::from_oracle(&bundle.problem, &out, args.tol_kkt, start.elapsed().as_secs_f64())?;
    report.expected_case = bundle.expected_case.clone();
    report.planted_lambda = bundle.planted_lambda;
    Ok(report)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<i32, CliError> {
    let report = oracle_report(args)?;
    emit(&report, &args.output)?;
    Ok(if report.success { EXIT_OK } else { EXIT_TOLERANCE })
}

pub fn default_density(n: usize) -> f64 {
    (10.0 / n as f64).min(1.0)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Manifest, CliError> {
    let density = args.density.unwrap_or_else(|| default_density(args.n));
    let mut recipe = GenSpec::new(args.n, density, args.cond, args.case, args.class, args.seed);
    recipe.identity_constraint = args.identity_constraint;
    let art = generate(&recipe)?;
    if art.density_raised {
        eprintln!("warning: density {density:e} is below the minimum for n = {}; raised", args.n);
    }
    let mut manifest = Manifest::standard();
    manifest.seed = Some(args.seed);
    manifest.expected_case = Some(art.expected_case.as_str().to_string());
    manifest.planted_lambda = Some(art.planted_lambda);
    manifest.generator = Some(GeneratorInfo {
        n: args.n,
        density,
        cond: args.cond,
        class: args.class.number(),
        identity_constraint: args.identity_constraint,
        retries: art.retries,
        density_raised: art.density_raised,
    });
    write_bundle(&args.out_dir, &art.problem, manifest)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32, CliError> {
    let plan = BenchPlan {
        sizes: args.sizes.0.clone(),
        conds: args.conds.0.clone(),
        cases: args.cases.0.clone(),
        classes: args.classes.0.clone(),
        reps: args.reps,
        density: args.density,
        oracle_max_n: args.oracle_max_n,
        jobs: args.jobs,
        seed: args.seed,
        kkt_tol: args.tol_kkt,
    };
    let result = run_bench(&plan)?;
    if let Some(path) = &args.out {
        write_text(path, &result.to_json())?;
    }
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(result.table().as_bytes());
    Ok(EXIT_OK)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
