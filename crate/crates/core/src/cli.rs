//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 solver non-convergence, 4 divergence support violation.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity_bounds::{capacity_lower_bound, CapacityReport};
use crate::channel::{beta_binomial_reference, chi2_divergence, induced_output, DiscreteInput};
use crate::error::{Error, Result};
use crate::orthopoly::parseval_chi2;
use crate::solver::{blahut_arimoto, kkt_check, SolverConfig, SolverResult};
use crate::support_bounds::{
    support_size_lower_bound, symbolic_support_bound, SupportBoundRow, SymbolicSupportReport,
};
use crate::verify::{self, CheckRow, Fault, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_SUPPORT_VIOLATION: i32 = 4;

/// Points scanned by the KKT check printed after a solve.
const SOLVE_KKT_GRID: usize = 10_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "binomcap",
    version,
    about = "Capacity bounds, numerical capacity and support-size bounds for the binomial channel",
    after_help = "CSV floats carry 17 significant digits; absent values are empty fields.\n\
                  Random cases use ChaCha8 streams keyed by (seed, suite, case index)."
)]
pub struct RunConfig {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form capacity bounds for one n or a range.
    #[command(after_help = "CSV columns: n,lb,ub,r_lb,r_ub,gap,gap_cap,asymptote,ba_estimate")]
    Bounds(BoundsArgs),
    /// Numerical capacity of one block length.
    #[command(after_help = "JSON writes the full solver result. \
        CSV columns: n,lb,ub,r_lb,r_ub,gap,gap_cap,asymptote,ba_estimate")]
    Solve(SolveArgs),
    /// Chi-square divergence of an input's output law from the Beta-binomial reference.
    #[command(after_help = "CSV columns: n,direct,parseval,difference")]
    Chi2(Chi2Args),
    /// Lower bound on the support size of a capacity-achieving input.
    #[command(after_help = "CSV columns with --n: \
        n,c_star,zeta_value,u_n,alpha_n,two,exp_capacity,loglog_term,final_bound\n\
        CSV columns with --log-n: \
        log_n,log_arg,u_n,alpha_n,u_n_below_quarter,above_sufficient_threshold,log_loglog_term")]
    SupportBound(SupportBoundArgs),
    /// Run property suites; exits 1 if any check fails.
    #[command(after_help = "CSV columns: suite,check,cases,failures,worst_excess,passed")]
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, conflicts_with_all = ["n_start", "n_stop"], required_unless_present = "n_start")]
    pub n: Option<u64>,
    #[arg(long, requires = "n_stop")]
    pub n_start: Option<u64>,
    #[arg(long, requires = "n_start")]
    pub n_stop: Option<u64>,
    /// Arithmetic step of the range.
    #[arg(long, conflicts_with = "log_count")]
    pub n_step: Option<u64>,
    /// Number of log-spaced points (rounded and deduplicated) in the range.
    #[arg(long)]
    pub log_count: Option<usize>,
    /// Add the numerical capacity at default solver settings.
    #[arg(long)]
    pub ba: bool,
}

#[derive(Debug, Args, Default)]
pub struct SolverOverrides {
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub support_threshold: Option<f64>,
    #[arg(long)]
    pub cluster_radius: Option<f64>,
}

impl SolverOverrides {
    pub fn apply(&self, n: u64) -> Result<SolverConfig> {
        let mut c = SolverConfig::for_n(n);
        if let Some(v) = self.grid {
            c.grid_size = v;
        }
        if let Some(v) = self.tol {
            c.tolerance = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iterations = v;
        }
        if let Some(v) = self.support_threshold {
            c.support_threshold = v;
        }
        if let Some(v) = self.cluster_radius {
            c.cluster_radius = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub n: u64,
    #[command(flatten)]
    pub overrides: SolverOverrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Chi2Mode {
    Direct,
    Parseval,
    Both,
}

#[derive(Debug, Args)]
pub struct Chi2Args {
    /// Input distribution as `{"atoms": [{"x": .., "p": ..}, ..]}`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = Chi2Mode::Both)]
    pub mode: Chi2Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapacitySource {
    /// The closed-form lower bound.
    Lb,
    /// The numerical capacity.
    Ba,
}

#[derive(Debug, Args)]
pub struct SupportBoundArgs {
    #[arg(long, required_unless_present = "log_n", conflicts_with = "log_n")]
    pub n: Option<u64>,
    /// Natural log of n, for n too large to represent.
    #[arg(long, allow_negative_numbers = true)]
    pub log_n: Option<f64>,
    #[arg(long, value_enum, default_value_t = CapacitySource::Lb)]
    pub capacity_source: CapacitySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    CorruptHkNorm,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    pub suite: Suite,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Chi-square values printed by `chi2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Report {
    pub n: u64,
    pub direct: Option<f64>,
    pub parseval: Option<f64>,
    pub difference: Option<f64>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

/// Fixed-column CSV rendering.
pub trait CsvRecord {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

impl CsvRecord for CapacityReport {
    const HEADER: &'static [&'static str] =
        &["n", "lb", "ub", "r_lb", "r_ub", "gap", "gap_cap", "asymptote", "ba_estimate"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            float(self.lb),
            opt_float(self.ub),
            float(self.r_lb),
            opt_float(self.r_ub),
            opt_float(self.gap),
            opt_float(self.gap_cap),
            float(self.asymptote),
            opt_float(self.ba_estimate),
        ]
    }
}

impl CsvRecord for Chi2Report {
    const HEADER: &'static [&'static str] = &["n", "direct", "parseval", "difference"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            opt_float(self.direct),
            opt_float(self.parseval),
            opt_float(self.difference),
        ]
    }
}

impl CsvRecord for SupportBoundRow {
    const HEADER: &'static [&'static str] = &[
        "n",
        "c_star",
        "zeta_value",
        "u_n",
        "alpha_n",
        "two",
        "exp_capacity",
        "loglog_term",
        "final_bound",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            float(self.c_star),
            float(self.zeta_value),
            opt_float(self.u_n),
            opt_float(self.alpha_n),
            float(self.two),
            float(self.exp_capacity),
            float(self.loglog_term),
            self.final_bound.to_string(),
        ]
    }
}

impl CsvRecord for SymbolicSupportReport {
    const HEADER: &'static [&'static str] = &[
        "log_n",
        "log_arg",
        "u_n",
        "alpha_n",
        "u_n_below_quarter",
        "above_sufficient_threshold",
        "log_loglog_term",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            float(self.log_n),
            float(self.log_arg),
            float(self.u_n),
            float(self.alpha_n),
            self.u_n_below_quarter.to_string(),
            self.above_sufficient_threshold.to_string(),
            opt_float(self.log_loglog_term),
        ]
    }
}

impl CsvRecord for CheckRow {
    const HEADER: &'static [&'static str] =
        &["suite", "check", "cases", "failures", "worst_excess", "passed"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.suite.to_string(),
            self.check.clone(),
            self.cases.to_string(),
            self.failures.to_string(),
            opt_float(self.worst_excess),
            self.passed.to_string(),
        ]
    }
}

fn csv_bytes<R: CsvRecord>(rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(R::HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Render rows as CSV or as a JSON array.
fn render_rows<R: CsvRecord + Serialize>(format: Format, rows: &[R]) -> Result<Vec<u8>> {
    match format {
        Format::Json => json_bytes(rows),
        Format::Csv => csv_bytes(rows),
    }
}

/// Render a single record as CSV or as a JSON object.
fn render_one<R: CsvRecord + Serialize>(format: Format, row: &R) -> Result<Vec<u8>> {
    match format {
        Format::Json => json_bytes(row),
        Format::Csv => csv_bytes(std::slice::from_ref(row)),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

/// Lines meant for a human, kept off stdout when stdout carries the report.
fn note(cfg: &RunConfig, line: &str) {
    if cfg.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

/// The `n` values of a `bounds` invocation.
pub fn bounds_grid(args: &BoundsArgs) -> Result<Vec<u64>> {
    if let Some(n) = args.n {
        if n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        return Ok(vec![n]);
    }
    let (start, stop) = match (args.n_start, args.n_stop) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Config("give --n or both --n-start and --n-stop".into())),
    };
    if start == 0 || stop < start {
        return Err(Error::Config(format!("invalid range {start}..={stop}")));
    }
    if let Some(count) = args.log_count {
        if count == 0 || (count == 1 && start != stop) {
            return Err(Error::Config(format!("log count {count} too small for the range")));
        }
        let (la, lb) = ((start as f64).ln(), (stop as f64).ln());
        let mut ns: Vec<u64> = (0..count)
            .map(|i| {
                let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                ((la + t * (lb - la)).exp().round() as u64).clamp(start, stop)
            })
            .collect();
        ns.dedup();
        return Ok(ns);
    }
    let step = args.n_step.unwrap_or(1);
    if step == 0 {
        return Err(Error::Config("n step must be positive".into()));
    }
    Ok((start..=stop).step_by(step as usize).collect())
}

fn cmd_bounds(cfg: &RunConfig, args: &BoundsArgs) -> Result<i32> {
    let ns = bounds_grid(args)?;
    let rows: Vec<CapacityReport> = ns
        .par_iter()
        .map(|&n| {
            let r = CapacityReport::new(n)?;
            if args.ba {
                let s = blahut_arimoto(n, &SolverConfig::for_n(n))?;
                return Ok(r.with_ba_estimate(s.capacity_estimate));
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    emit(cfg.out.as_deref(), &render_rows(cfg.format, &rows)?)?;
    Ok(EXIT_OK)
}

fn cmd_solve(cfg: &RunConfig, args: &SolveArgs) -> Result<i32> {
    if args.n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let config = args.overrides.apply(args.n)?;
    let result: SolverResult = blahut_arimoto(args.n, &config)?;
    let bytes = match cfg.format {
        Format::Json => json_bytes(&result)?,
        Format::Csv => {
            let row = CapacityReport::new(args.n)?.with_ba_estimate(result.capacity_estimate);
            csv_bytes(&[row])?
        }
    };
    emit(cfg.out.as_deref(), &bytes)?;
    let kkt = kkt_check(&result, args.n, SOLVE_KKT_GRID, config.tolerance)?;
    note(cfg, &format!("capacity_estimate {:.16e}", result.capacity_estimate));
    note(cfg, &format!("duality_gap {:.3e}", result.duality_gap));
    note(cfg, &format!("kkt_max_violation {:.3e}", kkt.max_violation));
    let support: Vec<String> = result
        .extracted_support
        .iter()
        .map(|c| format!("({:.6}, {:.6})", c.center, c.mass))
        .collect();
    note(cfg, &format!("support {}", support.join(" ")));
    if !result.converged {
        note(cfg, "solver did not converge");
        return Ok(EXIT_NON_CONVERGENCE);
    }
    Ok(EXIT_OK)
}

fn cmd_chi2(cfg: &RunConfig, args: &Chi2Args) -> Result<i32> {
    let text = std::fs::read_to_string(&args.input)?;
    let input: DiscreteInput = serde_json::from_str(&text)?;
    let n = args.n;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let want_direct = args.mode != Chi2Mode::Parseval;
    let want_series = args.mode != Chi2Mode::Direct;
    let direct = if want_direct {
        Some(chi2_divergence(&induced_output(&input, n)?, &beta_binomial_reference(n))?)
    } else {
        None
    };
    let parseval = if want_series {
        Some(parseval_chi2(&input, n, n as usize)?)
    } else {
        None
    };
    let difference = direct.zip(parseval).map(|(a, b)| (a - b).abs());
    let report = Chi2Report {
        n,
        direct,
        parseval,
        difference,
    };
    emit(cfg.out.as_deref(), &render_one(cfg.format, &report)?)?;
    Ok(EXIT_OK)
}

fn cmd_support_bound(cfg: &RunConfig, args: &SupportBoundArgs) -> Result<i32> {
    let bytes = match (args.n, args.log_n) {
        (_, Some(log_n)) => render_one(cfg.format, &symbolic_support_bound(log_n)?)?,
        (Some(n), None) => {
            if n == 0 {
                return Err(Error::Config("n must be at least 1".into()));
            }
            let capacity = match args.capacity_source {
                CapacitySource::Lb => capacity_lower_bound(n)?,
                CapacitySource::Ba => {
                    let r = blahut_arimoto(n, &SolverConfig::for_n(n))?;
                    if !r.converged {
                        note(cfg, "solver did not converge");
                        return Ok(EXIT_NON_CONVERGENCE);
                    }
                    r.capacity_estimate
                }
            };
            let report = support_size_lower_bound(n, capacity)?;
            match cfg.format {
                Format::Json => json_bytes(&report)?,
                Format::Csv => csv_bytes(&[SupportBoundRow::from(&report)])?,
            }
        }
        (None, None) => return Err(Error::Config("give --n or --log-n".into())),
    };
    emit(cfg.out.as_deref(), &bytes)?;
    Ok(EXIT_OK)
}

fn cmd_verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<i32> {
    let options = VerifyOptions {
        seed: cfg.seed,
        fault: args.inject_fault.map(|FaultArg::CorruptHkNorm| Fault::CorruptHkNorm),
    };
    let report = verify::run(args.suite, &options);
    let bytes = match cfg.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => csv_bytes(&report.rows())?,
    };
    emit(cfg.out.as_deref(), &bytes)?;
    for (suite, check) in report.failing_checks() {
        eprintln!("FAILED {suite}/{check}");
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFICATION })
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SupportViolation { .. } => EXIT_SUPPORT_VIOLATION,
        _ => EXIT_USAGE,
    }
}

/// Execute a parsed configuration and return the process exit code.
pub fn execute(cfg: &RunConfig) -> i32 {
    let outcome = match &cfg.command {
        Command::Bounds(a) => cmd_bounds(cfg, a),
        Command::Solve(a) => cmd_solve(cfg, a),
        Command::Chi2(a) => cmd_chi2(cfg, a),
        Command::SupportBound(a) => cmd_support_bound(cfg, a),
        Command::Verify(a) => cmd_verify(cfg, a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parse `args` (including the program name) and execute.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(cfg) => execute(&cfg),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}
