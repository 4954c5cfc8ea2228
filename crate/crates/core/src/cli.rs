//! The `grasscode` command line.
//!
//! [`run`] parses arguments, dispatches and returns the process exit code:
//! 0 on success (or a passing verification), 1 on a failed verification or
//! a runtime error, 2 on a usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{self, crossover_delta_star, crossover_lp_hamming, emit_rate_table, write_rate_csv};
use crate::format::fmt_sig;
use crate::geometry::validate_dims;
use crate::packing::{bound_report, optimize_restarts, OptimizeOptions};
use crate::verify;
use crate::volume::{exponent_trace_point, write_trace_csv, Estimator};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "grasscode", version, about = "Codes in the real Grassmannian under the chordal metric")]
pub struct Cli {
    /// Worker threads; 1 runs everything sequentially. Results do not depend
    /// on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the four asymptotic rate bounds as CSV.
    Bounds(BoundsArgs),
    /// Locate the crossing points of the rate curves.
    Crossover(CrossoverArgs),
    /// Run a randomized verification campaign and print a JSON report.
    Verify(VerifyArgs),
    /// Trace the normalized log ball mass along a list of dimensions.
    Volume(VolumeArgs),
    /// Search for a good packing and report it against the bounds.
    Pack(PackArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub k: usize,
    /// Smallest delta; defaults to `sqrt(k) / steps`.
    #[arg(long)]
    pub delta_min: Option<f64>,
    /// Largest delta; defaults to `sqrt(k)`.
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    RankinLp,
    LpHamming,
    Both,
}

#[derive(Debug, Args)]
pub struct CrossoverArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Which::Both)]
    pub which: Which,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Isometry,
    Density,
    RankinIneq,
    Counting,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Defaults: isometry 1000, density 100, rankin-ineq 100, counting 50.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Monte-Carlo samples per code (counting suite only).
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Direct,
    Rescaled,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// `rho / r`, in (0, 1).
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Rescaled)]
    pub estimator: EstimatorArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    #[arg(long = "M")]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = OptimizeOptions::default().iterations)]
    pub iterations: usize,
    /// Code file (plain-text plane format).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
    /// The command ran but a check did not pass; its output is already written.
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    // output is buffered so the pool closure stays Send
    let mut buf = Vec::new();
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be positive".into())),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, &mut buf)),
            Err(e) => Err(Failure::Runtime(e.to_string())),
        },
        None => dispatch(&cli, &mut buf),
    };
    if let Err(e) = stdout.write_all(&buf).and_then(|_| stdout.flush()) {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_FAILURE;
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Check) => EXIT_FAILURE,
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_FAILURE
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "usage error: {msg}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut Vec<u8>) -> Result<(), Failure> {
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a, stdout),
        Command::Crossover(a) => cmd_crossover(a, stdout),
        Command::Verify(a) => cmd_verify(a, cli.seed, stdout),
        Command::Volume(a) => cmd_volume(a, cli.seed, stdout),
        Command::Pack(a) => cmd_pack(a, cli.seed, stdout),
    }
}

/// Writes to `path` if given, otherwise to `stdout`.
fn with_output(path: Option<&Path>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(stdout)?,
    }
    Ok(())
}

fn envelope(seed: u64, parameters: Value, results: impl Serialize) -> Result<Value, Failure> {
    let mut results = serde_json::to_value(results).map_err(|e| Failure::Runtime(e.to_string()))?;
    round_floats(&mut results);
    Ok(json!({
        "tool_version": TOOL_VERSION,
        "seed": seed,
        "parameters": parameters,
        "results": results,
    }))
}

/// Rounds every non-integer number to `REPORT_DIGITS` significant digits.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = fmt_sig(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn write_json(path: Option<&Path>, stdout: &mut dyn Write, value: &Value) -> Result<(), Failure> {
    with_output(path, stdout, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

fn cmd_bounds(a: &BoundsArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    if a.k == 0 {
        return Err(Failure::Usage("--k must be positive".into()));
    }
    if a.steps == 0 {
        return Err(Failure::Usage("--steps must be positive".into()));
    }
    let top = (a.k as f64).sqrt();
    let hi = a.delta_max.unwrap_or(top);
    let lo = a.delta_min.unwrap_or(top / a.steps as f64);
    for (name, v) in [("--delta-min", lo), ("--delta-max", hi)] {
        if !(v > 0.0 && v <= top * (1.0 + bounds::DIAMETER_SLACK)) {
            return Err(Failure::Usage(format!("{name} = {v} outside (0, sqrt {}] = (0, {top}]", a.k)));
        }
    }
    if lo > hi {
        return Err(Failure::Usage(format!("--delta-min {lo} exceeds --delta-max {hi}")));
    }
    let table = emit_rate_table(a.k, &linspace(lo, hi, a.steps)).map_err(usage)?;
    with_output(a.out.as_deref(), stdout, |w| write_rate_csv(w, &table))
}

fn cmd_crossover(a: &CrossoverArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    if let Some(k) = a.k.iter().find(|&&k| k < 2) {
        return Err(Failure::Usage(format!("no crossing is defined for k = {k}; need k >= 2")));
    }
    let cell = |r: crate::Result<f64>, failed: &mut bool| match r {
        Ok(v) => fmt_sig(v),
        Err(Error::NoRoot { .. }) => {
            *failed = true;
            "noroot".to_string()
        }
        Err(e) => {
            *failed = true;
            format!("error: {e}")
        }
    };
    let mut failed = false;
    let mut lines = Vec::new();
    let header = match a.which {
        Which::RankinLp => "k,delta_star",
        Which::LpHamming => "k,lp_hamming",
        Which::Both => "k,delta_star,lp_hamming",
    };
    lines.push(header.to_string());
    for &k in &a.k {
        let mut row = vec![k.to_string()];
        if a.which != Which::LpHamming {
            row.push(cell(crossover_delta_star(k), &mut failed));
        }
        if a.which != Which::RankinLp {
            row.push(cell(crossover_lp_hamming(k), &mut failed));
        }
        lines.push(row.join(","));
    }
    with_output(a.out.as_deref(), stdout, |w| lines.iter().try_for_each(|l| writeln!(w, "{l}")))?;
    if failed {
        Err(Failure::Check)
    } else {
        Ok(())
    }
}

fn cmd_verify(a: &VerifyArgs, seed: u64, stdout: &mut dyn Write) -> Result<(), Failure> {
    let trials = a.trials.unwrap_or(match a.suite {
        Suite::Isometry => 1000,
        Suite::Density | Suite::RankinIneq => 100,
        Suite::Counting => 50,
    });
    if trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let (suite, results, passed) = match a.suite {
        Suite::Isometry => {
            let r = verify::verify_isometry(trials, seed)?;
            let passed = r.passed;
            ("isometry", serde_json::to_value(r), passed)
        }
        Suite::Density => {
            let (r, passed) = verify::verify_total_density(trials, seed)?;
            ("density", serde_json::to_value(json!({ "report": r, "passed": passed })), passed)
        }
        Suite::RankinIneq => {
            let r = verify::verify_rankin_inequality(trials, seed)?;
            let passed = r.passed;
            ("rankin-ineq", serde_json::to_value(r), passed)
        }
        Suite::Counting => {
            if a.samples < crate::volume::MIN_SAMPLES {
                return Err(Failure::Usage(format!("--samples must be at least {}", crate::volume::MIN_SAMPLES)));
            }
            let (summary, codes) = verify::verify_counting(trials, a.samples, seed)?;
            let passed = summary.passed;
            ("counting", serde_json::to_value(json!({ "summary": summary, "codes": codes, "passed": passed })), passed)
        }
    };
    let results = results.map_err(|e| Failure::Runtime(e.to_string()))?;
    let params = json!({ "suite": suite, "trials": trials, "samples": a.samples });
    write_json(a.out.as_deref(), stdout, &envelope(seed, params, results)?)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn cmd_volume(a: &VolumeArgs, seed: u64, stdout: &mut dyn Write) -> Result<(), Failure> {
    if !(a.ratio > 0.0 && a.ratio < 1.0) {
        return Err(Failure::Usage(format!("--ratio {} outside (0, 1)", a.ratio)));
    }
    if a.samples < crate::volume::MIN_SAMPLES {
        return Err(Failure::Usage(format!("--samples must be at least {}", crate::volume::MIN_SAMPLES)));
    }
    for &n in &a.n {
        validate_dims(a.k, n, false).map_err(usage)?;
        if 2 * a.k >= n {
            return Err(Failure::Usage(format!("--n {n} must exceed 2k = {}", 2 * a.k)));
        }
    }
    let estimator = match a.estimator {
        EstimatorArg::Direct => Estimator::Direct,
        EstimatorArg::Rescaled => Estimator::Rescaled,
    };
    let rows = a
        .n
        .iter()
        .map(|&n| exponent_trace_point(a.ratio, a.k, n, a.samples, estimator, seed))
        .collect::<crate::Result<Vec<_>>>()?;
    with_output(a.out.as_deref(), stdout, |w| write_trace_csv(w, &rows))
}

fn cmd_pack(a: &PackArgs, seed: u64, stdout: &mut dyn Write) -> Result<(), Failure> {
    validate_dims(a.k, a.n, false).map_err(usage)?;
    if a.m < 2 {
        return Err(Failure::Usage("--M must be at least 2".into()));
    }
    if a.restarts == 0 || a.iterations == 0 {
        return Err(Failure::Usage("--restarts and --iterations must be positive".into()));
    }
    let opts = OptimizeOptions { iterations: a.iterations, ..Default::default() };
    let outcome = optimize_restarts(a.m, a.k, a.n, a.restarts, &opts, seed)?;
    let code = &outcome.best.code;
    if let Some(path) = &a.out {
        with_output(Some(path), stdout, |w| code.write_text(w))?;
    }
    let params = json!({
        "M": a.m,
        "k": a.k,
        "n": a.n,
        "restarts": a.restarts,
        "iterations": a.iterations,
        "optimizer": opts,
    });
    let results = json!({
        "report": bound_report(code),
        "best_restart": outcome.best_restart,
        "per_restart_delta_sq": outcome.per_restart,
        "converged": outcome.best.converged,
    });
    write_json(a.report.as_deref(), stdout, &envelope(seed, params, results)?)
}
