//! Command-line front end for the strong-approximation toolkit.
//!
//! Six subcommands cover the workflows the library exposes: `simulate`
//! (trajectories), `convergence` (strong-error sweep with an order fit),
//! `moments` (p-th moment sweep), `dominator-check` (per-path domination
//! verification), `benchmark` (error vs wall time), and `dimension-scan`
//! (wall-time scaling across state dimensions).
//!
//! Exit codes: 0 success, 1 usage error (bad flags, bad config file, bad
//! problem/scheme names, unmet grid preconditions), 2 numeric or solver or
//! I/O failure, 3 domination invariant violated.

mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use tamed_sde::bench::{dimension_scaling, error_vs_runtime};
use tamed_sde::brownian::sample_grid;
use tamed_sde::dominator::DominatorTrace;
use tamed_sde::error_analysis::{estimate_order, moment_sweep, strong_error, StrongErrorConfig};
use tamed_sde::model::{make_builtin, SdeProblem};
use tamed_sde::schemes::{run_scheme, Scheme, SolverOptions};
use tamed_sde::SdeError;

use crate::config::Effective;
use crate::output::{fmt_real, CsvDoc};

/// Resolution the convergence report extrapolates the fitted line to.
const EXTRAPOLATION_STEPS: usize = 1 << 16;

/// One subcommand's implementation, run on the merged options.
type Runner = fn(&Effective) -> Result<String, CliError>;

#[derive(Parser)]
#[command(
    name = "tamed-sde",
    version,
    about = "Strong approximation of SDEs with superlinearly growing drift",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths under one scheme and write the trajectories.
    Simulate(RawArgs),
    /// Estimate strong errors over a resolution sweep and fit the order.
    Convergence(RawArgs),
    /// Sweep the maximal p-th moment over resolutions.
    Moments(RawArgs),
    /// Verify the pathwise dominating process on simulated tamed paths.
    DominatorCheck(RawArgs),
    /// Measure wall time and strong error per scheme and resolution.
    Benchmark(RawArgs),
    /// Measure wall-time growth of schemes across state dimensions.
    DimensionScan(RawArgs),
}

/// The shared flag vocabulary; each subcommand requires its own subset and
/// config-file values fill in whatever the command line leaves unset.
#[derive(Args, Debug, Default, Clone)]
struct RawArgs {
    /// Problem label: quintic_gl, cubic_gl, langevin_double_well, or gbm.
    #[arg(long)]
    problem: Option<String>,

    /// Scheme: explicit, tamed, implicit, or implicit-cardano; benchmark and
    /// dimension-scan accept a comma-separated list.
    #[arg(long)]
    scheme: Option<String>,

    /// Grid resolution (steps to the horizon).
    #[arg(long = "N", value_name = "STEPS")]
    steps: Option<usize>,

    /// Strictly ascending comma-separated resolutions, e.g. 16,32,64.
    #[arg(long = "Ns", value_name = "LIST")]
    steps_list: Option<String>,

    /// Reference resolution; must be a multiple of every entry of --Ns.
    #[arg(long = "Nref", value_name = "STEPS")]
    ref_steps: Option<usize>,

    /// Monte Carlo sample size (default 1000; simulate defaults to 1).
    #[arg(long)]
    paths: Option<usize>,

    /// Moment order p >= 1 of the L^p norm (default 2).
    #[arg(long)]
    p: Option<f64>,

    /// Base RNG seed; path i draws from dedicated stream i (default 0).
    #[arg(long)]
    seed: Option<u64>,

    /// State dimension for dimension-parameterised problems; dimension-scan
    /// takes a comma-separated list (default 10,20,40).
    #[arg(long)]
    dim: Option<String>,

    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Also write a gnuplot script next to the CSV.
    #[arg(long = "emit-plot")]
    emit_plot: bool,

    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker-thread count (default: all cores). Numeric output does not
    /// depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

/// Everything that can go wrong, mapped onto the documented exit codes.
#[derive(Debug)]
enum CliError {
    /// Bad flags, config file, names, or unmet preconditions: exit 1.
    Usage(String),
    /// Failures from the toolkit while computing or writing: exit 1 or 2
    /// depending on the variant.
    Lib(SdeError),
    /// The domination invariant failed on at least one path: exit 3.
    Violations { count: usize, out: PathBuf },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(err) => match err {
                SdeError::Config(_) | SdeError::Argument(_) | SdeError::Precondition(_) => 1,
                SdeError::Numeric(_) | SdeError::Solver { .. } | SdeError::Io(_) => 2,
            },
            CliError::Violations { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(message) => f.write_str(message),
            CliError::Lib(err) => write!(f, "{err}"),
            CliError::Violations { count, out } => write!(
                f,
                "domination violated on {count} path(s); per-path rows in {}",
                out.display()
            ),
        }
    }
}

impl From<SdeError> for CliError {
    fn from(err: SdeError) -> Self {
        CliError::Lib(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Lib(SdeError::Io(err))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<String, CliError> {
    let (raw, runner): (RawArgs, Runner) = match command {
        Command::Simulate(raw) => (raw, run_simulate),
        Command::Convergence(raw) => (raw, run_convergence),
        Command::Moments(raw) => (raw, run_moments),
        Command::DominatorCheck(raw) => (raw, run_dominator_check),
        Command::Benchmark(raw) => (raw, run_benchmark),
        Command::DimensionScan(raw) => (raw, run_dimension_scan),
    };
    let effective = config::resolve(raw)?;
    if let Some(threads) = effective.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|err| CliError::Usage(format!("--threads: {err}")))?;
    }
    runner(&effective)
}

// ---------------------------------------------------------------------------
// Shared argument plumbing
// ---------------------------------------------------------------------------

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::Usage(format!(
            "missing required flag {flag}; pass it or set it in --config"
        ))
    })
}

fn build_problem(effective: &Effective) -> Result<SdeProblem<f64>, CliError> {
    let label = effective
        .problem
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing required flag --problem".to_owned()))?;
    let dim = match &effective.dim {
        Some(text) => Some(
            text.parse::<usize>()
                .map_err(|err| CliError::Usage(format!("--dim: {err} (value `{text}`)")))?,
        ),
        None => None,
    };
    make_builtin::<f64>(label, dim).map_err(|err| CliError::Usage(format!("--problem: {err}")))
}

fn parse_single_scheme(effective: &Effective) -> Result<Scheme, CliError> {
    let text = effective
        .scheme
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing required flag --scheme".to_owned()))?;
    if text.contains(',') {
        return Err(CliError::Usage(
            "--scheme: this subcommand takes a single scheme".to_owned(),
        ));
    }
    Scheme::from_str(text.trim()).map_err(|err| CliError::Usage(format!("--scheme: {err}")))
}

fn parse_scheme_list(
    effective: &Effective,
    default: Option<&str>,
) -> Result<Vec<Scheme>, CliError> {
    let text = effective
        .scheme
        .as_deref()
        .or(default)
        .ok_or_else(|| CliError::Usage("missing required flag --scheme".to_owned()))?;
    let mut schemes = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            return Err(CliError::Usage(format!(
                "--scheme: empty entry in list `{text}`"
            )));
        }
        let scheme =
            Scheme::from_str(piece).map_err(|err| CliError::Usage(format!("--scheme: {err}")))?;
        if schemes.contains(&scheme) {
            return Err(CliError::Usage(format!(
                "--scheme: `{scheme}` listed twice"
            )));
        }
        schemes.push(scheme);
    }
    Ok(schemes)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn run_simulate(effective: &Effective) -> Result<String, CliError> {
    let problem = build_problem(effective)?;
    let scheme = parse_single_scheme(effective)?;
    let steps = require(effective.steps, "--N")?;
    let paths = effective.paths.unwrap_or(1);
    let out = require(effective.out.clone(), "--out")?;
    let solver = SolverOptions::<f64>::default();

    let dim = problem.dim_state();
    let coords: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let header = format!("path_id,step,time,{}", coords.join(","));
    let mut doc = CsvDoc::new(effective.seed, &header);

    let h = problem.horizon() / steps as f64;
    let mut overflowed = 0usize;
    let mut newton_total = 0u64;
    for path_id in 0..paths as u64 {
        let grid = sample_grid::<f64>(
            steps,
            problem.dim_noise(),
            problem.horizon(),
            effective.seed,
            path_id,
        )?;
        let path = run_scheme(&problem, &grid, scheme, &solver)?;
        if path.overflowed_at().is_some() {
            overflowed += 1;
        }
        newton_total += path.newton_iters().unwrap_or(0);
        for n in 0..=path.recorded_steps() {
            let mut fields = Vec::with_capacity(3 + dim);
            fields.push(path_id.to_string());
            fields.push(n.to_string());
            fields.push(fmt_real(n as f64 * h));
            fields.extend(path.state(n).iter().map(|&x| fmt_real(x)));
            doc.row(&fields);
        }
    }
    doc.write(&out)?;
    Ok(format!(
        "wrote {}: {} {} path(s) on {} at N = {} ({} overflowed, {} Newton iterations)",
        out.display(),
        paths,
        scheme,
        problem.label(),
        steps,
        overflowed,
        newton_total
    ))
}

fn run_convergence(effective: &Effective) -> Result<String, CliError> {
    let problem = build_problem(effective)?;
    let scheme = parse_single_scheme(effective)?;
    let steps_list = require(effective.steps_list.clone(), "--Ns")?;
    let ref_steps = require(effective.ref_steps, "--Nref")?;
    let paths = effective.paths.unwrap_or(1000);
    let order_p = effective.order_p.unwrap_or(2.0);
    let out = require(effective.out.clone(), "--out")?;

    let header = "scheme,problem,N,Nref,p,paths,value,std_error,ci_low,ci_high,\
                  divergent_paths,wall_seconds";
    let mut doc = CsvDoc::new(effective.seed, header);
    let mut points = Vec::new();
    let mut divergent_total = 0usize;
    for &steps in &steps_list {
        let config = StrongErrorConfig::new(steps, ref_steps, order_p, paths, effective.seed);
        let start = Instant::now();
        let estimate = strong_error(&problem, scheme, &config)?;
        let wall = start.elapsed().as_secs_f64();
        divergent_total += estimate.divergent_paths;
        if estimate.value.is_finite() {
            points.push((steps, estimate.value));
        }
        doc.row(&[
            scheme.to_string(),
            problem.label().to_owned(),
            steps.to_string(),
            ref_steps.to_string(),
            fmt_real(order_p),
            paths.to_string(),
            fmt_real(estimate.value),
            fmt_real(estimate.std_error),
            fmt_real(estimate.ci_low),
            fmt_real(estimate.ci_high),
            estimate.divergent_paths.to_string(),
            fmt_real(wall),
        ]);
    }

    let fit_note = if points.len() >= 3 {
        let fit = estimate_order(&points)?;
        let predicted = fit.predicted_value(EXTRAPOLATION_STEPS);
        doc.comment(format!(
            "fit: slope={} intercept={} r_squared={}",
            fmt_real(fit.slope),
            fmt_real(fit.intercept),
            fmt_real(fit.r_squared)
        ));
        doc.comment(format!(
            "extrapolation: N={EXTRAPOLATION_STEPS} predicted_value={}",
            fmt_real(predicted)
        ));
        format!(
            "slope {:.3} (r^2 {:.4}), predicted value {:.3e} at N = {EXTRAPOLATION_STEPS}",
            fit.slope, fit.r_squared, predicted
        )
    } else {
        "too few finite points for an order fit".to_owned()
    };
    doc.write(&out)?;
    Ok(format!(
        "wrote {}: {} on {} over {} resolution(s), {divergent_total} divergent path-runs; {fit_note}",
        out.display(),
        scheme,
        problem.label(),
        steps_list.len()
    ))
}

fn run_moments(effective: &Effective) -> Result<String, CliError> {
    let problem = build_problem(effective)?;
    let scheme = parse_single_scheme(effective)?;
    let steps_list = require(effective.steps_list.clone(), "--Ns")?;
    let paths = effective.paths.unwrap_or(1000);
    let order_p = effective.order_p.unwrap_or(2.0);
    let out = require(effective.out.clone(), "--out")?;
    let solver = SolverOptions::<f64>::default();

    let rows = moment_sweep(
        &problem,
        scheme,
        &steps_list,
        order_p,
        paths,
        effective.seed,
        &solver,
    )?;

    let header = "scheme,problem,N,p,paths,max_mean_moment,overflowed_fraction";
    let mut doc = CsvDoc::new(effective.seed, header);
    let mut lowest = f64::INFINITY;
    let mut highest = f64::NEG_INFINITY;
    let mut worst_overflow = 0.0f64;
    for row in &rows {
        lowest = lowest.min(row.max_mean_moment);
        highest = highest.max(row.max_mean_moment);
        worst_overflow = worst_overflow.max(row.overflowed_fraction);
        doc.row(&[
            scheme.to_string(),
            problem.label().to_owned(),
            row.steps.to_string(),
            fmt_real(order_p),
            paths.to_string(),
            fmt_real(row.max_mean_moment),
            fmt_real(row.overflowed_fraction),
        ]);
    }
    doc.write(&out)?;
    Ok(format!(
        "wrote {}: sup-moment of {} on {} over {} resolution(s) in [{:.4e}, {:.4e}], \
         worst overflowed fraction {:.3}",
        out.display(),
        scheme,
        problem.label(),
        rows.len(),
        lowest,
        highest,
        worst_overflow
    ))
}

fn run_dominator_check(effective: &Effective) -> Result<String, CliError> {
    let problem = build_problem(effective)?;
    if let Some(scheme) = effective.scheme.as_deref() {
        if scheme != "tamed" {
            return Err(CliError::Usage(
                "--scheme: the dominating process is defined for the tamed scheme".to_owned(),
            ));
        }
    }
    let steps = require(effective.steps, "--N")?;
    let paths = effective.paths.unwrap_or(1000);
    let out = require(effective.out.clone(), "--out")?;
    let solver = SolverOptions::<f64>::default();

    let rows: Vec<(u64, usize, f64)> = (0..paths as u64)
        .into_par_iter()
        .map(|path_id| -> Result<(u64, usize, f64), SdeError> {
            let grid = sample_grid::<f64>(
                steps,
                problem.dim_noise(),
                problem.horizon(),
                effective.seed,
                path_id,
            )?;
            let path = run_scheme(&problem, &grid, Scheme::Tamed, &solver)?;
            let trace = DominatorTrace::compute(&problem, &path, &grid)?;
            let violations = trace.assert_domination(&path)?;
            let max_log_ratio = trace.max_log_ratio(&path)?;
            Ok((path_id, violations.len(), max_log_ratio))
        })
        .collect::<Result<Vec<_>, SdeError>>()?;

    let mut doc = CsvDoc::new(effective.seed, "path_id,N,violations,max_log_ratio");
    let mut total_violations = 0usize;
    let mut worst_ratio = f64::NEG_INFINITY;
    for &(path_id, violations, max_log_ratio) in &rows {
        total_violations += violations;
        worst_ratio = worst_ratio.max(max_log_ratio);
        doc.row(&[
            path_id.to_string(),
            steps.to_string(),
            violations.to_string(),
            fmt_real(max_log_ratio),
        ]);
    }
    doc.write(&out)?;
    if total_violations > 0 {
        return Err(CliError::Violations {
            count: total_violations,
            out,
        });
    }
    Ok(format!(
        "wrote {}: {} tamed path(s) on {} at N = {}, 0 domination violations, \
         max log-ratio {:.6}",
        out.display(),
        paths,
        problem.label(),
        steps,
        worst_ratio
    ))
}

fn run_benchmark(effective: &Effective) -> Result<String, CliError> {
    let problem = build_problem(effective)?;
    let schemes = parse_scheme_list(effective, None)?;
    let steps_list = require(effective.steps_list.clone(), "--Ns")?;
    let ref_steps = require(effective.ref_steps, "--Nref")?;
    let paths = effective.paths.unwrap_or(1000);
    let order_p = effective.order_p.unwrap_or(2.0);
    let out = require(effective.out.clone(), "--out")?;
    let solver = SolverOptions::<f64>::default();

    let rows = error_vs_runtime(
        &problem,
        &schemes,
        &steps_list,
        ref_steps,
        order_p,
        paths,
        effective.seed,
        &solver,
    )?;
    let mut doc = CsvDoc::new(
        effective.seed,
        "scheme,problem,dim,N,error,wall_seconds,newton_iters_total",
    );
    for row in &rows {
        doc.row(&[
            row.scheme.to_string(),
            row.problem.clone(),
            row.dim.to_string(),
            row.steps.to_string(),
            row.error.map(fmt_real).unwrap_or_default(),
            fmt_real(row.wall_seconds),
            row.newton_iters_total.to_string(),
        ]);
    }
    doc.write(&out)?;

    let plot_note = if effective.emit_plot {
        let labels: Vec<String> = schemes.iter().map(ToString::to_string).collect();
        let script = output::write_error_runtime_plot(&out, &labels)?;
        format!("; plot script {}", script.display())
    } else {
        String::new()
    };
    Ok(format!(
        "wrote {}: {} benchmark row(s) on {} ({} scheme(s) x {} resolution(s)){}",
        out.display(),
        rows.len(),
        problem.label(),
        schemes.len(),
        steps_list.len(),
        plot_note
    ))
}

fn run_dimension_scan(effective: &Effective) -> Result<String, CliError> {
    if let Some(problem) = effective.problem.as_deref() {
        if problem != "langevin_double_well" {
            return Err(CliError::Usage(
                "--problem: the dimension scan always runs langevin_double_well".to_owned(),
            ));
        }
    }
    let schemes = parse_scheme_list(effective, Some("tamed,implicit"))?;
    let dims = match &effective.dim {
        Some(text) => config::parse_ascending_list("--dim", text)?,
        None => vec![10, 20, 40],
    };
    let steps = effective.steps.unwrap_or(128);
    let paths = effective.paths.unwrap_or(1000);
    let out = require(effective.out.clone(), "--out")?;
    let solver = SolverOptions::<f64>::default();

    let rows = dimension_scaling(&dims, &schemes, steps, paths, effective.seed, &solver)?;
    let mut doc = CsvDoc::new(
        effective.seed,
        "scheme,problem,dim,N,error,wall_seconds,newton_iters_total",
    );
    for row in &rows {
        doc.row(&[
            row.scheme.to_string(),
            row.problem.clone(),
            row.dim.to_string(),
            row.steps.to_string(),
            row.error.map(fmt_real).unwrap_or_default(),
            fmt_real(row.wall_seconds),
            row.newton_iters_total.to_string(),
        ]);
    }
    doc.write(&out)?;

    let mut growth_notes = Vec::new();
    for &scheme in &schemes {
        let walls: Vec<f64> = rows
            .iter()
            .filter(|row| row.scheme == scheme)
            .map(|row| row.wall_seconds)
            .collect();
        if let (Some(&first), Some(&last)) = (walls.first(), walls.last()) {
            if first > 0.0 {
                growth_notes.push(format!("{scheme} x{:.1}", last / first));
            }
        }
    }
    let plot_note = if effective.emit_plot {
        let labels: Vec<String> = schemes.iter().map(ToString::to_string).collect();
        let script = output::write_dimension_plot(&out, &labels)?;
        format!("; plot script {}", script.display())
    } else {
        String::new()
    };
    Ok(format!(
        "wrote {}: wall-time scaling over dims {:?} at N = {} (growth {}){}",
        out.display(),
        dims,
        steps,
        growth_notes.join(", "),
        plot_note
    ))
}
