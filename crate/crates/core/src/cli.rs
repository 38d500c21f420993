//! Command-line front end: configure and run solves and experiments,
//! emitting traces, tables, and field dumps under a fixed set of file
//! names for external plotting.
//!
//! Every error path maps to a documented exit code:
//!   0 success, 2 usage, 3 invalid configuration, 4 linear-solver
//!   non-convergence, 5 negative coefficient, 6 contraction failure,
//!   7 step collapse, 8 I/O, 9 insufficient data, 10 analysis-probe
//!   domain errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{
    build_partition, bump_csv, bump_sequence_probe, membership_verdict, mesa_h1_parts,
    oscillation_csv, oscillation_probe, AnalysisError, MesaSpec,
};
use crate::elliptic::EllipticError;
use crate::grid::{self, DomainSpec, Field, Grid, GridError};
use crate::homotopy::{
    self, auto_schedule, estimate_constants, HomotopyError, HomotopyTrace, NewtonConfig, Schedule,
};
use crate::nonlinearity::{
    make_heaviside_approx, parse_nonlinearity, Nonlinearity, NonlinearityError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Total mapping from error to process exit code.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Config(_) | CliError::Nonlinearity(_) | CliError::Grid(_) => 3,
        CliError::Elliptic(EllipticError::NonConvergence { .. }) => 4,
        CliError::Elliptic(EllipticError::NegativeCoefficient { .. }) => 5,
        CliError::Elliptic(_) => 3,
        CliError::Homotopy(e) => match e {
            HomotopyError::Elliptic(EllipticError::NonConvergence { .. }) => 4,
            HomotopyError::Elliptic(EllipticError::NegativeCoefficient { .. }) => 5,
            HomotopyError::ContractionFailure { .. }
            | HomotopyError::NewtonMaxIterations { .. } => 6,
            HomotopyError::StepCollapse { .. } => 7,
            HomotopyError::InsufficientData => 9,
            _ => 3,
        },
        CliError::Analysis(e) => match e {
            AnalysisError::DeltaTooSmall { .. } | AnalysisError::BoxRequired => 10,
            _ => 3,
        },
        CliError::Io { .. } => 8,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "newton-imbed",
    version,
    about = "Continuation Newton solver for -laplace(u) = f(u) with mesa and bump experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve -laplace(u) = f(u), u = 0 on the boundary, by continuation.
    Solve(SolveArgs),
    /// Build a mesa partition and report its membership evidence.
    Mesa(MesaArgs),
    /// Oscillation of f(U) over shrinking balls around the mesa center.
    Oscillation(OscillationArgs),
    /// Norms of f(u_k) along the scaled-bump sequence.
    Bump(BumpArgs),
    /// Solve with the Heaviside-approximating family for each eps.
    EpsilonSweep(SweepArgs),
}

#[derive(Debug, Clone, Args, PartialEq)]
struct DomainArgs {
    /// Domain kind: ball or box.
    #[arg(long, default_value = "ball")]
    domain: String,
    /// Dimension (1-3).
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Ball radius.
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    /// Box side length.
    #[arg(long = "L", default_value_t = 1.0)]
    side: f64,
    /// Interior nodes per axis.
    #[arg(long, default_value_t = 127)]
    res: usize,
}

impl DomainArgs {
    fn grid(&self) -> Result<Grid, CliError> {
        let spec = match self.domain.as_str() {
            "ball" => DomainSpec::ball(self.n, self.radius)?,
            "box" => DomainSpec::box_domain(self.n, self.side)?,
            other => return Err(CliError::Config(format!("unknown domain kind {other:?}"))),
        };
        Ok(Grid::new(spec, self.res)?)
    }
}

#[derive(Debug, Clone, Args, PartialEq)]
struct SolveArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Nonlinearity: arccot:A,h,eps,k | heaviside-approx:eps | const:c.
    #[arg(long = "f")]
    nonlinearity: String,
    /// Schedule: uniform:J | explicit:t0,...,tJ | auto.
    #[arg(long, default_value = "uniform:1")]
    schedule: String,
    #[arg(long, default_value_t = 1e-10)]
    newton_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    linear_tol: f64,
    #[arg(long, default_value_t = 25)]
    max_newton_iters: usize,
    /// Disable adaptive interval halving.
    #[arg(long)]
    no_adapt: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Recorded in the summary; randomized suites live in the test
    /// harness, so runs are deterministic regardless.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args, PartialEq)]
struct MesaArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 16)]
    depth: usize,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    t_support: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl MesaArgs {
    fn spec(&self) -> Result<MesaSpec, CliError> {
        Ok(MesaSpec::new(
            self.a,
            self.b,
            self.t_support,
            self.alpha,
            self.n,
            self.depth,
        )?)
    }
}

#[derive(Debug, Clone, Args, PartialEq)]
struct OscillationArgs {
    #[arg(long = "f")]
    nonlinearity: String,
    /// Ball radii to probe, comma separated.
    #[arg(long)]
    deltas: String,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, default_value_t = 16)]
    depth: usize,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    t_support: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, PartialEq)]
struct BumpArgs {
    #[arg(long = "f")]
    nonlinearity: String,
    /// Bump heights x_k, comma separated.
    #[arg(long, default_value = "1,10,100")]
    xk: String,
    /// L^p order; `inf` for the max norm.
    #[arg(long, default_value = "inf")]
    p: String,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long = "L", default_value_t = 1.0)]
    side: f64,
    #[arg(long, default_value_t = 31)]
    res: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, PartialEq)]
struct SweepArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Widths eps of the Heaviside approximation, comma separated.
    #[arg(long)]
    eps: String,
    #[arg(long, default_value = "uniform:4")]
    schedule: String,
    #[arg(long, default_value_t = 1e-10)]
    newton_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    linear_tol: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_float_list(input: &str, what: &str) -> Result<Vec<f64>, CliError> {
    input
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad {what} entry {t:?}: {e}")))
        })
        .collect()
}

#[derive(Debug)]
enum ScheduleSpec {
    Uniform(usize),
    Explicit(Vec<f64>),
    Auto,
}

fn parse_schedule(input: &str) -> Result<ScheduleSpec, CliError> {
    if input == "auto" {
        return Ok(ScheduleSpec::Auto);
    }
    if let Some(rest) = input.strip_prefix("uniform:") {
        let steps = rest
            .parse::<usize>()
            .map_err(|e| CliError::Config(format!("bad uniform step count {rest:?}: {e}")))?;
        return Ok(ScheduleSpec::Uniform(steps));
    }
    if let Some(rest) = input.strip_prefix("explicit:") {
        return Ok(ScheduleSpec::Explicit(parse_float_list(
            rest,
            "schedule time",
        )?));
    }
    Err(CliError::Config(format!(
        "schedule must be uniform:J, explicit:t0,...,tJ, or auto; got {input:?}"
    )))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
    Ok(())
}

fn resolve_schedule(
    spec: &ScheduleSpec,
    nl: &Nonlinearity,
    grid: &Grid,
    cfg: &NewtonConfig,
) -> Result<Schedule, CliError> {
    match spec {
        ScheduleSpec::Uniform(steps) => Ok(Schedule::uniform(*steps)?),
        ScheduleSpec::Explicit(times) => Ok(Schedule::explicit(times.clone())?),
        ScheduleSpec::Auto => Ok(auto_schedule(nl, grid, cfg)?),
    }
}

struct SolveOutput {
    solution: Field,
    trace: HomotopyTrace,
    schedule: Schedule,
}

fn run_solve(
    nl: &Nonlinearity,
    grid: &Grid,
    schedule_spec: &ScheduleSpec,
    cfg: &NewtonConfig,
) -> Result<SolveOutput, CliError> {
    let schedule = resolve_schedule(schedule_spec, nl, grid, cfg)?;
    let (solution, trace) = homotopy::run(nl, grid, &schedule, cfg)?;
    Ok(SolveOutput {
        solution,
        trace,
        schedule,
    })
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let grid = args.domain.grid()?;
    let nl = parse_nonlinearity(&args.nonlinearity)?;
    let cfg = NewtonConfig {
        newton_tol: args.newton_tol,
        linear_tol: args.linear_tol,
        max_newton_iters: args.max_newton_iters,
        adapt: !args.no_adapt,
        ..NewtonConfig::default()
    };
    let schedule_spec = parse_schedule(&args.schedule)?;
    let output = run_solve(&nl, &grid, &schedule_spec, &cfg)?;

    write_file(&args.out, "trace.csv", &output.trace.to_csv())?;
    write_file(&args.out, "solution.field", &output.solution.dump())?;

    let mut summary = String::new();
    let _ = writeln!(summary, "command: solve");
    let _ = writeln!(summary, "nonlinearity: {}", nl.name());
    let _ = writeln!(
        summary,
        "domain: {} n={} extent={}",
        grid.domain().kind().as_str(),
        grid.domain().dim(),
        grid.domain().extent()
    );
    let _ = writeln!(summary, "res: {}", grid.res());
    let times: Vec<String> = output
        .schedule
        .times()
        .iter()
        .map(|t| t.to_string())
        .collect();
    let _ = writeln!(summary, "schedule: {}", times.join(","));
    let _ = writeln!(summary, "seed: {}", args.seed);
    let _ = writeln!(summary, "halvings: {}", output.trace.total_halvings);
    let _ = writeln!(
        summary,
        "final_residual: {:.17e}",
        output.trace.final_residual().unwrap_or(f64::NAN)
    );
    match estimate_constants(&output.trace) {
        Ok(est) => {
            let _ = writeln!(summary, "k_est: {:.17e}", est.k_est);
            let _ = writeln!(summary, "a_est: {:.17e}", est.a_est);
            let _ = writeln!(summary, "dt_recommendation: {:.17e}", est.dt_recommendation);
        }
        Err(_) => {
            let _ = writeln!(summary, "k_est: n/a");
            let _ = writeln!(summary, "a_est: n/a");
            let _ = writeln!(summary, "dt_recommendation: n/a");
        }
    }
    let _ = writeln!(summary, "wall_time_s: {:.3}", start.elapsed().as_secs_f64());
    write_file(&args.out, "summary.txt", &summary)?;

    println!(
        "solved: residual {:.3e}, {} halvings, {} time steps",
        output.trace.final_residual().unwrap_or(f64::NAN),
        output.trace.total_halvings,
        output.trace.steps.len()
    );
    Ok(())
}

fn cmd_mesa(args: &MesaArgs) -> Result<(), CliError> {
    let spec = args.spec()?;
    let partition = build_partition(&spec);
    let norm = mesa_h1_parts(&spec, &partition);
    let verdict = membership_verdict(&spec, &norm);

    write_file(&args.out, "partition.csv", &partition.to_csv())?;
    write_file(&args.out, "levels.csv", &norm.to_csv())?;

    let word = if verdict.subcritical {
        "convergent (H1 member)"
    } else {
        "divergent"
    };
    println!(
        "verdict: {word}; alpha = {} vs threshold (n-2)/2 = {}; deepest envelope ratio = {:.6}",
        spec.alpha, verdict.threshold_alpha, verdict.limit_ratio
    );
    println!(
        "h1_sq partial sum at depth {}: l2 = {:.6e}, grad = {:.6e}",
        spec.depth, norm.l2, norm.grad
    );
    Ok(())
}

fn cmd_oscillation(args: &OscillationArgs) -> Result<(), CliError> {
    let nl = parse_nonlinearity(&args.nonlinearity)?;
    let spec = MesaSpec::new(
        args.a,
        args.b,
        args.t_support,
        args.alpha,
        args.n,
        args.depth,
    )?;
    let partition = build_partition(&spec);
    let deltas = parse_float_list(&args.deltas, "delta")?;
    let samples = oscillation_probe(&nl, &spec, &partition, &deltas)?;
    write_file(&args.out, "oscillation.csv", &oscillation_csv(&samples))?;
    for s in &samples {
        println!("delta {:.6e}: oscillation {:.12e}", s.delta, s.oscillation);
    }
    Ok(())
}

fn cmd_bump(args: &BumpArgs) -> Result<(), CliError> {
    let nl = parse_nonlinearity(&args.nonlinearity)?;
    let grid = Grid::new(DomainSpec::box_domain(args.n, args.side)?, args.res)?;
    let xs = parse_float_list(&args.xk, "x_k")?;
    let p = match args.p.as_str() {
        "inf" | "infinity" => f64::INFINITY,
        other => other
            .parse::<f64>()
            .map_err(|e| CliError::Config(format!("bad p {other:?}: {e}")))?,
    };
    let samples = bump_sequence_probe(&nl, &grid, &xs, p)?;
    write_file(&args.out, "bump.csv", &bump_csv(&samples))?;
    for s in &samples {
        println!("x_k {:.6e}: norm {:.12e}", s.x_k, s.norm);
    }
    Ok(())
}

fn cmd_epsilon_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let grid = args.domain.grid()?;
    let mut eps_values = parse_float_list(&args.eps, "eps")?;
    for &e in &eps_values {
        if !(e > 0.0) {
            return Err(CliError::Config(format!("eps must be positive, got {e}")));
        }
    }
    // Output rows are ordered by eps descending.
    eps_values.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let cfg = NewtonConfig {
        newton_tol: args.newton_tol,
        linear_tol: args.linear_tol,
        ..NewtonConfig::default()
    };
    let schedule_spec = parse_schedule(&args.schedule)?;

    let mut rows = String::from("eps,status,l2_norm,h1_norm,residual,halvings\n");
    let mut solutions: Vec<(f64, Field)> = Vec::new();
    let mut first_failure: Option<CliError> = None;
    for &eps in &eps_values {
        let nl = make_heaviside_approx(eps)?;
        match run_solve(&nl, &grid, &schedule_spec, &cfg) {
            Ok(output) => {
                let l2 = grid::norm_lp(&output.solution, 2.0).expect("p = 2 is valid");
                let h1 = grid::norm_h1(&output.solution);
                let _ = writeln!(
                    rows,
                    "{eps:.17e},ok,{l2:.17e},{h1:.17e},{:.17e},{}",
                    output.trace.final_residual().unwrap_or(f64::NAN),
                    output.trace.total_halvings
                );
                solutions.push((eps, output.solution));
            }
            Err(err) => {
                let _ = writeln!(rows, "{eps:.17e},error: {err},,,,");
                if first_failure.is_none() {
                    first_failure = Some(err);
                }
            }
        }
    }
    write_file(&args.out, "sweep.csv", &rows)?;

    let mut distances = String::from("eps_a,eps_b,h1_distance\n");
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            let d = grid::norm_h1(&solutions[i].1.sub(&solutions[j].1));
            let _ = writeln!(
                distances,
                "{:.17e},{:.17e},{:.17e}",
                solutions[i].0, solutions[j].0, d
            );
        }
    }
    write_file(&args.out, "distances.csv", &distances)?;

    println!(
        "swept {} eps values, {} succeeded",
        eps_values.len(),
        solutions.len()
    );
    match first_failure {
        Some(err) => Err(err),
        None => Ok(()),
    }
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn run_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/usage text; 2 is the usage code
            // except for --help/--version which exit 0.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Mesa(a) => cmd_mesa(a),
        Command::Oscillation(a) => cmd_oscillation(a),
        Command::Bump(a) => cmd_bump(a),
        Command::EpsilonSweep(a) => cmd_epsilon_sweep(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
