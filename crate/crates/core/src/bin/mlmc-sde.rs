use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mlmc_sde::diagnostics::{level_stats_samples, DEFAULT_DELTA};
use mlmc_sde::estimators::{mlmc, monte_carlo_euler, EstimatorReport};
use mlmc_sde::experiments::{
    format_float, parse_steps_list, run_experiment, CsvTable, ExperimentConfig, ExperimentName,
};
use mlmc_sde::problems::{Payoff, ProblemKind, SdeProblem};
use mlmc_sde::randomness::{replicate_seed, DEFAULT_SEED, SEED_ENV};
use mlmc_sde::reference::{gl_reference_value, x5_expectation, QuadratureSpec};
use mlmc_sde::{Error, Executor, Result, Scheme};

#[derive(Parser)]
#[command(
    name = "mlmc-sde",
    version,
    about = "Monte Carlo and multilevel Monte Carlo Euler for SDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plain Monte Carlo Euler with N^2 paths.
    Mc(EstimatorArgs),
    /// Multilevel Monte Carlo with N samples at level 0.
    Mlmc(EstimatorArgs),
    /// Reference value of E[f(X_T)].
    Reference(ReferenceArgs),
    /// Level statistics and events of the initial value array.
    Diagnose(DiagnoseArgs),
    /// Named experiment writing CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, default_value = "x5")]
    problem: ProblemKind,
    #[arg(long, default_value_t = 1.0)]
    sigma_bar: f64,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct Common {
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// 1 runs sequentially, 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Single N or a list such as 2^4..2^10.
    #[arg(long, value_parser = parse_steps)]
    steps: Vec<Steps>,
    #[arg(long, default_value = "euler")]
    scheme: Scheme,
    #[arg(long, default_value = "p2")]
    payoff: Payoff,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Write runtime_seconds as nan.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quadrature {
    Simpson,
    GaussHermite,
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Exponent p of the payoff |x|^p.
    #[arg(long, default_value_t = 2.0)]
    power: f64,
    #[arg(long, value_enum, default_value_t = Quadrature::Simpson)]
    quadrature: Quadrature,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    #[arg(long, default_value_t = 1e-8)]
    abs_tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 1 << 14)]
    fine_steps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, default_value_t = 1.0)]
    sigma_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, value_parser = parse_steps, default_value = "2^4..2^16")]
    steps_list: Steps,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    name: ExperimentName,
    #[arg(long, default_value_t = 4)]
    replicates: usize,
    /// Overrides the default N range.
    #[arg(long, value_parser = parse_steps)]
    steps_list: Option<Steps>,
    #[arg(long)]
    no_timing: bool,
    #[arg(long, default_value_t = 100_000)]
    gl_reference_samples: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone)]
struct Steps(Vec<usize>);

fn parse_steps(s: &str) -> std::result::Result<Steps, String> {
    parse_steps_list(s).map(Steps).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mc(args) => estimate(args, false),
        Command::Mlmc(args) => estimate(args, true),
        Command::Reference(args) => reference(args),
        Command::Diagnose(args) => diagnose(args),
        Command::Experiment(args) => experiment(args),
    }
}

fn build_problem(args: &ProblemArgs) -> Result<SdeProblem> {
    args.problem.build(args.sigma_bar, args.dim, args.horizon)
}

fn emit(table: &CsvTable, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => table.write_to(path),
        None => {
            std::io::stdout().write_all(&table.to_bytes()?)?;
            Ok(())
        }
    }
}

fn estimate(args: EstimatorArgs, multilevel: bool) -> Result<()> {
    let problem = build_problem(&args.problem)?;
    let exec = Executor::with_workers(args.common.workers)?;
    let steps: Vec<usize> = args.steps.into_iter().flat_map(|s| s.0).collect();
    if steps.is_empty() {
        return Err(Error::invalid("steps", "required"));
    }
    let mut table = CsvTable::new(&[
        "estimator",
        "problem",
        "scheme",
        "N",
        "seed",
        "value",
        "diverged",
        "runtime_seconds",
    ]);
    for r in 0..args.replicates as u64 {
        let seed = replicate_seed(args.common.seed, r);
        for &n in &steps {
            let report: EstimatorReport = if multilevel {
                mlmc(&problem, args.scheme, args.payoff, n, seed, &exec)?
            } else {
                if args.scheme != Scheme::ExplicitEuler {
                    return Err(Error::invalid("scheme", "mc supports only euler"));
                }
                monte_carlo_euler(&problem, args.payoff, n, seed, &exec)?
            };
            table.push(vec![
                report.estimator.label().to_string(),
                report.problem.clone(),
                report.scheme.to_string(),
                n.to_string(),
                seed.to_string(),
                format_float(report.value),
                report.diverged.to_string(),
                format_float(if args.no_timing {
                    f64::NAN
                } else {
                    report.runtime_seconds
                }),
            ]);
        }
    }
    emit(&table, args.common.out.as_ref())
}

fn reference(args: ReferenceArgs) -> Result<()> {
    let mut table = CsvTable::new(&[
        "problem",
        "sigma_bar",
        "horizon",
        "p",
        "method",
        "value",
        "standard_error",
        "samples",
        "fine_steps",
    ]);
    match args.problem.problem {
        ProblemKind::X5 => {
            let horizon = args.problem.horizon.unwrap_or(1.0);
            let spec = match args.quadrature {
                Quadrature::Simpson => QuadratureSpec::AdaptiveSimpson {
                    abs_tol: args.abs_tol,
                    range_multiplier: 12.0,
                },
                Quadrature::GaussHermite => QuadratureSpec::GaussHermite { nodes: args.nodes },
            };
            let value = x5_expectation(args.problem.sigma_bar, horizon, args.power, spec)?;
            table.push(vec![
                "x5".into(),
                format_float(args.problem.sigma_bar),
                format_float(horizon),
                format_float(args.power),
                spec.label(),
                format_float(value),
                "0".into(),
                "0".into(),
                "0".into(),
            ]);
        }
        ProblemKind::GinzburgLandau => {
            if args.power != 2.0 || args.problem.horizon.is_some_and(|t| t != 1.0) {
                return Err(Error::invalid(
                    "problem",
                    "the Ginzburg-Landau reference covers E[X_1^2] only",
                ));
            }
            let exec = Executor::with_workers(args.common.workers)?;
            let est = gl_reference_value(args.samples, args.fine_steps, args.common.seed, &exec)?;
            table.push(vec![
                "ginzburg-landau".into(),
                "nan".into(),
                "1".into(),
                "2".into(),
                "monte-carlo-exact-path".into(),
                format_float(est.estimate),
                format_float(est.standard_error.unwrap_or(f64::NAN)),
                est.samples.to_string(),
                est.fine_steps.to_string(),
            ]);
        }
        ProblemKind::Langevin => {
            return Err(Error::invalid(
                "problem",
                "no reference solution for the Langevin problem",
            ));
        }
    }
    emit(&table, args.common.out.as_ref())
}

fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let exec = Executor::with_workers(args.common.workers)?;
    let samples = level_stats_samples(
        args.sigma_bar,
        args.horizon,
        &args.steps_list.0,
        args.replicates,
        args.common.seed,
        args.delta,
        &exec,
    )?;
    let mut table = CsvTable::new(&[
        "N",
        "replicate",
        "L_N",
        "eta_N",
        "theta_N",
        "A1",
        "A2",
        "A3",
        "A4",
    ]);
    for s in samples {
        table.push(vec![
            s.steps.to_string(),
            s.replicate.to_string(),
            s.stats.l_n.to_string(),
            format_float(s.stats.eta_n),
            format_float(s.stats.theta_n),
            s.stats.a1.to_string(),
            s.stats.a2.to_string(),
            s.stats.a3.to_string(),
            s.stats.a4.to_string(),
        ]);
    }
    emit(&table, args.common.out.as_ref())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let exec = Executor::with_workers(args.common.workers)?;
    let mut cfg = ExperimentConfig::new(args.name, args.common.seed, args.replicates);
    cfg.steps = args.steps_list.map(|s| s.0);
    cfg.timing = !args.no_timing;
    cfg.gl_reference_samples = args.gl_reference_samples;
    let table = run_experiment(&cfg, &exec)?;
    emit(&table, args.common.out.as_ref())
}
