//! Scripted experiments that write CSV tables.
//!
//! Error-path experiments (`fig_*` except the benchmark) emit one row per
//! `(replicate, N)` cell with columns
//! `experiment,replicate,seed,N,value,reference,abs_error,diverged`.
//! Replicate `r` runs with seed `seed + r` for every `N`, so each replicate
//! traces one sample path of the error as `N` grows.
//!
//! RMSE experiments (`fig_langevin_benchmark`, `mlmc_tamed_convergence`)
//! emit one row per `(scheme, N)` with columns
//! `experiment,scheme,N,replicates,reference,rmse,mean_value,standard_error,mean_runtime_seconds,diverged_count`.
//!
//! Floats are written in shortest round-trip form, switching to exponent
//! notation outside `[1e-5, 1e16)`; non-finite values are `inf`, `-inf` and
//! `nan`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::{mlmc, rmse_curve, RmseRow};
use crate::parallel::Executor;
use crate::problems::{make_ginzburg_landau, make_langevin, make_x5_problem, Payoff, SdeProblem};
use crate::randomness::replicate_seed;
use crate::reference::{gl_reference_value, x5_expectation, QuadratureSpec};
use crate::schemes::Scheme;
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    FigDivergenceSigma1,
    FigConvergeThenDivergeSigma01,
    FigConvergeThenDivergeSigma033,
    FigGinzburg,
    FigLangevinBenchmark,
    MlmcTamedConvergence,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::FigDivergenceSigma1,
        ExperimentName::FigConvergeThenDivergeSigma01,
        ExperimentName::FigConvergeThenDivergeSigma033,
        ExperimentName::FigGinzburg,
        ExperimentName::FigLangevinBenchmark,
        ExperimentName::MlmcTamedConvergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::FigDivergenceSigma1 => "fig_divergence_sigma1",
            ExperimentName::FigConvergeThenDivergeSigma01 => "fig_converge_then_diverge_sigma01",
            ExperimentName::FigConvergeThenDivergeSigma033 => "fig_converge_then_diverge_sigma033",
            ExperimentName::FigGinzburg => "fig_ginzburg",
            ExperimentName::FigLangevinBenchmark => "fig_langevin_benchmark",
            ExperimentName::MlmcTamedConvergence => "mlmc_tamed_convergence",
        }
    }

    /// Default `N` range.
    pub fn default_steps(self) -> Vec<usize> {
        let (lo, hi) = match self {
            ExperimentName::FigDivergenceSigma1 => (1, 7),
            ExperimentName::FigConvergeThenDivergeSigma01 => (1, 18),
            ExperimentName::FigConvergeThenDivergeSigma033 => (1, 18),
            ExperimentName::FigGinzburg => (1, 14),
            ExperimentName::FigLangevinBenchmark => (5, 14),
            ExperimentName::MlmcTamedConvergence => (4, 14),
        };
        (lo..=hi).map(|k| 1usize << k).collect()
    }

    fn is_rmse_table(self) -> bool {
        matches!(
            self,
            ExperimentName::FigLangevinBenchmark | ExperimentName::MlmcTamedConvergence
        )
    }

    pub fn header(self) -> Vec<&'static str> {
        if self.is_rmse_table() {
            vec![
                "experiment",
                "scheme",
                "N",
                "replicates",
                "reference",
                "rmse",
                "mean_value",
                "standard_error",
                "mean_runtime_seconds",
                "diverged_count",
            ]
        } else {
            vec![
                "experiment",
                "replicate",
                "seed",
                "N",
                "value",
                "reference",
                "abs_error",
                "diverged",
            ]
        }
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "experiment",
                value: s.to_string(),
            })
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub seed: u64,
    pub replicates: usize,
    /// `None` selects [`ExperimentName::default_steps`].
    pub steps: Option<Vec<usize>>,
    /// Record wall-clock runtimes; disable for byte-reproducible output.
    pub timing: bool,
    /// Monte Carlo samples behind the Ginzburg-Landau reference value.
    pub gl_reference_samples: usize,
    pub gl_reference_fine_steps: usize,
    /// `N` and seed count of the tamed run used as Langevin reference.
    pub langevin_reference_steps: usize,
    pub langevin_reference_seeds: usize,
    /// Written by [`run_experiment`] when set.
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(name: ExperimentName, seed: u64, replicates: usize) -> Self {
        Self {
            name,
            seed,
            replicates,
            steps: None,
            timing: true,
            gl_reference_samples: 100_000,
            gl_reference_fine_steps: 1 << 12,
            langevin_reference_steps: 1 << 16,
            langevin_reference_seeds: 16,
            output_path: None,
        }
    }

    pub fn steps(&self) -> Vec<usize> {
        self.steps
            .clone()
            .unwrap_or_else(|| self.name.default_steps())
    }

    fn validate(&self) -> Result<()> {
        for n in self.steps() {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(n));
            }
        }
        Ok(())
    }
}

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

/// CSV representation of a float.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// `|reference - value|`, `+inf` for a non-finite estimate.
pub fn absolute_error(value: f64, reference: f64) -> f64 {
    if value.is_finite() {
        (reference - value).abs()
    } else {
        f64::INFINITY
    }
}

/// Parses `N` lists such as `128`, `2^4..2^16`, `16,32,2^8` or `4..64`
/// (ranges step through powers of two).
pub fn parse_steps_list(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Unknown {
        kind: "steps list",
        value: spec.to_string(),
    };
    let parse_one = |s: &str| -> Result<usize> {
        let s = s.trim();
        if let Some(exp) = s.strip_prefix("2^") {
            let k: u32 = exp.parse().map_err(|_| bad())?;
            1usize
                .checked_shl(k)
                .filter(|_| k < usize::BITS)
                .ok_or_else(bad)
        } else {
            s.parse().map_err(|_| bad())
        }
    };
    let mut out = Vec::new();
    for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (lo, hi) = (parse_one(a)?, parse_one(b)?);
            if !lo.is_power_of_two() || !hi.is_power_of_two() || lo > hi {
                return Err(bad());
            }
            let mut n = lo;
            while n <= hi {
                out.push(n);
                n <<= 1;
            }
        } else {
            out.push(parse_one(item)?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Runs the experiment, writes the table to `cfg.output_path` if set, and
/// returns it.
pub fn run_experiment(cfg: &ExperimentConfig, exec: &Executor) -> Result<CsvTable> {
    cfg.validate()?;
    let table = build_table(cfg, exec)?;
    if let Some(path) = &cfg.output_path {
        table.write_to(path)?;
    }
    Ok(table)
}

fn build_table(cfg: &ExperimentConfig, exec: &Executor) -> Result<CsvTable> {
    let mut table = CsvTable::new(&cfg.name.header());
    if cfg.replicates == 0 {
        return Ok(table);
    }
    let p2 = Payoff::TerminalPower(2.0);
    match cfg.name {
        ExperimentName::FigDivergenceSigma1 => {
            error_paths(cfg, &x5(1.0)?, p2, x5_ref(1.0)?, exec, &mut table)?
        }
        ExperimentName::FigConvergeThenDivergeSigma01 => {
            error_paths(cfg, &x5(0.1)?, p2, x5_ref(0.1)?, exec, &mut table)?
        }
        ExperimentName::FigConvergeThenDivergeSigma033 => error_paths(
            cfg,
            &x5(1.0 / 3.0)?,
            p2,
            x5_ref(1.0 / 3.0)?,
            exec,
            &mut table,
        )?,
        ExperimentName::FigGinzburg => {
            let reference = gl_reference_value(
                cfg.gl_reference_samples,
                cfg.gl_reference_fine_steps,
                cfg.seed,
                exec,
            )?
            .estimate;
            error_paths(
                cfg,
                &make_ginzburg_landau(),
                p2,
                reference,
                exec,
                &mut table,
            )?
        }
        ExperimentName::FigLangevinBenchmark => {
            let problem = make_langevin(10)?;
            let payoff = Payoff::PathSupSquareNorm;
            let reference_runs = (0..cfg.langevin_reference_seeds as u64)
                .map(|s| {
                    // offset keeps the reference runs disjoint from the replicates
                    let seed = replicate_seed(cfg.seed, 1 << 32 | s);
                    mlmc(
                        &problem,
                        Scheme::TamedEuler,
                        payoff,
                        cfg.langevin_reference_steps,
                        seed,
                        exec,
                    )
                    .map(|r| r.value)
                })
                .collect::<Result<Vec<f64>>>()?;
            let reference = mean(&reference_runs);
            for scheme in [Scheme::ImplicitEuler, Scheme::TamedEuler] {
                let rows = rmse_curve(
                    &problem,
                    scheme,
                    payoff,
                    &cfg.steps(),
                    cfg.replicates,
                    reference,
                    cfg.seed,
                    exec,
                )?;
                push_rmse_rows(cfg, scheme, reference, &rows, &mut table);
            }
        }
        ExperimentName::MlmcTamedConvergence => {
            let reference = x5_ref(1.0)?;
            let rows = rmse_curve(
                &x5(1.0)?,
                Scheme::TamedEuler,
                p2,
                &cfg.steps(),
                cfg.replicates,
                reference,
                cfg.seed,
                exec,
            )?;
            push_rmse_rows(cfg, Scheme::TamedEuler, reference, &rows, &mut table);
        }
    }
    Ok(table)
}

fn x5(sigma_bar: f64) -> Result<SdeProblem> {
    make_x5_problem(sigma_bar, 1.0)
}

fn x5_ref(sigma_bar: f64) -> Result<f64> {
    x5_expectation(sigma_bar, 1.0, 2.0, QuadratureSpec::default())
}

fn error_paths(
    cfg: &ExperimentConfig,
    problem: &SdeProblem,
    payoff: Payoff,
    reference: f64,
    exec: &Executor,
    table: &mut CsvTable,
) -> Result<()> {
    let steps = cfg.steps();
    let cells: Vec<(usize, usize)> = (0..cfg.replicates)
        .flat_map(|r| steps.iter().map(move |&n| (r, n)))
        .collect();
    let inner = Executor::sequential();
    let results = exec
        .map(cells.len(), |i| {
            let (r, n) = cells[i];
            mlmc(
                problem,
                Scheme::ExplicitEuler,
                payoff,
                n,
                replicate_seed(cfg.seed, r as u64),
                &inner,
            )
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for (&(r, n), report) in cells.iter().zip(&results) {
        table.push(vec![
            cfg.name.to_string(),
            r.to_string(),
            report.master_seed.to_string(),
            n.to_string(),
            format_float(report.value),
            format_float(reference),
            format_float(absolute_error(report.value, reference)),
            report.diverged.to_string(),
        ]);
    }
    Ok(())
}

fn push_rmse_rows(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    reference: f64,
    rows: &[RmseRow],
    table: &mut CsvTable,
) {
    for row in rows {
        table.push(vec![
            cfg.name.to_string(),
            scheme.to_string(),
            row.steps.to_string(),
            row.replicates.to_string(),
            format_float(reference),
            format_float(row.rmse),
            format_float(row.mean_value),
            format_float(row.standard_error.unwrap_or(f64::NAN)),
            format_float(if cfg.timing {
                row.mean_runtime_seconds
            } else {
                f64::NAN
            }),
            row.diverged_count.to_string(),
        ]);
    }
}
