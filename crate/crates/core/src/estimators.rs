//! Classical and multilevel Monte Carlo estimators.
//!
//! Sample `k` of level `l` draws its initial value from stream
//! `(l, k, initial)` and its Brownian increments from `(l, k, brownian)`.
//! Fine and coarse paths of one level correction share both. Samples are
//! reduced in ascending `k` within a level and levels in ascending `l`, so
//! reports are bit-identical for any worker count.

use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::parallel::Executor;
use crate::problems::{Payoff, SdeProblem};
use crate::randomness::{
    derive_stream, replicate_seed, sample_increments, sample_initial, IncrementGrid, StreamId,
};
use crate::schemes::{euler_maruyama, Scheme};
use crate::stats::{compensated_sum, mean_and_standard_error};

/// Magnitude above which an estimate is flagged as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    MonteCarlo,
    Multilevel,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::MonteCarlo => "mc",
            EstimatorKind::Multilevel => "mlmc",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceReason {
    NonFinite,
    MagnitudeExceeded,
}

pub fn classify_divergence(value: f64) -> Option<DivergenceReason> {
    if !value.is_finite() {
        Some(DivergenceReason::NonFinite)
    } else if value.abs() > DIVERGENCE_THRESHOLD {
        Some(DivergenceReason::MagnitudeExceeded)
    } else {
        None
    }
}

/// Weighted sum of one level: `(1/N) sum f` at level 0 and
/// `(2^l/N) sum (f(fine) - f(coarse))` above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelContribution {
    pub level: u32,
    pub samples: usize,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub estimator: EstimatorKind,
    pub problem: String,
    pub scheme: Scheme,
    /// Time steps of the finest paths.
    pub steps: usize,
    pub value: f64,
    pub per_level: Vec<LevelContribution>,
    pub total_samples: usize,
    pub diverged: bool,
    pub divergence_reason: Option<DivergenceReason>,
    pub runtime_seconds: f64,
    pub master_seed: u64,
}

impl EstimatorReport {
    fn assemble(
        estimator: EstimatorKind,
        problem: &SdeProblem,
        scheme: Scheme,
        steps: usize,
        per_level: Vec<LevelContribution>,
        runtime_seconds: f64,
        master_seed: u64,
    ) -> Self {
        let value = compensated_sum(per_level.iter().map(|c| c.contribution));
        let divergence_reason = classify_divergence(value);
        Self {
            estimator,
            problem: problem.name().to_string(),
            scheme,
            steps,
            value,
            total_samples: per_level.iter().map(|c| c.samples).sum(),
            per_level,
            diverged: divergence_reason.is_some(),
            divergence_reason,
            runtime_seconds,
            master_seed,
        }
    }
}

fn initial_value(problem: &SdeProblem, seed: u64, level: u32, sample: u64) -> Vec<f64> {
    sample_initial(
        problem,
        &mut derive_stream(seed, StreamId::initial(level, sample)),
    )
}

/// Increments of `W^{l,k}` on `steps` steps over `[0, T]`. Noise-free
/// problems get a zero grid without touching the stream.
fn brownian_grid(
    problem: &SdeProblem,
    seed: u64,
    level: u32,
    sample: u64,
    steps: usize,
) -> Result<IncrementGrid> {
    let dt = problem.horizon() / steps as f64;
    if problem.is_noise_free() {
        return IncrementGrid::zeros(steps, dt, problem.noise_dim());
    }
    let mut rng = derive_stream(seed, StreamId::brownian(level, sample));
    sample_increments(&mut rng, steps, dt, problem.noise_dim())
}

/// Plain Monte Carlo Euler: mean of `f(Y_N)` over `N^2` explicit Euler paths
/// with `N` steps each, sample `k` drawn from streams `(0, k)`.
pub fn monte_carlo_euler(
    problem: &SdeProblem,
    payoff: Payoff,
    steps: usize,
    seed: u64,
    exec: &Executor,
) -> Result<EstimatorReport> {
    if steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    let samples = steps
        .checked_mul(steps)
        .ok_or_else(|| Error::invalid("steps", "N^2 overflows"))?;
    let start = Instant::now();
    let values = exec
        .map(samples, |i| {
            let k = i as u64 + 1;
            let init = initial_value(problem, seed, 0, k);
            let inc = brownian_grid(problem, seed, 0, k, steps)?;
            Ok(payoff.evaluate(&euler_maruyama(problem, &init, &inc)?))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let contribution = compensated_sum(values) / samples as f64;
    let runtime = start.elapsed().as_secs_f64();
    Ok(EstimatorReport::assemble(
        EstimatorKind::MonteCarlo,
        problem,
        Scheme::ExplicitEuler,
        steps,
        vec![LevelContribution {
            level: 0,
            samples,
            contribution,
        }],
        runtime,
        seed,
    ))
}

/// `f(Y_1^{1,0,k})`: payoff of a one-step path over `[0, T]`.
pub fn level_zero_sample(
    problem: &SdeProblem,
    scheme: Scheme,
    payoff: Payoff,
    sample: u64,
    seed: u64,
) -> Result<f64> {
    let init = initial_value(problem, seed, 0, sample);
    let inc = brownian_grid(problem, seed, 0, sample, 1)?;
    Ok(payoff.evaluate(&scheme.simulate(problem, &init, &inc)?))
}

/// `f(fine) - f(coarse)` for sample `k` of level `l >= 1`: the fine path has
/// `2^l` steps, the coarse path `2^{l-1}` steps driven by the pairwise sums
/// of the same increments, and both start from the same `xi^{l,k}`.
pub fn coupled_level_sample(
    problem: &SdeProblem,
    scheme: Scheme,
    payoff: Payoff,
    level: u32,
    sample: u64,
    seed: u64,
) -> Result<f64> {
    if level == 0 {
        return Err(Error::invalid("level", "coupled levels start at 1"));
    }
    if level >= usize::BITS {
        return Err(Error::invalid("level", format!("{level} is too large")));
    }
    let init = initial_value(problem, seed, level, sample);
    let fine = brownian_grid(problem, seed, level, sample, 1usize << level)?;
    let coarse = fine.coarsen()?;
    let f_fine = payoff.evaluate(&scheme.simulate(problem, &init, &fine)?);
    let f_coarse = payoff.evaluate(&scheme.simulate(problem, &init, &coarse)?);
    Ok(f_fine - f_coarse)
}

/// `log2(n)` for a power of two `n >= 2`.
pub fn levels_of(n: usize) -> Result<u32> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros())
}

/// Multilevel Monte Carlo with the fixed allocation `N` samples at level 0
/// and `N / 2^l` coupled samples at level `l = 1..=log2(N)`.
pub fn mlmc(
    problem: &SdeProblem,
    scheme: Scheme,
    payoff: Payoff,
    steps: usize,
    seed: u64,
    exec: &Executor,
) -> Result<EstimatorReport> {
    let levels = levels_of(steps)?;
    scheme.check_supports(problem)?;

    // flatten (level, k) so the pool can balance cheap and expensive samples
    let offsets: Vec<usize> = (0..=levels)
        .scan(0usize, |acc, l| {
            let start = *acc;
            *acc += steps >> l;
            Some(start)
        })
        .collect();
    let total = offsets[levels as usize] + 1;

    let start = Instant::now();
    let values = exec
        .map(total, |i| {
            let level = offsets.partition_point(|&o| o <= i) as u32 - 1;
            let k = (i - offsets[level as usize]) as u64 + 1;
            if level == 0 {
                level_zero_sample(problem, scheme, payoff, k, seed)
            } else {
                coupled_level_sample(problem, scheme, payoff, level, k, seed)
            }
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    let per_level = (0..=levels)
        .map(|l| {
            let count = steps >> l;
            let begin = offsets[l as usize];
            let sum = compensated_sum(values[begin..begin + count].iter().copied());
            LevelContribution {
                level: l,
                samples: count,
                contribution: sum * ((1usize << l) as f64 / steps as f64),
            }
        })
        .collect();
    let runtime = start.elapsed().as_secs_f64();
    Ok(EstimatorReport::assemble(
        EstimatorKind::Multilevel,
        problem,
        scheme,
        steps,
        per_level,
        runtime,
        seed,
    ))
}

/// One row of an RMSE-versus-cost table.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub steps: usize,
    pub replicates: usize,
    pub rmse: f64,
    pub mean_value: f64,
    pub standard_error: Option<f64>,
    pub mean_runtime_seconds: f64,
    pub diverged_count: usize,
}

/// Root mean squared deviation of `values` from `reference`.
pub fn rmse(values: &[f64], reference: f64) -> f64 {
    let ss = compensated_sum(values.iter().map(|v| (v - reference) * (v - reference)));
    (ss / values.len() as f64).sqrt()
}

/// For each `N`, runs `replicates` independent MLMC estimates (replicate `r`
/// uses seed `seed + r`) and summarizes their error against `reference`.
#[allow(clippy::too_many_arguments)]
pub fn rmse_curve(
    problem: &SdeProblem,
    scheme: Scheme,
    payoff: Payoff,
    steps_list: &[usize],
    replicates: usize,
    reference: f64,
    seed: u64,
    exec: &Executor,
) -> Result<Vec<RmseRow>> {
    if replicates < 2 {
        return Err(Error::invalid("replicates", "need at least 2"));
    }
    if !reference.is_finite() {
        return Err(Error::invalid("reference", "must be finite"));
    }
    steps_list
        .iter()
        .map(|&steps| {
            let reports = (0..replicates as u64)
                .map(|r| {
                    mlmc(
                        problem,
                        scheme,
                        payoff,
                        steps,
                        replicate_seed(seed, r),
                        exec,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let values: Vec<f64> = reports.iter().map(|r| r.value).collect();
            let (mean_value, standard_error) = mean_and_standard_error(&values);
            Ok(RmseRow {
                steps,
                replicates,
                rmse: rmse(&values, reference),
                mean_value,
                standard_error,
                mean_runtime_seconds: reports.iter().map(|r| r.runtime_seconds).sum::<f64>()
                    / replicates as f64,
                diverged_count: reports.iter().filter(|r| r.diverged).count(),
            })
        })
        .collect()
}
