//! Level statistics of the initial values behind a multilevel Euler run on
//! `dX = -X^5 dt`.
//!
//! For the x^5 equation all randomness of the multilevel estimator sits in
//! the initial values `xi^{l,k}`. The statistics here locate the highest
//! level that contains an initial value beyond the explosion threshold of
//! its fine path, which is the level that dominates the estimator once the
//! Euler iterates blow up.

use crate::error::{Error, Result};
use crate::estimators::levels_of;
use crate::parallel::Executor;
use crate::randomness::{derive_stream, replicate_seed, standard_normal, StreamId};

pub const DEFAULT_DELTA: f64 = 0.25;

/// The initial values `xi^{l,k}`, `l = 0..=log2(N)`, `k = 1..=N/2^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialArray {
    horizon: f64,
    sigma_bar: f64,
    steps: usize,
    levels: Vec<Vec<f64>>,
}

impl InitialArray {
    /// `levels[l]` must hold exactly `N / 2^l` values.
    pub fn new(horizon: f64, sigma_bar: f64, steps: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        let top = levels_of(steps).map_err(|e| Error::MalformedInitialArray(e.to_string()))?;
        if !(horizon > 0.0) {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        if !(sigma_bar >= 0.0) {
            return Err(Error::invalid("sigma_bar", "must be nonnegative"));
        }
        if levels.len() != top as usize + 1 {
            return Err(Error::MalformedInitialArray(format!(
                "expected {} levels, got {}",
                top + 1,
                levels.len()
            )));
        }
        for (l, values) in levels.iter().enumerate() {
            if values.len() != steps >> l {
                return Err(Error::MalformedInitialArray(format!(
                    "level {l} has {} entries, expected {}",
                    values.len(),
                    steps >> l
                )));
            }
        }
        Ok(Self {
            horizon,
            sigma_bar,
            steps,
            levels,
        })
    }

    /// The values a multilevel run with master seed `seed` starts from:
    /// `xi^{l,k}` is drawn from stream `(l, k, initial)`.
    pub fn sample(sigma_bar: f64, horizon: f64, steps: usize, seed: u64) -> Result<Self> {
        let top = levels_of(steps)?;
        let levels = (0..=top)
            .map(|l| {
                (1..=(steps >> l) as u64)
                    .map(|k| {
                        let mut rng = derive_stream(seed, StreamId::initial(l, k));
                        sigma_bar * standard_normal(&mut rng)
                    })
                    .collect()
            })
            .collect();
        Self::new(horizon, sigma_bar, steps, levels)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    pub fn top_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, l: u32) -> &[f64] {
        &self.levels[l as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    /// Highest level `l >= 1` holding some `|xi^{l,k}| > 2^{l/4} T^{-1/4}`, or 1.
    pub l_n: u32,
    /// `max_k |xi^{L_N,k}|`.
    pub eta_n: f64,
    /// `max_k |xi^{L_N - 1,k}|`; taken over level 0 when `L_N = 1`.
    pub theta_n: f64,
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
    pub delta: f64,
}

impl LevelStats {
    pub fn any_event(&self) -> bool {
        self.a1 || self.a2 || self.a3 || self.a4
    }
}

fn level_threshold(l: u32, horizon: f64) -> f64 {
    2f64.powf(l as f64 / 4.0) * horizon.powf(-0.25)
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `floor(2 log2(sigma_bar^2 sqrt(T) ln N))`, possibly negative or `-inf`.
fn critical_level(sigma_bar: f64, horizon: f64, steps: usize) -> f64 {
    (2.0 * (sigma_bar * sigma_bar * horizon.sqrt() * (steps as f64).ln()).log2()).floor()
}

pub fn compute_level_stats(init: &InitialArray, delta: f64) -> Result<LevelStats> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::invalid(
            "delta",
            format!("must lie in (0, 1/2), got {delta}"),
        ));
    }
    let t = init.horizon;
    let top = init.top_level();

    let l_n = (1..=top)
        .rev()
        .find(|&l| {
            init.level(l)
                .iter()
                .any(|x| x.abs() > level_threshold(l, t))
        })
        .unwrap_or(1);
    let eta_n = max_abs(init.level(l_n));
    let theta_n = max_abs(init.level(l_n - 1));

    let critical = critical_level(init.sigma_bar, t, init.steps);
    let a1 = (l_n as f64) < critical;

    let n = init.steps as f64;
    let a2 = (0..=top).any(|l| {
        let bound = 2f64.powf((l as f64 - 1.0) / 4.0) * t.powf(-0.25) * n;
        init.level(l).iter().any(|x| x.abs() >= bound)
    });

    // l ranges over the naturals between the critical level and log2(N) + 1
    let lowest = if critical.is_finite() {
        critical.max(1.0)
    } else {
        1.0
    };
    let a3 = if critical > (top + 1) as f64 {
        false
    } else {
        (lowest as u32..=top + 1).any(|l| {
            let lower = level_threshold(l, t);
            let upper = lower * (1.0 + 5f64.powf(-delta * 2f64.powi(l as i32 - 1)));
            lower <= eta_n && eta_n < upper
        })
    };

    let a4 = (eta_n - theta_n).abs() <= 4f64.powf(-(2f64.powi(l_n as i32 - 1))) * eta_n;

    Ok(LevelStats {
        l_n,
        eta_n,
        theta_n,
        a1,
        a2,
        a3,
        a4,
        delta,
    })
}

/// Whether the noise-free Euler recursion for `-x^5` with `N` steps started
/// at `xi` grows strictly in magnitude: `|xi| > (2N/T)^{1/4}`.
pub fn explosion_predicate(xi: f64, steps: usize, horizon: f64) -> bool {
    xi.abs() > (2.0 * steps as f64 / horizon).powf(0.25)
}

/// Per-replicate statistics as emitted by the `diagnose` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStatsSample {
    pub steps: usize,
    pub replicate: usize,
    pub stats: LevelStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendRow {
    pub steps: usize,
    pub replicates: usize,
    pub mean_l_n: f64,
    /// Fraction of replicates in `A1 u A2 u A3 u A4`.
    pub event_fraction: f64,
    pub a1_fraction: f64,
    pub a2_fraction: f64,
    pub a3_fraction: f64,
    pub a4_fraction: f64,
}

/// Level statistics for each `N` and replicate `r` (seed `seed + r`).
pub fn level_stats_samples(
    sigma_bar: f64,
    horizon: f64,
    steps_list: &[usize],
    replicates: usize,
    seed: u64,
    delta: f64,
    exec: &Executor,
) -> Result<Vec<LevelStatsSample>> {
    for &n in steps_list {
        levels_of(n)?;
    }
    let cells: Vec<(usize, usize)> = steps_list
        .iter()
        .flat_map(|&n| (0..replicates).map(move |r| (n, r)))
        .collect();
    exec.map(cells.len(), |i| {
        let (steps, replicate) = cells[i];
        let init = InitialArray::sample(
            sigma_bar,
            horizon,
            steps,
            replicate_seed(seed, replicate as u64),
        )?;
        Ok(LevelStatsSample {
            steps,
            replicate,
            stats: compute_level_stats(&init, delta)?,
        })
    })
    .into_iter()
    .collect()
}

pub fn level_stats_trend(
    sigma_bar: f64,
    horizon: f64,
    steps_list: &[usize],
    replicates: usize,
    seed: u64,
    delta: f64,
    exec: &Executor,
) -> Result<Vec<TrendRow>> {
    if replicates == 0 {
        return Ok(Vec::new());
    }
    let samples = level_stats_samples(
        sigma_bar, horizon, steps_list, replicates, seed, delta, exec,
    )?;
    let r = replicates as f64;
    Ok(samples
        .chunks(replicates)
        .map(|chunk| {
            let frac = |f: fn(&LevelStats) -> bool| {
                chunk.iter().filter(|s| f(&s.stats)).count() as f64 / r
            };
            TrendRow {
                steps: chunk[0].steps,
                replicates,
                mean_l_n: chunk.iter().map(|s| s.stats.l_n as f64).sum::<f64>() / r,
                event_fraction: frac(LevelStats::any_event),
                a1_fraction: frac(|s| s.a1),
                a2_fraction: frac(|s| s.a2),
                a3_fraction: frac(|s| s.a3),
                a4_fraction: frac(|s| s.a4),
            }
        })
        .collect())
}
