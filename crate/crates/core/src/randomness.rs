//! Reproducible random streams.
//!
//! Every random quantity an estimator consumes is drawn from a stream that is
//! a pure function of the master seed and a [`StreamId`]. Workers can
//! therefore evaluate samples in any order and on any thread without changing
//! a single bit of the result.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::problems::{InitialLaw, SdeProblem};

pub const DEFAULT_SEED: u64 = 42;

/// Environment variable that overrides the default master seed on the CLI.
pub const SEED_ENV: &str = "MLMC_SEED";

pub type StreamRng = Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Initial,
    Brownian,
    Reference,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Initial => 0x1,
            StreamPurpose::Brownian => 0x2,
            StreamPurpose::Reference => 0x3,
        }
    }
}

/// Identifies the stream behind `xi^{l,k}` or `W^{l,k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub level: u32,
    pub sample: u64,
    pub purpose: StreamPurpose,
}

impl StreamId {
    pub fn new(level: u32, sample: u64, purpose: StreamPurpose) -> Self {
        Self {
            level,
            sample,
            purpose,
        }
    }

    pub fn initial(level: u32, sample: u64) -> Self {
        Self::new(level, sample, StreamPurpose::Initial)
    }

    pub fn brownian(level: u32, sample: u64) -> Self {
        Self::new(level, sample, StreamPurpose::Brownian)
    }

    pub fn reference(sample: u64) -> Self {
        Self::new(0, sample, StreamPurpose::Reference)
    }
}

#[inline]
fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `(master_seed, id)`.
pub fn derive_stream(master_seed: u64, id: StreamId) -> StreamRng {
    let mut key = splitmix64(master_seed);
    key = splitmix64(key ^ ((id.level as u64) << 8 | id.purpose.tag()));
    key = splitmix64(key ^ id.sample);
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(key.wrapping_add((i as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    StreamRng::from_seed(seed)
}

/// Seed of replicate `r` in a batch of independent estimator runs.
pub fn replicate_seed(master_seed: u64, replicate: u64) -> u64 {
    master_seed.wrapping_add(replicate)
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws `X_0` from the problem's initial law.
pub fn sample_initial<R: Rng + ?Sized>(problem: &SdeProblem, rng: &mut R) -> Vec<f64> {
    match problem.initial_law() {
        InitialLaw::PointMass(x) => x.clone(),
        InitialLaw::Normal { std_dev } => (0..problem.dim())
            .map(|_| std_dev * standard_normal(rng))
            .collect(),
    }
}

/// Brownian increments on a uniform grid: `steps` vectors in `R^m`, stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementGrid {
    steps: usize,
    dt: f64,
    noise_dim: usize,
    increments: Vec<f64>,
}

impl IncrementGrid {
    pub fn from_increments(dt: f64, noise_dim: usize, increments: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if noise_dim == 0 || increments.is_empty() || !increments.len().is_multiple_of(noise_dim) {
            return Err(Error::invalid(
                "increments",
                format!(
                    "length {} is not a positive multiple of {noise_dim}",
                    increments.len()
                ),
            ));
        }
        Ok(Self {
            steps: increments.len() / noise_dim,
            dt,
            noise_dim,
            increments,
        })
    }

    /// A grid of `steps` zero increments.
    pub fn zeros(steps: usize, dt: f64, noise_dim: usize) -> Result<Self> {
        Self::from_increments(dt, noise_dim, vec![0.0; steps * noise_dim])
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    #[inline]
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.noise_dim..(n + 1) * self.noise_dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.increments.chunks_exact(self.noise_dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.increments
    }

    /// Brownian path `W_{t_0}, ..., W_{t_N}` with `W_0 = 0`, row-major.
    pub fn brownian_path(&self) -> Vec<f64> {
        let m = self.noise_dim;
        let mut path = vec![0.0; (self.steps + 1) * m];
        for n in 0..self.steps {
            for j in 0..m {
                path[(n + 1) * m + j] = path[n * m + j] + self.increments[n * m + j];
            }
        }
        path
    }

    /// Pairwise sums of consecutive increments: the same Brownian path seen
    /// on the grid with half as many steps.
    pub fn coarsen(&self) -> Result<IncrementGrid> {
        if !self.steps.is_multiple_of(2) {
            return Err(Error::OddSteps(self.steps));
        }
        let m = self.noise_dim;
        let mut coarse = Vec::with_capacity(self.increments.len() / 2);
        for pair in self.increments.chunks_exact(2 * m) {
            let (a, b) = pair.split_at(m);
            coarse.extend(a.iter().zip(b).map(|(x, y)| x + y));
        }
        Ok(IncrementGrid {
            steps: self.steps / 2,
            dt: 2.0 * self.dt,
            noise_dim: m,
            increments: coarse,
        })
    }
}

/// `steps` independent `N(0, dt I_m)` increments.
pub fn sample_increments<R: Rng + ?Sized>(
    rng: &mut R,
    steps: usize,
    dt: f64,
    noise_dim: usize,
) -> Result<IncrementGrid> {
    if steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let sd = dt.sqrt();
    let increments = (0..steps * noise_dim)
        .map(|_| sd * standard_normal(rng))
        .collect();
    IncrementGrid::from_increments(dt, noise_dim, increments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_ginzburg_landau, make_x5_problem};
    use rand::RngCore;
    use std::collections::HashSet;

    fn first_outputs(seed: u64, id: StreamId) -> [u64; 16] {
        let mut rng = derive_stream(seed, id);
        std::array::from_fn(|_| rng.next_u64())
    }

    #[test]
    fn same_stream_is_reproducible() {
        let id = StreamId::brownian(3, 17);
        assert_eq!(first_outputs(42, id), first_outputs(42, id));
    }

    #[test]
    fn distinct_ids_and_seeds_give_distinct_streams() {
        let mut seen = HashSet::new();
        let purposes = [
            StreamPurpose::Initial,
            StreamPurpose::Brownian,
            StreamPurpose::Reference,
        ];
        for level in 0..20u32 {
            for sample in 1..=200u64 {
                for purpose in purposes {
                    let out = first_outputs(42, StreamId::new(level, sample, purpose));
                    assert!(
                        seen.insert(out),
                        "collision at {level} {sample} {purpose:?}"
                    );
                }
            }
        }
        let id = StreamId::initial(0, 1);
        for seed in 0..10_000u64 {
            assert_ne!(first_outputs(seed, id), first_outputs(seed + 1, id));
        }
    }

    #[test]
    fn point_mass_initial_is_exact() {
        let p = make_ginzburg_landau();
        let mut rng = derive_stream(1, StreamId::initial(0, 1));
        assert_eq!(sample_initial(&p, &mut rng), vec![1.0]);
    }

    #[test]
    fn normal_initial_mean_and_variance() {
        let p = make_x5_problem(1.0, 1.0).unwrap();
        let mut rng = derive_stream(5, StreamId::initial(0, 1));
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_initial(&p, &mut rng)[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 0.004, "mean {mean}");

        let p = make_x5_problem(0.1, 1.0).unwrap();
        let draws: Vec<f64> = (0..n).map(|_| sample_initial(&p, &mut rng)[0]).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((0.0099..=0.0101).contains(&var), "variance {var}");
    }

    #[test]
    fn increments_shape_and_variance() {
        let mut rng = derive_stream(9, StreamId::brownian(1, 1));
        let g = sample_increments(&mut rng, 1, 0.5, 2).unwrap();
        assert_eq!((g.steps(), g.increment(0).len()), (1, 2));

        let reps = 100_000;
        let totals: Vec<f64> = (0..reps)
            .map(|_| {
                sample_increments(&mut rng, 4, 0.25, 1)
                    .unwrap()
                    .as_slice()
                    .iter()
                    .sum()
            })
            .collect();
        let var = totals.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        assert!((var - 1.0).abs() < 0.02, "Var W_1 = {var}");

        let h = 0.01;
        let second_moment = |dt: f64, rng: &mut StreamRng| {
            let g = sample_increments(rng, reps, dt, 1).unwrap();
            g.as_slice().iter().map(|x| x * x).sum::<f64>() / reps as f64
        };
        let ratio = second_moment(4.0 * h, &mut rng) / second_moment(h, &mut rng);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn sample_increments_rejects_bad_input() {
        let mut rng = derive_stream(0, StreamId::brownian(0, 1));
        assert!(sample_increments(&mut rng, 0, 0.1, 1).is_err());
        assert!(sample_increments(&mut rng, 2, 0.0, 1).is_err());
    }

    #[test]
    fn coarsen_pairs_increments() {
        let fine = IncrementGrid::from_increments(0.25, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let coarse = fine.coarsen().unwrap();
        assert_eq!(coarse.as_slice(), &[3.0, 7.0]);
        assert_eq!(coarse.dt(), 0.5);
        assert_eq!(coarse.steps(), 2);

        let odd = IncrementGrid::from_increments(0.25, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(odd.coarsen(), Err(Error::OddSteps(3)));

        let eight = IncrementGrid::zeros(8, 0.125, 1).unwrap();
        let two = eight.coarsen().unwrap().coarsen().unwrap();
        assert_eq!((two.steps(), two.dt()), (2, 0.5));

        let vec2 = IncrementGrid::from_increments(0.5, 2, vec![1.0, 10.0, 2.0, 20.0]).unwrap();
        assert_eq!(vec2.coarsen().unwrap().as_slice(), &[3.0, 30.0]);
    }

    #[test]
    fn coarse_total_matches_pairwise_total() {
        let mut rng = derive_stream(3, StreamId::brownian(5, 2));
        let fine = sample_increments(&mut rng, 32, 1.0 / 32.0, 1).unwrap();
        let coarse = fine.coarsen().unwrap();
        let pairwise_total: f64 = fine
            .as_slice()
            .chunks_exact(2)
            .map(|p| p[0] + p[1])
            .fold(0.0, |acc, x| acc + x);
        let coarse_total: f64 = coarse.as_slice().iter().fold(0.0, |acc, x| acc + x);
        assert_eq!(coarse_total, pairwise_total);
    }
}
