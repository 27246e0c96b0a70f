#![allow(dead_code)]

use mlmc_sde::diagnostics::{InitialArray, LevelStats};
use mlmc_sde::schemes::{x5_log_magnitudes, x5_stability_bound};
use rand::Rng;

/// `a <= b` up to `1e-9` relative in log space.
pub fn log_le(a: f64, b: f64) -> bool {
    if a == f64::NEG_INFINITY || b == f64::INFINITY {
        return true;
    }
    a <= b + 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// One randomized instance of the growth lemmas for `y_{n+1} = y_n - h y_n^5`.
#[derive(Debug, Clone, Copy)]
pub struct LemmaInstance {
    pub steps: usize,
    pub horizon: f64,
    /// `|x_small| <= (2N/T)^{1/4}`.
    pub x_small: f64,
    /// `|x_big| >= (2N/T)^{1/4}`.
    pub x_big: f64,
    /// `|y| <= |x_big|`.
    pub y: f64,
    pub m: f64,
    pub r: f64,
    /// Steps for the lower bound, kept at most 32 so that
    /// `1 + 5^{-rN}` stays resolvable in double precision.
    pub lower_steps: usize,
    /// `|x_lower| >= (2N/T)^{1/4} (1 + 5^{-rN})` with `N = lower_steps`.
    pub x_lower: f64,
}

fn signed<R: Rng>(x: f64, rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        x
    } else {
        -x
    }
}

impl LemmaInstance {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let steps = rng.random_range(1..=256usize);
        let horizon = rng.random_range(0.25..4.0);
        let c = x5_stability_bound(steps, horizon);
        // starts are kept at least 1e-11 relative away from the threshold:
        // at the threshold itself the first rounding error decides between
        // growth and decay
        let excess = |rng: &mut R| 1.0 + (rng.random_range(-25.0..1.5f64)).exp();
        let x_small = signed(c * rng.random_range(0.0..=1.0 - 1e-11), rng);
        let x_big = signed(c * excess(rng), rng);
        let y = signed(x_big.abs() * rng.random_range(0.0..=1.0), rng);
        let m = rng.random_range(0.0..10f64.ln()).exp();
        let r = if rng.random_bool(0.5) { 0.25 } else { 0.5 };
        let lower_steps = rng.random_range(1..=32usize);
        let cl = x5_stability_bound(lower_steps, horizon);
        let x_lower = signed(
            cl * (1.0 + 5f64.powf(-r * lower_steps as f64)) * excess(rng),
            rng,
        );
        Self {
            steps,
            horizon,
            x_small,
            x_big,
            y,
            m,
            r,
            lower_steps,
            x_lower,
        }
    }

    /// Names of the violated statements.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let (n_steps, t) = (self.steps, self.horizon);
        let c = x5_stability_bound(n_steps, t);
        let ln_c = c.ln();
        let h = t / n_steps as f64;
        let pow5 = |n: usize| 5f64.powi(n as i32);

        let small = x5_log_magnitudes(self.x_small, n_steps, t);
        let l0 = self.x_small.abs().ln();
        if !small.iter().all(|&l| log_le(l, l0) && log_le(l0, ln_c)) {
            out.push("stability");
        }

        let big = x5_log_magnitudes(self.x_big, n_steps, t);
        let lx = self.x_big.abs().ln();
        if !big.iter().all(|&l| log_le(lx, l) && log_le(ln_c, lx)) {
            out.push("instability");
        }
        // |y_{n+1}| = |y_n| (h y_n^4 - 1) on the representable iterates
        let mut yn = self.x_big;
        for _ in 0..n_steps {
            let next = yn - h * yn.powi(5);
            if !next.is_finite() || !(yn.powi(5)).is_finite() {
                break;
            }
            let expected = yn.abs() * (h * yn.powi(4) - 1.0);
            if (next.abs() - expected).abs() > 1e-12 * expected.abs().max(f64::MIN_POSITIVE) {
                out.push("instability identity");
                break;
            }
            yn = next;
        }

        let q = 0.25 * (t / n_steps as f64).ln();
        if !big
            .iter()
            .enumerate()
            .all(|(n, &l)| log_le(q + l, pow5(n) * (q + lx)))
        {
            out.push("growth bound");
        }

        let by = x5_log_magnitudes(self.y, n_steps, t);
        if !big.iter().zip(&by).all(|(&lx, &ly)| log_le(ly, lx)) {
            out.push("monotonicity");
        }

        let ln_m = self.m.ln();
        let scaled = x5_log_magnitudes(self.m * self.x_big, n_steps, t);
        if !scaled
            .iter()
            .zip(&big)
            .enumerate()
            .all(|(n, (&lmx, &lx))| log_le(pow5(n) * ln_m + lx, lmx))
        {
            out.push("initial multiple");
        }

        let x_far = self.m * self.x_big;
        if !scaled
            .iter()
            .enumerate()
            .all(|(n, &l)| log_le(pow5(n) * ln_m + ln_c, l))
            || !log_le((self.m * c).ln(), x_far.abs().ln())
        {
            out.push("double growth");
        }

        let nl = self.lower_steps;
        let lower = x5_log_magnitudes(self.x_lower, nl, t);
        let bound = x5_stability_bound(nl, t).ln() + 0.5 * 5f64.powf((1.0 - self.r) * nl as f64);
        if !log_le(bound, lower[nl]) {
            out.push("lower bound");
        }
        out
    }
}

/// Direct transcription of the level statistics, enumerating every
/// `(l, k)` pair.
pub fn brute_force_stats(init: &InitialArray, delta: f64) -> LevelStats {
    let t = init.horizon();
    let n = init.steps();
    let ld = init.top_level();
    let threshold = |l: u32| 2f64.powf(l as f64 / 4.0) * t.powf(-0.25);

    let mut candidates = vec![1u32];
    for l in 1..=ld {
        for k in 0..(n >> l) {
            if init.level(l)[k].abs() > threshold(l) {
                candidates.push(l);
            }
        }
    }
    let l_n = *candidates.iter().max().unwrap();

    let level_max = |l: u32| {
        let mut v: Vec<f64> = init.level(l).iter().map(|x| x.abs()).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        *v.last().unwrap()
    };
    let eta = level_max(l_n);
    let theta = level_max(l_n - 1);

    let s = init.sigma_bar();
    let crit = (2.0 * (s * s * t.sqrt() * (n as f64).ln()).log2()).floor();
    let a1 = (l_n as f64) < crit;

    let mut a2 = false;
    for l in 0..=ld {
        for k in 0..(n >> l) {
            if init.level(l)[k].abs()
                >= 2f64.powf((l as f64 - 1.0) / 4.0) * t.powf(-0.25) * n as f64
            {
                a2 = true;
            }
        }
    }

    let mut a3 = false;
    for l in 1..=ld + 1 {
        if (l as f64) < crit {
            continue;
        }
        let lo = threshold(l);
        let hi = lo * (1.0 + 5f64.powf(-delta * 2f64.powf(l as f64 - 1.0)));
        if lo <= eta && eta < hi {
            a3 = true;
        }
    }

    let a4 = (eta - theta).abs() <= 4f64.powf(-(2f64.powf(l_n as f64 - 1.0))) * eta;

    LevelStats {
        l_n,
        eta_n: eta,
        theta_n: theta,
        a1,
        a2,
        a3,
        a4,
        delta,
    }
}

/// Random initial array with `N <= 2^8`, mixing normal draws with values
/// placed exactly on the level thresholds and near the event boundaries.
pub fn random_initial_array<R: Rng>(rng: &mut R) -> InitialArray {
    let ld = rng.random_range(1..=8u32);
    let n = 1usize << ld;
    let horizon: f64 = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let sigma_bar = [0.1, 1.0 / 3.0, 1.0, 2.0, 4.0][rng.random_range(0..5)];
    let levels = (0..=ld)
        .map(|l| {
            (0..(n >> l))
                .map(|_| {
                    let threshold = 2f64.powf(l as f64 / 4.0) * horizon.powf(-0.25);
                    let u: f64 = rng.random();
                    if u < 0.05 {
                        threshold
                    } else if u < 0.1 {
                        -threshold
                            * (1.0
                                + 5f64.powf(-0.25 * 2f64.powi(l as i32 - 1)) * rng.random::<f64>())
                    } else if u < 0.12 {
                        2f64.powf((l as f64 - 1.0) / 4.0) * horizon.powf(-0.25) * n as f64
                    } else {
                        let z: f64 = rng.sample(rand_distr::StandardNormal);
                        sigma_bar * z
                    }
                })
                .collect()
        })
        .collect();
    InitialArray::new(horizon, sigma_bar, n, levels).unwrap()
}
