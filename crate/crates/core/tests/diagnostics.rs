mod common;

use common::{brute_force_stats, random_initial_array};
use mlmc_sde::diagnostics::{
    compute_level_stats, explosion_predicate, level_stats_samples, level_stats_trend, InitialArray,
};
use mlmc_sde::randomness::{derive_stream, standard_normal, StreamId};
use mlmc_sde::Executor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), delta in 0.01..0.49f64) {
        let init = random_initial_array(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
        let fast = compute_level_stats(&init, delta).unwrap();
        prop_assert_eq!(fast, brute_force_stats(&init, delta));
    }

    #[test]
    fn level_is_the_highest_exceedance(seed in any::<u64>()) {
        let init = random_initial_array(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
        let s = compute_level_stats(&init, 0.25).unwrap();
        let t = init.horizon();
        let exceeds = |l: u32| init.level(l).iter().any(|x| x.abs() > 2f64.powf(l as f64 / 4.0) * t.powf(-0.25));
        prop_assert!(s.l_n >= 1 && s.l_n <= init.top_level());
        if s.l_n > 1 {
            prop_assert!(exceeds(s.l_n));
        }
        prop_assert!((s.l_n + 1..=init.top_level()).all(|l| !exceeds(l)));
    }
}

#[test]
fn hand_example() {
    // N = 4, T = 1: xi^{2,1} = 2 exceeds 2^{1/2}
    let init =
        InitialArray::new(1.0, 1.0, 4, vec![vec![0.01; 4], vec![0.3, -0.5], vec![2.0]]).unwrap();
    let s = compute_level_stats(&init, 0.25).unwrap();
    assert_eq!((s.l_n, s.eta_n, s.theta_n), (2, 2.0, 0.5));
}

#[test]
fn sampled_array_uses_the_estimator_streams() {
    let init = InitialArray::sample(0.5, 1.0, 32, 77).unwrap();
    for l in 0..=5u32 {
        for (i, &x) in init.level(l).iter().enumerate() {
            let z = standard_normal(&mut derive_stream(77, StreamId::initial(l, i as u64 + 1)));
            assert_eq!(x, 0.5 * z);
        }
    }
}

#[test]
fn predicate_examples() {
    assert!(explosion_predicate(2.2, 8, 1.0));
    assert!(!explosion_predicate(2.0, 8, 1.0));
    assert!(!explosion_predicate(0.0, 8, 1.0));
    assert!(explosion_predicate(-2.2, 8, 1.0));
}

/// Spearman rank correlation, ties get their average rank.
fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let m = (n - 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
    let var = |r: &[f64]| r.iter().map(|a| (a - m) * (a - m)).sum::<f64>();
    cov / (var(&rx) * var(&ry)).sqrt()
}

#[test]
fn level_grows_with_n() {
    let steps: Vec<usize> = (4..=16).map(|k| 1 << k).collect();
    let rows = level_stats_trend(1.0, 1.0, &steps, 200, 42, 0.25, &Executor::sequential()).unwrap();
    let xs: Vec<f64> = rows.iter().map(|r| r.steps as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_l_n).collect();
    let rho = spearman(&xs, &ys);
    assert!(rho > 0.0, "rho {rho}, means {ys:?}");
}

#[test]
fn a2_is_negligible() {
    let rows =
        level_stats_trend(1.0, 1.0, &[1 << 10], 2000, 1, 0.25, &Executor::sequential()).unwrap();
    assert!(rows[0].a2_fraction < 1e-3);
}

#[test]
fn empty_trend_and_bad_input() {
    let exec = Executor::sequential();
    assert!(level_stats_trend(1.0, 1.0, &[16], 0, 1, 0.25, &exec)
        .unwrap()
        .is_empty());
    assert!(level_stats_samples(1.0, 1.0, &[12], 1, 1, 0.25, &exec).is_err());
    let init = InitialArray::sample(1.0, 1.0, 8, 1).unwrap();
    assert!(compute_level_stats(&init, 0.5).is_err());
    assert!(compute_level_stats(&init, 0.0).is_err());
}

#[test]
fn samples_do_not_depend_on_worker_count() {
    let steps = [16usize, 256, 4096];
    let a = level_stats_samples(
        1.0,
        1.0,
        &steps,
        8,
        5,
        0.25,
        &Executor::with_workers(1).unwrap(),
    )
    .unwrap();
    let b = level_stats_samples(
        1.0,
        1.0,
        &steps,
        8,
        5,
        0.25,
        &Executor::with_workers(8).unwrap(),
    )
    .unwrap();
    assert_eq!(a, b);
}
