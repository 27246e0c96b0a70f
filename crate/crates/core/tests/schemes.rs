mod common;

use common::{log_le, LemmaInstance};
use mlmc_sde::diagnostics::explosion_predicate;
use mlmc_sde::problems::{make_ginzburg_landau, make_langevin, make_x5_problem, InitialLaw};
use mlmc_sde::schemes::{
    deterministic_x5_path, implicit_euler_langevin, solve_radial, tamed_euler, x5_log_magnitudes,
    x5_stability_bound, IMPLICIT_MAX_ITER, IMPLICIT_TOL,
};
use mlmc_sde::{IncrementGrid, Scheme};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn growth_lemmas_hold(seed in any::<u64>()) {
        let inst = LemmaInstance::random(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
        prop_assert!(inst.violations().is_empty(), "{:?}: {:?}", inst, inst.violations());
    }

    #[test]
    fn stable_start_never_grows(frac in 0.0..=1.0f64, steps in 1usize..512, t in 0.1..5.0f64) {
        let x = frac * x5_stability_bound(steps, t);
        let path = deterministic_x5_path(x, steps, t).unwrap();
        for &y in path.scalar_states().iter() {
            prop_assert!(y.abs() <= x.abs());
        }
    }

    #[test]
    fn predicate_matches_dynamics(xi in -6.0..6.0f64, ld in 0u32..=6) {
        let steps = 1usize << ld;
        let logs = x5_log_magnitudes(xi, steps, 1.0);
        if explosion_predicate(xi, steps, 1.0) {
            prop_assert!(logs.windows(2).all(|w| w[1] > w[0]));
        } else {
            let l0 = xi.abs().ln();
            prop_assert!(logs.iter().all(|&l| log_le(l, l0)));
        }
    }

    #[test]
    fn tamed_noise_free_stays_bounded(x in -1e6..1e6f64, ld in 0u32..=10) {
        let steps = 1usize << ld;
        let problem = make_x5_problem(0.0, 1.0).unwrap();
        let inc = IncrementGrid::zeros(steps, 1.0 / steps as f64, 1).unwrap();
        let path = tamed_euler(&problem, &[x], &inc).unwrap();
        let states = path.scalar_states();
        for w in states.windows(2) {
            // each tamed step moves by less than one and towards zero
            prop_assert!((w[1] - w[0]).abs() <= 1.0 + 4.0 * f64::EPSILON * w[0].abs().max(1.0));
            prop_assert!(w[1].abs() <= w[0].abs().max(1.0));
        }
    }

    #[test]
    fn radial_root_solves_cubic(h in 1e-6..1.0f64, target in 0.0..50.0f64) {
        let s = solve_radial(h, target, IMPLICIT_TOL, IMPLICIT_MAX_ITER).unwrap();
        let r = s.radius;
        prop_assert!(r >= 0.0 && r <= (target / h).cbrt() && r <= target / (1.0 - h));
        let residual = (h * r * r * r + (1.0 - h) * r - target).abs();
        prop_assert!(residual <= 1e-12 * target.max(1.0));
    }

    #[test]
    fn implicit_step_satisfies_equation(
        y in prop::collection::vec(-3.0..3.0f64, 3),
        dw in prop::collection::vec(-1.0..1.0f64, 3),
        ld in 0u32..=8,
    ) {
        let steps = 1usize << ld;
        let h = 1.0 / steps as f64;
        let mut incs = dw.clone();
        incs.extend(std::iter::repeat_n(0.0, 3 * (steps - 1)));
        let grid = IncrementGrid::from_increments(h, 3, incs).unwrap();
        let path = implicit_euler_langevin(3, &y, &grid, IMPLICIT_TOL, IMPLICIT_MAX_ITER).unwrap();
        let next = path.state(1);
        let sq: f64 = next.iter().map(|v| v * v).sum();
        for i in 0..3 {
            let lhs = next[i] - h * (next[i] - sq * next[i]);
            prop_assert!((lhs - y[i] - dw[i]).abs() <= 1e-10);
        }
    }
}

#[test]
fn instability_boundary_flips_sign() {
    // the boundary is a repelling 2-cycle; rounding grows by a factor 9 per
    // step, so only the first few iterates can be compared
    for steps in [1usize, 4, 32, 256] {
        let c = x5_stability_bound(steps, 1.0);
        let path = deterministic_x5_path(c, steps, 1.0).unwrap();
        let states = path.scalar_states();
        for (n, &y) in states.iter().enumerate().take(6) {
            assert!((y.abs() - c).abs() <= 1e-9 * c, "N={steps} n={n} y={y}");
            assert_eq!(y.signum(), if n % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
}

#[test]
fn euler_matches_hand_recursion() {
    // dX = (2X - X^3) dt + 2X dW, one step by hand
    let problem = make_ginzburg_landau();
    let grid = IncrementGrid::from_increments(0.5, 1, vec![0.3, -0.2]).unwrap();
    let path = Scheme::ExplicitEuler
        .simulate(&problem, &[1.0], &grid)
        .unwrap();
    let y1: f64 = 1.0 + (2.0 - 1.0) * 0.5 + 2.0 * 0.3;
    let y2 = y1 + (2.0 * y1 - y1.powi(3)) * 0.5 + 2.0 * y1 * -0.2;
    assert_eq!(path.scalar_states(), vec![1.0, y1, y2]);
}

#[test]
fn tamed_matches_hand_recursion() {
    let problem = make_ginzburg_landau();
    let grid = IncrementGrid::from_increments(0.5, 1, vec![0.3, -0.2]).unwrap();
    let path = Scheme::TamedEuler
        .simulate(&problem, &[1.0], &grid)
        .unwrap();
    let step = |y: f64, dw: f64| {
        let a = (2.0 * y - y.powi(3)) * 0.5;
        y + a / (1.0 + a.abs()) + 2.0 * y * dw
    };
    let y1 = step(1.0, 0.3);
    let y2 = step(y1, -0.2);
    let got = path.scalar_states();
    assert!((got[1] - y1).abs() < 1e-15 && (got[2] - y2).abs() < 1e-15);
}

#[test]
fn implicit_and_tamed_agree_on_fine_grid() {
    // both converge strongly, so on one Brownian path with a fine grid they are close
    let problem = make_langevin(2).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let steps = 1 << 14;
    let grid =
        mlmc_sde::randomness::sample_increments(&mut rng, steps, 1.0 / steps as f64, 2).unwrap();
    let init = [0.5, -0.25];
    let a = Scheme::ImplicitEuler
        .simulate(&problem, &init, &grid)
        .unwrap();
    let b = Scheme::TamedEuler.simulate(&problem, &init, &grid).unwrap();
    let gap = (0..=steps)
        .map(|n| {
            a.state(n)
                .iter()
                .zip(b.state(n))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    assert!(gap < 0.02, "gap {gap}");
}

#[test]
fn interpolation_is_linear_between_vertices() {
    let problem = make_x5_problem(0.0, 1.0)
        .unwrap()
        .with_initial_law(InitialLaw::PointMass(vec![0.9]))
        .unwrap();
    let grid = IncrementGrid::zeros(4, 0.25, 1).unwrap();
    let path = Scheme::ExplicitEuler
        .simulate(&problem, &[0.9], &grid)
        .unwrap();
    let s = path.scalar_states();
    for n in 0..4 {
        for w in [0.0, 0.25, 0.5, 0.9] {
            let t = (n as f64 + w) * 0.25;
            let expected = (1.0 - w) * s[n] + w * s[n + 1];
            assert!((path.interpolate(t).unwrap()[0] - expected).abs() < 1e-15);
        }
    }
    assert_eq!(path.interpolate(1.0).unwrap()[0], s[4]);
    assert!(path.interpolate(1.5).is_err());
}
