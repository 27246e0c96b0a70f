//! Reference values: the closed-form solution of the x^5 equation, its
//! moments under a normal initial law, and the pathwise solution of the
//! stochastic Ginzburg-Landau equation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::parallel::Executor;
use crate::randomness::{derive_stream, standard_normal, IncrementGrid, StreamId};
use crate::stats::mean_and_standard_error;

/// Smallest fine grid accepted by [`gl_reference_value`].
pub const GL_MIN_FINE_STEPS: usize = 1 << 12;

/// Quadrature for `E|X_T|^p`.
///
/// The integrand `|xi|^p (1 + 4 T xi^4)^{-p/4}` has complex poles at
/// `|xi| = (4T)^{-1/4}`, so Gauss-Hermite converges slowly once
/// `sigma_bar` is of that size (about `1e-4` error at 64 nodes for
/// `sigma_bar = 1`); adaptive Simpson is the default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureSpec {
    /// `16 <= nodes <= 128`.
    GaussHermite { nodes: usize },
    /// Adaptive Simpson on `[-R sigma_bar, R sigma_bar]`.
    AdaptiveSimpson { abs_tol: f64, range_multiplier: f64 },
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::AdaptiveSimpson {
            abs_tol: 1e-8,
            range_multiplier: 12.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QuadratureSpec::GaussHermite { nodes } if !(16..=128).contains(&nodes) => Err(
                Error::invalid("nodes", format!("must lie in 16..=128, got {nodes}")),
            ),
            QuadratureSpec::AdaptiveSimpson { abs_tol, .. } if !(abs_tol > 0.0) => {
                Err(Error::invalid("abs_tol", "must be positive"))
            }
            QuadratureSpec::AdaptiveSimpson {
                range_multiplier, ..
            } if !(range_multiplier >= 8.0) => Err(Error::invalid(
                "range_multiplier",
                format!("must be at least 8, got {range_multiplier}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            QuadratureSpec::GaussHermite { nodes } => format!("gauss-hermite-{nodes}"),
            QuadratureSpec::AdaptiveSimpson { .. } => "adaptive-simpson".to_string(),
        }
    }
}

/// `X_t = xi / (1 + 4 t xi^4)^{1/4}`, the solution of `dX = -X^5 dt`.
pub fn exact_x5_terminal(xi: f64, t: f64) -> f64 {
    let q = xi * xi;
    let denom = 1.0 + 4.0 * t * q * q;
    if denom.is_finite() {
        xi / denom.sqrt().sqrt()
    } else {
        // xi^4 overflowed: X_t = sign(xi) / (xi^{-4} + 4t)^{1/4}
        let inv = 1.0 / q;
        xi.signum() / (inv * inv + 4.0 * t).sqrt().sqrt()
    }
}

/// `E|X_T|^p` for `X_0 ~ N(0, sigma_bar^2)`.
pub fn x5_expectation(sigma_bar: f64, horizon: f64, p: f64, spec: QuadratureSpec) -> Result<f64> {
    if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
        return Err(Error::invalid(
            "sigma_bar",
            format!("must be positive, got {sigma_bar}"),
        ));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    if !(p > 0.0) {
        return Err(Error::invalid("p", "must be positive"));
    }
    spec.validate()?;
    let moment = |x: f64| exact_x5_terminal(x, horizon).abs().powf(p);
    match spec {
        QuadratureSpec::AdaptiveSimpson {
            abs_tol,
            range_multiplier,
        } => {
            let norm = 1.0 / (sigma_bar * (2.0 * std::f64::consts::PI).sqrt());
            let integrand = |x: f64| {
                let z = x / sigma_bar;
                moment(x) * norm * (-0.5 * z * z).exp()
            };
            // the integrand is even
            let half =
                adaptive_simpson(integrand, 0.0, range_multiplier * sigma_bar, abs_tol / 2.0)?;
            Ok(2.0 * half)
        }
        QuadratureSpec::GaussHermite { nodes } => {
            let (x, w) = gauss_hermite_rule(nodes);
            let scale = std::f64::consts::SQRT_2 * sigma_bar;
            let sum: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * moment(scale * xi))
                .sum();
            Ok(sum / std::f64::consts::PI.sqrt())
        }
    }
}

const SIMPSON_MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst = 0.0_f64;
    let value = simpson_step(
        &f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        abs_tol,
        SIMPSON_MAX_DEPTH,
        &mut worst,
    );
    if worst > 0.0 || !value.is_finite() {
        return Err(Error::QuadratureFailed {
            requested: abs_tol,
            achieved: worst,
        });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    unresolved: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *unresolved = unresolved.max(delta.abs() / 15.0);
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, unresolved)
        + simpson_step(
            f,
            m,
            b,
            fm,
            frm,
            fb,
            right,
            tol / 2.0,
            depth - 1,
            unresolved,
        )
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for the weight
/// `exp(-x^2)`, by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Pathwise solution of `dX = (2X - X^3) dt + 2X dW`, `X_0 = 1`, at every
/// grid time: `X_t = exp(2 W_t) / sqrt(1 + 2 int_0^t exp(4 W_s) ds)` with the
/// integral by the trapezoid rule on the grid.
pub fn gl_exact_path(fine: &IncrementGrid) -> Result<Vec<f64>> {
    check_scalar(fine)?;
    let dt = fine.dt();
    let mut out = Vec::with_capacity(fine.steps() + 1);
    out.push(1.0);
    let mut w = 0.0;
    let mut e_prev = 1.0;
    let mut integral = 0.0;
    for &dw in fine.as_slice() {
        w += dw;
        let e = (4.0 * w).exp();
        integral += 0.5 * dt * (e_prev + e);
        e_prev = e;
        out.push((2.0 * w).exp() / (1.0 + 2.0 * integral).sqrt());
    }
    Ok(out)
}

/// Terminal value of [`gl_exact_path`].
pub fn gl_exact_terminal(fine: &IncrementGrid) -> Result<f64> {
    check_scalar(fine)?;
    Ok(gl_terminal_from(fine.dt(), fine.as_slice().iter().copied()))
}

fn check_scalar(grid: &IncrementGrid) -> Result<()> {
    if grid.noise_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: grid.noise_dim(),
        });
    }
    Ok(())
}

#[inline]
fn gl_terminal_from<I: Iterator<Item = f64>>(dt: f64, increments: I) -> f64 {
    let mut w = 0.0;
    let mut e_prev = 1.0;
    let mut integral = 0.0;
    for dw in increments {
        w += dw;
        let e = (4.0 * w).exp();
        integral += 0.5 * dt * (e_prev + e);
        e_prev = e;
    }
    (2.0 * w).exp() / (1.0 + 2.0 * integral).sqrt()
}

/// Terminal value on a fresh grid of `steps` increments over `[0, 1]` drawn
/// from `rng`; identical to sampling the grid first and calling
/// [`gl_exact_terminal`].
pub fn gl_exact_terminal_sampled<R: Rng + ?Sized>(rng: &mut R, steps: usize) -> f64 {
    let dt = 1.0 / steps as f64;
    let sd = dt.sqrt();
    gl_terminal_from(dt, (0..steps).map(|_| sd * standard_normal(rng)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceEstimate {
    pub estimate: f64,
    /// `None` for a single sample.
    pub standard_error: Option<f64>,
    pub samples: usize,
    pub fine_steps: usize,
}

/// Monte Carlo estimate of `E[X_1^2]` for the Ginzburg-Landau equation from
/// the pathwise solution; sample `k` uses stream `(0, k, reference)`.
pub fn gl_reference_value(
    samples: usize,
    fine_steps: usize,
    seed: u64,
    exec: &Executor,
) -> Result<ReferenceEstimate> {
    if samples == 0 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    if fine_steps < GL_MIN_FINE_STEPS {
        return Err(Error::invalid(
            "fine_steps",
            format!("need at least {GL_MIN_FINE_STEPS}, got {fine_steps}"),
        ));
    }
    let values = exec.map(samples, |i| {
        let mut rng = derive_stream(seed, StreamId::reference(i as u64 + 1));
        let x = gl_exact_terminal_sampled(&mut rng, fine_steps);
        x * x
    });
    let (estimate, standard_error) = mean_and_standard_error(&values);
    Ok(ReferenceEstimate {
        estimate,
        standard_error,
        samples,
        fine_steps,
    })
}
