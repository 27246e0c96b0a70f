//! Time-stepping kernels and the discrete paths they produce.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::problems::{Diffusion, Drift, SdeProblem};
use crate::randomness::IncrementGrid;

/// Residual tolerance of the implicit radial solve.
pub const IMPLICIT_TOL: f64 = 1e-12;
pub const IMPLICIT_MAX_ITER: usize = 100;

const HORIZON_RTOL: f64 = 1e-12;
const INTERPOLATION_SLACK: f64 = 1e-12;

/// Which recursion produced a [`DiscretePath`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    ExplicitEuler,
    TamedEuler,
    ImplicitEuler,
    Deterministic,
}

/// The steppable schemes an estimator can be built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    ExplicitEuler,
    TamedEuler,
    ImplicitEuler,
}

impl Scheme {
    pub fn kind(self) -> SchemeKind {
        match self {
            Scheme::ExplicitEuler => SchemeKind::ExplicitEuler,
            Scheme::TamedEuler => SchemeKind::TamedEuler,
            Scheme::ImplicitEuler => SchemeKind::ImplicitEuler,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::ExplicitEuler => "euler",
            Scheme::TamedEuler => "tamed",
            Scheme::ImplicitEuler => "implicit",
        }
    }

    /// Fails for problems the scheme cannot integrate (the implicit scheme
    /// only covers the Langevin drift with additive noise).
    pub fn check_supports(self, problem: &SdeProblem) -> Result<()> {
        if self == Scheme::ImplicitEuler
            && !(problem.drift_kind() == Drift::Langevin
                && problem.diffusion_kind() == Diffusion::Identity)
        {
            return Err(Error::UnsupportedScheme {
                scheme: self.label(),
                problem: problem.name().to_string(),
            });
        }
        Ok(())
    }

    pub fn simulate(
        self,
        problem: &SdeProblem,
        init: &[f64],
        inc: &IncrementGrid,
    ) -> Result<DiscretePath> {
        match self {
            Scheme::ExplicitEuler => euler_maruyama(problem, init, inc),
            Scheme::TamedEuler => tamed_euler(problem, init, inc),
            Scheme::ImplicitEuler => {
                self.check_supports(problem)?;
                check_grid(problem, init, inc)?;
                implicit_euler_langevin(problem.dim(), init, inc, IMPLICIT_TOL, IMPLICIT_MAX_ITER)
            }
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" | "explicit" | "explicit-euler" => Ok(Scheme::ExplicitEuler),
            "tamed" | "tamed-euler" => Ok(Scheme::TamedEuler),
            "implicit" | "implicit-euler" => Ok(Scheme::ImplicitEuler),
            other => Err(Error::Unknown {
                kind: "scheme",
                value: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Iterates `Y_0, ..., Y_N` on the uniform grid `t_n = nT/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    horizon: f64,
    steps: usize,
    dim: usize,
    states: Vec<f64>,
    scheme: SchemeKind,
}

impl DiscretePath {
    /// `states` holds `steps + 1` row-major vectors of length `dim`.
    pub fn new(horizon: f64, dim: usize, states: Vec<f64>, scheme: SchemeKind) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        if dim == 0 || !states.len().is_multiple_of(dim) || states.len() / dim < 2 {
            return Err(Error::invalid(
                "states",
                "need at least two states of the given dimension",
            ));
        }
        Ok(Self {
            horizon,
            steps: states.len() / dim - 1,
            dim,
            states,
            scheme,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.horizon / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }

    #[inline]
    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }

    pub fn states(&self) -> std::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(self.dim)
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.steps)
    }

    /// Scalar component of a one-dimensional path.
    pub fn scalar_states(&self) -> Vec<f64> {
        self.states().map(|s| s[0]).collect()
    }

    /// The piecewise-linear interpolant at `t`, exact at grid times.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        let horizon = self.horizon;
        if !(t >= -INTERPOLATION_SLACK && t <= horizon + INTERPOLATION_SLACK) {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
        let t = t.clamp(0.0, horizon);
        let s = t * self.steps as f64 / horizon;
        let nearest = s.round();
        if (s - nearest).abs() <= 4.0 * f64::EPSILON * s.max(1.0) {
            return Ok(self.state(nearest as usize).to_vec());
        }
        let n = (s.floor() as usize).min(self.steps - 1);
        let w = s - n as f64;
        let (a, b) = (self.state(n), self.state(n + 1));
        Ok(a.iter()
            .zip(b)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect())
    }
}

fn check_grid(problem: &SdeProblem, init: &[f64], inc: &IncrementGrid) -> Result<()> {
    if init.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: init.len(),
        });
    }
    if inc.noise_dim() != problem.noise_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.noise_dim(),
            got: inc.noise_dim(),
        });
    }
    let horizon = problem.horizon();
    if (inc.horizon() - horizon).abs() > HORIZON_RTOL * horizon {
        return Err(Error::GridMismatch {
            steps: inc.steps(),
            dt: inc.dt(),
            horizon,
        });
    }
    Ok(())
}

/// Explicit Euler-Maruyama:
/// `Y_{n+1} = Y_n + mu(Y_n) h + sigma(Y_n) dW_n`.
pub fn euler_maruyama(
    problem: &SdeProblem,
    init: &[f64],
    inc: &IncrementGrid,
) -> Result<DiscretePath> {
    check_grid(problem, init, inc)?;
    let d = problem.dim();
    let h = inc.dt();
    let mut states = Vec::with_capacity((inc.steps() + 1) * d);
    states.extend_from_slice(init);
    let mut drift = vec![0.0; d];
    let mut next = vec![0.0; d];
    for (n, dw) in inc.iter().enumerate() {
        let y = &states[n * d..(n + 1) * d];
        problem.drift_into(y, &mut drift);
        for ((o, &yi), &mi) in next.iter_mut().zip(y).zip(&drift) {
            *o = yi + mi * h;
        }
        problem.add_diffusion(y, dw, &mut next);
        states.extend_from_slice(&next);
    }
    DiscretePath::new(problem.horizon(), d, states, SchemeKind::ExplicitEuler)
}

/// Tamed Euler: the drift increment `mu(Y) h` is divided by
/// `1 + |mu(Y) h|`, so it never exceeds norm one.
pub fn tamed_euler(
    problem: &SdeProblem,
    init: &[f64],
    inc: &IncrementGrid,
) -> Result<DiscretePath> {
    check_grid(problem, init, inc)?;
    let d = problem.dim();
    let h = inc.dt();
    let mut states = Vec::with_capacity((inc.steps() + 1) * d);
    states.extend_from_slice(init);
    let mut drift = vec![0.0; d];
    let mut next = vec![0.0; d];
    for (n, dw) in inc.iter().enumerate() {
        let y = &states[n * d..(n + 1) * d];
        problem.drift_into(y, &mut drift);
        drift.iter_mut().for_each(|m| *m *= h);
        tame(&mut drift);
        for ((o, &yi), &mi) in next.iter_mut().zip(y).zip(&drift) {
            *o = yi + mi;
        }
        problem.add_diffusion(y, dw, &mut next);
        states.extend_from_slice(&next);
    }
    DiscretePath::new(problem.horizon(), d, states, SchemeKind::TamedEuler)
}

/// `v <- v / (1 + |v|)`, taking the limit direction when `|v|` overflows.
#[inline]
fn tame(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm.is_finite() {
        let scale = 1.0 / (1.0 + norm);
        v.iter_mut().for_each(|x| *x *= scale);
    } else if v.iter().any(|x| x.is_nan()) {
        v.iter_mut().for_each(|x| *x = f64::NAN);
    } else {
        let infinite = v.iter().filter(|x| x.is_infinite()).count();
        if infinite == 0 {
            // finite components whose squares overflow
            let big = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            let norm = big * v.iter().map(|x| (x / big).powi(2)).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        } else {
            let w = 1.0 / (infinite as f64).sqrt();
            v.iter_mut()
                .for_each(|x| *x = if x.is_infinite() { x.signum() * w } else { 0.0 });
        }
    }
}

/// Outcome of one implicit radial solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSolve {
    pub radius: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Nonnegative root of `h r^3 + (1 - h) r = target` for `0 < h <= 1`.
///
/// The left-hand side is strictly increasing and convex on `r >= 0`. Newton
/// starts from `r = target` (capped by `(target / h)^{1/3}` and
/// `target / (1 - h)`, both above the root); if it stalls above tolerance the
/// solve falls back to bisection on `[0, target + 1]`. The residual is
/// accepted at `tol * max(1, target)`, since an absolute `tol` sits below the
/// rounding floor once `target` is large; accepted roots then get a few more
/// Newton steps for as long as the residual keeps shrinking.
pub fn solve_radial(h: f64, target: f64, tol: f64, max_iter: usize) -> Result<RadialSolve> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::invalid(
            "h",
            format!("step must lie in (0, 1], got {h}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::invalid(
            "target",
            format!("must be finite and nonnegative, got {target}"),
        ));
    }
    if target == 0.0 {
        return Ok(RadialSolve {
            radius: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let f = |r: f64| h * r * r * r + (1.0 - h) * r - target;
    let accept = tol * target.max(1.0);

    // Both bounds dominate the root; Newton iterates are kept below them.
    let upper = if h < 1.0 {
        (target / h).cbrt().min(target / (1.0 - h))
    } else {
        (target / h).cbrt()
    };
    let mut r = target.min(upper);
    let mut residual = f(r);
    let mut iterations = 0;
    while residual.abs() > accept && iterations < max_iter {
        let slope = 3.0 * h * r * r + (1.0 - h);
        let next = (r - residual / slope).clamp(0.0, upper);
        iterations += 1;
        if next == r {
            break;
        }
        r = next;
        residual = f(r);
    }
    if residual.abs() <= accept {
        return Ok(polish(f, h, r, iterations));
    }

    let mut best = residual.abs();
    let (mut lo, mut hi) = (0.0_f64, target + 1.0);
    while iterations < max_iter && hi - lo > f64::EPSILON * hi {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= accept {
            return Ok(polish(f, h, mid, iterations));
        }
        best = best.min(fm.abs());
        if fm > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NonConvergence {
        iterations,
        residual: best,
    })
}

fn polish(f: impl Fn(f64) -> f64, h: f64, mut r: f64, mut iterations: usize) -> RadialSolve {
    let mut residual = f(r);
    for _ in 0..4 {
        if residual == 0.0 {
            break;
        }
        let next = (r - residual / (3.0 * h * r * r + (1.0 - h))).max(0.0);
        let candidate = f(next);
        if candidate.abs() >= residual.abs() {
            break;
        }
        iterations += 1;
        r = next;
        residual = candidate;
    }
    RadialSolve {
        radius: r,
        residual: residual.abs(),
        iterations,
    }
}

/// Implicit Euler for `dX = (X - |X|^2 X) dt + dW` in `R^d`.
///
/// Each step `Y' (1 - h + h|Y'|^2) = Y + dW` is reduced to the scalar radial
/// equation in `r = |Y'|` and `Y'` is the rescaled right-hand side.
pub fn implicit_euler_langevin(
    dim: usize,
    init: &[f64],
    inc: &IncrementGrid,
    tol: f64,
    max_iter: usize,
) -> Result<DiscretePath> {
    if init.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: init.len(),
        });
    }
    if inc.noise_dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: inc.noise_dim(),
        });
    }
    let h = inc.dt();
    if h > 1.0 {
        return Err(Error::invalid(
            "dt",
            format!("implicit step needs h <= 1, got {h}"),
        ));
    }
    let mut states = Vec::with_capacity((inc.steps() + 1) * dim);
    states.extend_from_slice(init);
    let mut b = vec![0.0; dim];
    for (n, dw) in inc.iter().enumerate() {
        let y = &states[n * dim..(n + 1) * dim];
        for ((bi, &yi), &wi) in b.iter_mut().zip(y).zip(dw) {
            *bi = yi + wi;
        }
        let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            states.extend(std::iter::repeat_n(0.0, dim));
            continue;
        }
        let root = solve_radial(h, norm, tol, max_iter)?;
        let scale = root.radius / norm;
        states.extend(b.iter().map(|bi| bi * scale));
    }
    DiscretePath::new(inc.horizon(), dim, states, SchemeKind::ImplicitEuler)
}

#[inline]
fn x5_step(y: f64, h: f64) -> f64 {
    let sq = y * y;
    y - sq * sq * y * h
}

/// The noise-free recursion `y_{n+1} = y_n - y_n^5 T/N` started at `x`.
pub fn deterministic_x5_path(x: f64, steps: usize, horizon: f64) -> Result<DiscretePath> {
    if steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    let h = horizon / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = x;
    states.push(y);
    for _ in 0..steps {
        y = x5_step(y, h);
        states.push(y);
    }
    DiscretePath::new(horizon, 1, states, SchemeKind::Deterministic)
}

/// `ln |y_n|` for the noise-free x^5 recursion, tracked in log space so the
/// iterates can be followed far beyond the range of `f64`.
///
/// Uses `|y_{n+1}| = |y_n| |1 - h y_n^4|`. A zero iterate is `-inf`.
pub fn x5_log_magnitudes(x: f64, steps: usize, horizon: f64) -> Vec<f64> {
    let ln_h = (horizon / steps as f64).ln();
    let mut out = Vec::with_capacity(steps + 1);
    let mut ell = x.abs().ln();
    out.push(ell);
    for _ in 0..steps {
        // a = ln(h y^4)
        let a = ln_h + 4.0 * ell;
        let factor = if a > 0.0 {
            a + (-(-a).exp()).ln_1p()
        } else {
            (-a.exp()).ln_1p()
        };
        ell += factor;
        out.push(ell);
    }
    out
}

/// Instability threshold `(2N/T)^{1/4}` of the x^5 recursion with `N` steps.
pub fn x5_stability_bound(steps: usize, horizon: f64) -> f64 {
    (2.0 * steps as f64 / horizon).powf(0.25)
}
