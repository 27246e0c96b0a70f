//! Test problems and payoff functionals.
//!
//! Coefficients are closed enums rather than boxed closures: the three
//! problems plus a couple of degenerate building blocks cover everything the
//! estimators are exercised on, and enum dispatch keeps the inner stepping
//! loops free of indirect calls.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::schemes::DiscretePath;

/// Drift coefficient `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drift {
    Zero,
    /// `mu(x) = -x^5`, applied per coordinate.
    NegativeFifthPower,
    /// `mu(x) = 2x - x^3`, applied per coordinate.
    GinzburgLandau,
    /// `mu(x) = x - |x|^2 x`.
    Langevin,
}

/// Diffusion coefficient `sigma`, a `d x m` matrix valued map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Zero,
    /// `sigma(x) = c * diag(x)`; requires `d == m`.
    Linear(f64),
    /// `sigma(x) = I`; requires `d == m`.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    /// Independent centred normal coordinates.
    Normal {
        std_dev: f64,
    },
    PointMass(Vec<f64>),
}

/// An SDE `dX = mu(X) dt + sigma(X) dW` on `[0, T]` with a random or fixed
/// initial value. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeProblem {
    name: String,
    dim: usize,
    noise_dim: usize,
    horizon: f64,
    drift: Drift,
    diffusion: Diffusion,
    initial_law: InitialLaw,
}

impl SdeProblem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        noise_dim: usize,
        horizon: f64,
        drift: Drift,
        diffusion: Diffusion,
        initial_law: InitialLaw,
    ) -> Result<Self> {
        if dim < 1 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if noise_dim < 1 {
            return Err(Error::invalid("noise_dim", "must be at least 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(
                "horizon",
                format!("must be positive, got {horizon}"),
            ));
        }
        if matches!(diffusion, Diffusion::Linear(_) | Diffusion::Identity) && dim != noise_dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: noise_dim,
            });
        }
        match &initial_law {
            InitialLaw::Normal { std_dev } if !(*std_dev >= 0.0 && std_dev.is_finite()) => {
                return Err(Error::invalid(
                    "sigma_bar",
                    format!("must be nonnegative, got {std_dev}"),
                ));
            }
            InitialLaw::PointMass(x) if x.len() != dim => {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            _ => {}
        }
        Ok(Self {
            name: name.into(),
            dim,
            noise_dim,
            horizon,
            drift,
            diffusion,
            initial_law,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn drift_kind(&self) -> Drift {
        self.drift
    }

    pub fn diffusion_kind(&self) -> Diffusion {
        self.diffusion
    }

    pub fn initial_law(&self) -> &InitialLaw {
        &self.initial_law
    }

    pub fn with_initial_law(self, initial_law: InitialLaw) -> Result<Self> {
        Self::new(
            self.name,
            self.dim,
            self.noise_dim,
            self.horizon,
            self.drift,
            self.diffusion,
            initial_law,
        )
    }

    pub fn with_horizon(self, horizon: f64) -> Result<Self> {
        Self::new(
            self.name,
            self.dim,
            self.noise_dim,
            horizon,
            self.drift,
            self.diffusion,
            self.initial_law,
        )
    }

    /// Writes `mu(x)` into `out`. No clamping: overflow yields infinities.
    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        match self.drift {
            Drift::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Drift::NegativeFifthPower => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    let sq = xi * xi;
                    *o = -(sq * sq * xi);
                }
            }
            Drift::GinzburgLandau => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = 2.0 * xi - xi * xi * xi;
                }
            }
            Drift::Langevin => {
                let norm_sq = squared_norm(x);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = xi - norm_sq * xi;
                }
            }
        }
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out);
        out
    }

    /// `sigma(x)` as a row-major `d x m` matrix.
    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let (d, m) = (self.dim, self.noise_dim);
        let mut out = vec![0.0; d * m];
        match self.diffusion {
            Diffusion::Zero => {}
            Diffusion::Linear(c) => {
                for i in 0..d {
                    out[i * m + i] = c * x[i];
                }
            }
            Diffusion::Identity => {
                for i in 0..d {
                    out[i * m + i] = 1.0;
                }
            }
        }
        out
    }

    /// Adds `sigma(x) * dw` to `out`.
    #[inline]
    pub fn add_diffusion(&self, x: &[f64], dw: &[f64], out: &mut [f64]) {
        match self.diffusion {
            Diffusion::Zero => {}
            Diffusion::Linear(c) => {
                for ((o, &xi), &w) in out.iter_mut().zip(x).zip(dw) {
                    *o += c * xi * w;
                }
            }
            Diffusion::Identity => {
                for (o, &w) in out.iter_mut().zip(dw) {
                    *o += w;
                }
            }
        }
    }

    pub fn is_noise_free(&self) -> bool {
        self.diffusion == Diffusion::Zero
    }
}

/// `dX = -X^5 dt`, `X_0 ~ N(0, sigma_bar^2)`.
pub fn make_x5_problem(sigma_bar: f64, horizon: f64) -> Result<SdeProblem> {
    SdeProblem::new(
        "x5",
        1,
        1,
        horizon,
        Drift::NegativeFifthPower,
        Diffusion::Zero,
        InitialLaw::Normal { std_dev: sigma_bar },
    )
}

/// `dX = (2X - X^3) dt + 2X dW`, `X_0 = 1`, `T = 1`.
pub fn make_ginzburg_landau() -> SdeProblem {
    SdeProblem::new(
        "ginzburg-landau",
        1,
        1,
        1.0,
        Drift::GinzburgLandau,
        Diffusion::Linear(2.0),
        InitialLaw::PointMass(vec![1.0]),
    )
    .expect("ginzburg-landau parameters are valid")
}

/// `dX = (X - |X|^2 X) dt + dW` in `R^d`, started at the origin, `T = 1`.
pub fn make_langevin(dim: usize) -> Result<SdeProblem> {
    if dim < 1 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    SdeProblem::new(
        "langevin",
        dim,
        dim,
        1.0,
        Drift::Langevin,
        Diffusion::Identity,
        InitialLaw::PointMass(vec![0.0; dim]),
    )
}

/// Problems selectable by name from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    X5,
    GinzburgLandau,
    Langevin,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::X5 => "x5",
            ProblemKind::GinzburgLandau => "ginzburg-landau",
            ProblemKind::Langevin => "langevin",
        }
    }

    /// Builds the problem. `sigma_bar` only affects `x5`, `dim` only
    /// `langevin`; `horizon` overrides the default of 1 when given.
    pub fn build(self, sigma_bar: f64, dim: usize, horizon: Option<f64>) -> Result<SdeProblem> {
        let problem = match self {
            ProblemKind::X5 => make_x5_problem(sigma_bar, horizon.unwrap_or(1.0))?,
            ProblemKind::GinzburgLandau => make_ginzburg_landau(),
            ProblemKind::Langevin => make_langevin(dim)?,
        };
        match horizon {
            Some(t) if self != ProblemKind::X5 => problem.with_horizon(t),
            _ => Ok(problem),
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x5" => Ok(ProblemKind::X5),
            "ginzburg-landau" | "gl" => Ok(ProblemKind::GinzburgLandau),
            "langevin" => Ok(ProblemKind::Langevin),
            other => Err(Error::Unknown {
                kind: "problem",
                value: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Functional `f` of a discretized path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff {
    /// `|X_T|^p` (Euclidean norm for vector states).
    TerminalPower(f64),
    /// `|X_T|^2`.
    TerminalSquareNorm,
    /// `sup_t |X_t|^2` over the piecewise-linear interpolant, i.e. the
    /// maximum over the vertices.
    PathSupSquareNorm,
}

impl Payoff {
    pub fn terminal_power(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::invalid("p", format!("must be positive, got {p}")));
        }
        Ok(Payoff::TerminalPower(p))
    }

    pub fn evaluate(&self, path: &DiscretePath) -> f64 {
        match *self {
            Payoff::TerminalPower(p) => power_of_norm(path.terminal(), p),
            Payoff::TerminalSquareNorm => squared_norm(path.terminal()),
            Payoff::PathSupSquareNorm => {
                let mut sup = 0.0_f64;
                for state in path.states() {
                    let v = squared_norm(state);
                    if v.is_nan() {
                        return f64::NAN;
                    }
                    if v > sup {
                        sup = v;
                    }
                }
                sup
            }
        }
    }

    /// Short label used on the command line and in CSV output.
    pub fn label(&self) -> String {
        match self {
            Payoff::TerminalPower(p) => format!("p{p}"),
            Payoff::TerminalSquareNorm => "norm2".to_string(),
            Payoff::PathSupSquareNorm => "supnorm2".to_string(),
        }
    }
}

impl FromStr for Payoff {
    type Err = Error;

    /// Accepts `p<exponent>` (e.g. `p2`), `norm2` and `supnorm2`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supnorm2" => Ok(Payoff::PathSupSquareNorm),
            "norm2" => Ok(Payoff::TerminalSquareNorm),
            _ => {
                let p = s
                    .strip_prefix('p')
                    .and_then(|rest| rest.parse::<f64>().ok())
                    .ok_or_else(|| Error::Unknown {
                        kind: "payoff",
                        value: s.to_string(),
                    })?;
                Payoff::terminal_power(p)
            }
        }
    }
}

#[inline]
pub fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn power_of_norm(x: &[f64], p: f64) -> f64 {
    if x.len() == 1 {
        let a = x[0].abs();
        if p == 2.0 {
            a * a
        } else {
            a.powf(p)
        }
    } else {
        let sq = squared_norm(x);
        if p == 2.0 {
            sq
        } else {
            sq.sqrt().powf(p)
        }
    }
}
