//! Python bindings for the `mlmc-sde` crate.

use mlmc_sde::diagnostics::{compute_level_stats, InitialArray};
use mlmc_sde::estimators::{self, EstimatorReport};
use mlmc_sde::experiments::{self, ExperimentConfig, ExperimentName};
use mlmc_sde::problems::{make_ginzburg_landau, make_langevin, make_x5_problem};
use mlmc_sde::reference::{self, QuadratureSpec};
use mlmc_sde::schemes;
use mlmc_sde::{Executor, IncrementGrid, Payoff, Scheme, SdeProblem};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py<T>(r: mlmc_sde::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyValueError::new_err(e.to_string()))
}

fn executor(workers: usize) -> PyResult<Executor> {
    to_py(Executor::with_workers(workers))
}

#[pyclass(name = "Problem", frozen)]
struct PyProblem(SdeProblem);

#[pymethods]
impl PyProblem {
    /// `dX = -X^5 dt`, `X_0 ~ N(0, sigma_bar^2)`.
    #[staticmethod]
    #[pyo3(signature = (sigma_bar = 1.0, horizon = 1.0))]
    fn x5(sigma_bar: f64, horizon: f64) -> PyResult<Self> {
        to_py(make_x5_problem(sigma_bar, horizon)).map(Self)
    }

    #[staticmethod]
    fn ginzburg_landau() -> Self {
        Self(make_ginzburg_landau())
    }

    #[staticmethod]
    #[pyo3(signature = (dim = 10))]
    fn langevin(dim: usize) -> PyResult<Self> {
        to_py(make_langevin(dim)).map(Self)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    fn drift(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!(
                "state must have length {}",
                self.0.dim()
            )));
        }
        Ok(self.0.drift(&x))
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name={:?}, dim={}, horizon={})",
            self.0.name(),
            self.0.dim(),
            self.0.horizon()
        )
    }
}

#[pyclass(name = "EstimatorReport", frozen, get_all)]
struct PyReport {
    estimator: String,
    problem: String,
    scheme: String,
    steps: usize,
    value: f64,
    total_samples: usize,
    diverged: bool,
    runtime_seconds: f64,
    seed: u64,
    /// `(level, samples, contribution)` per level.
    per_level: Vec<(u32, usize, f64)>,
}

impl From<EstimatorReport> for PyReport {
    fn from(r: EstimatorReport) -> Self {
        Self {
            estimator: r.estimator.label().to_string(),
            problem: r.problem,
            scheme: r.scheme.label().to_string(),
            steps: r.steps,
            value: r.value,
            total_samples: r.total_samples,
            diverged: r.diverged,
            runtime_seconds: r.runtime_seconds,
            seed: r.master_seed,
            per_level: r
                .per_level
                .iter()
                .map(|c| (c.level, c.samples, c.contribution))
                .collect(),
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "EstimatorReport(estimator={:?}, scheme={:?}, steps={}, value={}, diverged={})",
            self.estimator, self.scheme, self.steps, self.value, self.diverged
        )
    }
}

/// Plain Monte Carlo Euler with `steps^2` paths.
#[pyfunction]
#[pyo3(signature = (problem, steps, payoff = "p2", seed = 42, workers = 0))]
fn monte_carlo_euler(
    problem: &PyProblem,
    steps: usize,
    payoff: &str,
    seed: u64,
    workers: usize,
) -> PyResult<PyReport> {
    let payoff: Payoff = to_py(payoff.parse())?;
    to_py(estimators::monte_carlo_euler(
        &problem.0,
        payoff,
        steps,
        seed,
        &executor(workers)?,
    ))
    .map(Into::into)
}

/// Multilevel Monte Carlo with `ld(steps)` levels.
#[pyfunction]
#[pyo3(signature = (problem, steps, scheme = "euler", payoff = "p2", seed = 42, workers = 0))]
fn mlmc(
    problem: &PyProblem,
    steps: usize,
    scheme: &str,
    payoff: &str,
    seed: u64,
    workers: usize,
) -> PyResult<PyReport> {
    let scheme: Scheme = to_py(scheme.parse())?;
    let payoff: Payoff = to_py(payoff.parse())?;
    to_py(estimators::mlmc(
        &problem.0,
        scheme,
        payoff,
        steps,
        seed,
        &executor(workers)?,
    ))
    .map(Into::into)
}

/// Runs one scheme from `init` over the given increments; returns the states.
#[pyfunction]
fn simulate(
    problem: &PyProblem,
    scheme: &str,
    init: Vec<f64>,
    increments: Vec<Vec<f64>>,
    dt: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let scheme: Scheme = to_py(scheme.parse())?;
    let noise_dim = problem.0.noise_dim();
    if increments.iter().any(|dw| dw.len() != noise_dim) {
        return Err(PyValueError::new_err(format!(
            "each increment must have length {noise_dim}"
        )));
    }
    let grid = to_py(IncrementGrid::from_increments(
        dt,
        noise_dim,
        increments.concat(),
    ))?;
    let path = to_py(scheme.simulate(&problem.0, &init, &grid))?;
    Ok(path.states().map(<[f64]>::to_vec).collect())
}

/// Root `r >= 0` of `h r^3 + (1 - h) r = target`.
#[pyfunction]
#[pyo3(signature = (h, target, tol = schemes::IMPLICIT_TOL))]
fn solve_radial(h: f64, target: f64, tol: f64) -> PyResult<(f64, f64)> {
    let s = schemes::solve_radial(h, target, tol, schemes::IMPLICIT_MAX_ITER)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((s.radius, s.residual))
}

/// `E|X_T|^p` for the `-x^5` problem; Simpson unless `nodes` asks for
/// Gauss-Hermite.
#[pyfunction]
#[pyo3(signature = (sigma_bar, horizon = 1.0, p = 2.0, nodes = None))]
fn x5_expectation(sigma_bar: f64, horizon: f64, p: f64, nodes: Option<usize>) -> PyResult<f64> {
    let spec = nodes.map_or_else(QuadratureSpec::default, |nodes| {
        QuadratureSpec::GaussHermite { nodes }
    });
    to_py(reference::x5_expectation(sigma_bar, horizon, p, spec))
}

/// `(estimate, standard_error)` of `E[X_1^2]` for Ginzburg-Landau.
#[pyfunction]
#[pyo3(signature = (samples, fine_steps = 16384, seed = 42, workers = 0))]
fn gl_reference_value(
    samples: usize,
    fine_steps: usize,
    seed: u64,
    workers: usize,
) -> PyResult<(f64, Option<f64>)> {
    let r = to_py(reference::gl_reference_value(
        samples,
        fine_steps,
        seed,
        &executor(workers)?,
    ))?;
    Ok((r.estimate, r.standard_error))
}

/// `(L_N, eta_N, theta_N, A1, A2, A3, A4)` for one sampled initial array.
#[pyfunction]
#[pyo3(signature = (sigma_bar, steps, horizon = 1.0, seed = 42, delta = 0.25))]
fn level_stats(
    sigma_bar: f64,
    steps: usize,
    horizon: f64,
    seed: u64,
    delta: f64,
) -> PyResult<(u32, f64, f64, bool, bool, bool, bool)> {
    let init = to_py(InitialArray::sample(sigma_bar, horizon, steps, seed))?;
    let s = to_py(compute_level_stats(&init, delta))?;
    Ok((s.l_n, s.eta_n, s.theta_n, s.a1, s.a2, s.a3, s.a4))
}

/// Runs a named experiment and returns its CSV text.
#[pyfunction]
#[pyo3(signature = (name, seed = 42, replicates = 4, steps = None, timing = false, workers = 0))]
fn run_experiment(
    name: &str,
    seed: u64,
    replicates: usize,
    steps: Option<Vec<usize>>,
    timing: bool,
    workers: usize,
) -> PyResult<String> {
    let name: ExperimentName = to_py(name.parse())?;
    let mut cfg = ExperimentConfig::new(name, seed, replicates);
    cfg.steps = steps;
    cfg.timing = timing;
    let table = to_py(experiments::run_experiment(&cfg, &executor(workers)?))?;
    let bytes = to_py(table.to_bytes())?;
    String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn mlmc_sde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(monte_carlo_euler, m)?)?;
    m.add_function(wrap_pyfunction!(mlmc, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_radial, m)?)?;
    m.add_function(wrap_pyfunction!(x5_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(gl_reference_value, m)?)?;
    m.add_function(wrap_pyfunction!(level_stats, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add(
        "EXPERIMENTS",
        ExperimentName::ALL
            .iter()
            .map(|n| n.as_str())
            .collect::<Vec<_>>(),
    )?;
    Ok(())
}
