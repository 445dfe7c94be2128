//! Python bindings: games, the solver, trace records, a standalone OFTRL
//! minimizer and the invariant check suites.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spcfr_core::cfr::{self, Algorithm, SolveConfig, UpdateMode};
use spcfr_core::checks;
use spcfr_core::games::{self, build_kuhn, build_leduc, build_random_game, to_sequence_form_game};
use spcfr_core::local_rm::{Oftrl as CoreOftrl, PredictiveRegretMinimizer};
use spcfr_core::metrics;
use spcfr_core::{GameInstance, Regularizer, SolveTrace};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A two-player zero-sum game in sequence form.
#[pyclass(name = "Game", module = "spcfr", frozen)]
struct Game {
    inner: GameInstance,
}

#[pymethods]
impl Game {
    #[staticmethod]
    fn kuhn() -> Self {
        Self { inner: build_kuhn() }
    }

    #[staticmethod]
    fn leduc() -> Self {
        Self { inner: build_leduc() }
    }

    #[staticmethod]
    #[pyo3(signature = (seed, depth = 3, branching = 3))]
    fn random(seed: u64, depth: usize, branching: usize) -> PyResult<Self> {
        let inner = build_random_game(seed, depth, branching).map_err(value_error)?;
        Ok(Self { inner })
    }

    /// Parses a game in the text game-file format.
    #[staticmethod]
    #[pyo3(signature = (text, name = "file"))]
    fn parse(text: &str, name: &str) -> PyResult<Self> {
        let efg = games::parse_game_file(text).map_err(value_error)?;
        let inner = to_sequence_form_game(name, &efg).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn num_sequences_x(&self) -> usize {
        self.inner.num_sequences_x()
    }

    #[getter]
    fn num_sequences_y(&self) -> usize {
        self.inner.num_sequences_y()
    }

    /// Expected payoff to player 1 for two sequence-form strategies.
    fn expected_payoff(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.expected_payoff(&x, &y).map_err(value_error)
    }

    /// Saddle-point residual of a strategy profile.
    fn saddle_residual(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        metrics::saddle_residual(&self.inner, &x, &y).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!(
            "Game({:?}, sequences={}x{})",
            self.inner.name,
            self.inner.num_sequences_x(),
            self.inner.num_sequences_y()
        )
    }
}

/// One recorded iteration of a run.
#[pyclass(name = "TraceRecord", module = "spcfr", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct TraceRecord {
    t: usize,
    residual: f64,
    regret_x: f64,
    regret_y: f64,
    max_stability_violation: f64,
}

#[pymethods]
impl TraceRecord {
    fn __repr__(&self) -> String {
        format!("TraceRecord(t={}, residual={:.6e})", self.t, self.residual)
    }
}

/// A finished solver run.
#[pyclass(name = "Trace", module = "spcfr", frozen)]
struct Trace {
    inner: SolveTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn records(&self) -> Vec<TraceRecord> {
        self.inner
            .records
            .iter()
            .map(|r| TraceRecord {
                t: r.t,
                residual: r.residual,
                regret_x: r.regret_x,
                regret_y: r.regret_y,
                max_stability_violation: r.max_stability_violation,
            })
            .collect()
    }

    #[getter]
    fn average_x(&self) -> Vec<f64> {
        self.inner.average_x.clone()
    }

    #[getter]
    fn average_y(&self) -> Vec<f64> {
        self.inner.average_y.clone()
    }

    #[getter]
    fn final_residual(&self) -> Option<f64> {
        self.inner.final_residual()
    }

    #[getter]
    fn max_stability_violation(&self) -> f64 {
        self.inner.max_stability_violation
    }

    /// `(exponent, constant)` of the power-law fit over the last half of the run.
    fn rate_fit(&self) -> PyResult<(f64, f64)> {
        let fit = metrics::fit_convergence_rate(&self.inner.records).map_err(value_error)?;
        Ok((fit.exponent, fit.constant))
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }
}

/// Runs one configuration. `algorithm` is `oftrl_theory`, `oftrl_scaled:D`
/// or `cfr_rm`.
#[pyfunction]
#[pyo3(signature = (
    game,
    algorithm = "oftrl_theory",
    iterations = 1024,
    updates = "simultaneous",
    regularizer = "euclidean",
    kappa_constant = 1.0,
    record_every = None,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    game: &Game,
    algorithm: &str,
    iterations: usize,
    updates: &str,
    regularizer: &str,
    kappa_constant: f64,
    record_every: Option<usize>,
) -> PyResult<Trace> {
    let algorithm: Algorithm = algorithm.parse().map_err(PyValueError::new_err)?;
    let mut config = SolveConfig {
        updates: updates.parse::<UpdateMode>().map_err(PyValueError::new_err)?,
        regularizer: regularizer.parse::<Regularizer>().map_err(PyValueError::new_err)?,
        kappa_constant,
        track_stability: true,
        ..SolveConfig::new(algorithm, iterations)
    };
    if let Some(every) = record_every {
        config.record_every = every;
    }
    config.validate().map_err(value_error)?;
    let inner = py
        .detach(|| cfr::solve(&game.inner, config))
        .map_err(runtime_error)?;
    Ok(Trace { inner })
}

/// Optimistic FTRL on the probability simplex.
#[pyclass(name = "Oftrl", module = "spcfr")]
struct Oftrl {
    inner: CoreOftrl,
}

#[pymethods]
impl Oftrl {
    #[new]
    #[pyo3(signature = (n, eta, regularizer = "euclidean"))]
    fn new(n: usize, eta: f64, regularizer: &str) -> PyResult<Self> {
        let reg: Regularizer = regularizer.parse().map_err(PyValueError::new_err)?;
        let inner = CoreOftrl::new(n, eta, reg).map_err(value_error)?;
        Ok(Self { inner })
    }

    fn next_decision(&mut self, prediction: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner
            .next_decision(&prediction)
            .map(<[f64]>::to_vec)
            .map_err(value_error)
    }

    fn observe_loss(&mut self, loss: Vec<f64>) -> PyResult<()> {
        self.inner.observe_loss(&loss).map_err(value_error)
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }
}

/// Every invariant suite; returns `(name, passed, enforced, summary)` tuples.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn run_checks(py: Python<'_>, seed: u64) -> PyResult<Vec<(String, bool, bool, String)>> {
    let outcomes = py
        .detach(|| checks::run_invariant_suites(seed))
        .map_err(runtime_error)?;
    Ok(outcomes
        .into_iter()
        .map(|o| (o.name.clone(), o.passed(), o.enforced, o.to_string()))
        .collect())
}

/// Text game-file form of a built-in game (`kuhn`, `leduc`).
#[pyfunction]
fn export_game(name: &str) -> PyResult<String> {
    let efg = match name {
        "kuhn" => games::kuhn_efg(),
        "leduc" => games::leduc_efg(),
        other => return Err(PyValueError::new_err(format!("no built-in game {other:?}"))),
    };
    Ok(games::export_game_file(&efg))
}

#[pymodule]
fn spcfr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Game>()?;
    m.add_class::<Trace>()?;
    m.add_class::<TraceRecord>()?;
    m.add_class::<Oftrl>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    m.add_function(wrap_pyfunction!(export_game, m)?)?;
    Ok(())
}
