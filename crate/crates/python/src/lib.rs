//! Python bindings. Inputs and outputs are plain lists, dicts and JSON
//! strings so the module has no numpy dependency.

use std::path::PathBuf;

use lamol_core::engine::{run_episode, RunConfig, RunTrace};
use lamol_core::evaluation::{
    global_ma_error, global_mc_error, local_multiaccuracy_error, local_prediction_error, verify_interval_bounds,
    BoundChecks, EvalMode, VerifyOptions, WindowSpec,
};
use lamol_core::experiment::{prepare_stream, run_experiment, DatasetConfig, ExperimentConfig};
use lamol_core::ingest::{gen_jump_shift, gen_switch, interpolate_cdf as cdf, QuantileRow, ShiftScenario, ShiftSetting};
use lamol_core::minimax::{self, GameMatrix, SolverSettings};
use lamol_core::objectives::{self, CostKind, LabelRange, Sign};
use lamol_core::trace_io::{read_trace, write_trace};
use lamol_core::weights::{self, EtaSchedule, WeightLearner, WeightVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn range(a: f64, b: f64) -> PyResult<LabelRange> {
    LabelRange::new(a, b).map_err(value_err)
}

fn sign(s: i32) -> PyResult<Sign> {
    Sign::from_value(s as f64).map_err(value_err)
}

fn cost(s: &str) -> PyResult<CostKind> {
    CostKind::parse(s).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (f, sign_, p, y, a=0.0, b=1.0))]
fn multiaccuracy_loss(f: f64, sign_: i32, p: f64, y: f64, a: f64, b: f64) -> PyResult<f64> {
    objectives::multiaccuracy_loss(f, sign(sign_)?, p, y, &range(a, b)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (p, p_base, y, cost_="squared", a=0.0, b=1.0))]
fn prediction_error_loss(p: f64, p_base: f64, y: f64, cost_: &str, a: f64, b: f64) -> PyResult<f64> {
    objectives::prediction_error_loss(p, p_base, y, cost(cost_)?, &range(a, b)?).map_err(value_err)
}

/// `bin` is 0-based.
#[pyfunction]
#[pyo3(signature = (f, sign_, bin, bins, p, y, a=0.0, b=1.0))]
#[allow(clippy::too_many_arguments)]
fn multicalibration_loss(f: f64, sign_: i32, bin: usize, bins: usize, p: f64, y: f64, a: f64, b: f64) -> PyResult<f64> {
    objectives::multicalibration_loss(f, sign(sign_)?, bin, bins, p, y, &range(a, b)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (f, sign_, theta, y, alpha))]
fn coverage_loss(f: f64, sign_: i32, theta: f64, y: f64, alpha: f64) -> PyResult<f64> {
    objectives::coverage_loss(f, sign(sign_)?, theta, y, alpha).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (theta, theta_base, y, alpha, a=0.0, b=1.0))]
fn quantile_pred_loss(theta: f64, theta_base: f64, y: f64, alpha: f64, a: f64, b: f64) -> PyResult<f64> {
    objectives::quantile_pred_loss(theta, theta_base, y, alpha, &range(a, b)?).map_err(value_err)
}

fn weight_vector(q: Vec<f64>) -> PyResult<WeightVector> {
    WeightVector::from_weights(q).map_err(value_err)
}

#[pyfunction]
fn hedge_update(q: Vec<f64>, losses: Vec<f64>, eta: f64) -> PyResult<Vec<f64>> {
    Ok(weights::hedge_update(&weight_vector(q)?, &losses, eta).map_err(value_err)?.weights)
}

#[pyfunction]
fn fixed_share_update(q: Vec<f64>, losses: Vec<f64>, eta: f64, gamma: f64) -> PyResult<Vec<f64>> {
    Ok(weights::fixed_share_update(&weight_vector(q)?, &losses, eta, gamma).map_err(value_err)?.weights)
}

#[pyfunction]
fn adaptive_eta(window_sum: f64, tau: usize, n_objectives: usize) -> f64 {
    weights::adaptive_eta(window_sum, tau, n_objectives)
}

enum AnyLearner {
    Hedge(weights::HedgeLearner),
    FixedShare(weights::FixedShareLearner),
    Adaptive(weights::AdaptiveObjectivesLearner),
}

impl AnyLearner {
    fn inner(&mut self) -> &mut dyn WeightLearner {
        match self {
            AnyLearner::Hedge(l) => l,
            AnyLearner::FixedShare(l) => l,
            AnyLearner::Adaptive(l) => l,
        }
    }
}

/// A stateful weight learner. `kind` is `hedge`, `fixed_share` or
/// `adaptive_objectives`; pass `eta=None` for the windowed adaptive rate.
#[pyclass(name = "WeightLearner")]
struct PyWeightLearner {
    learner: AnyLearner,
}

#[pymethods]
impl PyWeightLearner {
    #[new]
    #[pyo3(signature = (kind, n, eta=None, gamma=None, tau=100, horizon=None))]
    fn new(kind: &str, n: usize, eta: Option<f64>, gamma: Option<f64>, tau: usize, horizon: Option<usize>) -> PyResult<Self> {
        let schedule = match eta {
            Some(v) => EtaSchedule::Fixed(v),
            None => EtaSchedule::Adaptive { tau: tau.max(1) },
        };
        let learner = match kind {
            "hedge" => AnyLearner::Hedge(weights::HedgeLearner::new(n, schedule)),
            "fixed_share" => AnyLearner::FixedShare(
                weights::FixedShareLearner::new(n, schedule, gamma.unwrap_or(1.0 / (2.0 * tau.max(1) as f64)))
                    .map_err(value_err)?,
            ),
            "adaptive_objectives" => AnyLearner::Adaptive(
                weights::AdaptiveObjectivesLearner::new(n, horizon.unwrap_or(usize::MAX), schedule).map_err(value_err)?,
            ),
            other => return Err(PyValueError::new_err(format!("unknown learner `{other}`"))),
        };
        Ok(Self { learner })
    }

    #[getter]
    fn weights(&mut self) -> Vec<f64> {
        self.learner.inner().weights().weights.clone()
    }

    /// Consumes one loss vector and returns the learning rate used.
    fn update(&mut self, losses: Vec<f64>) -> PyResult<f64> {
        self.learner.inner().update(&losses).map_err(value_err)
    }
}

#[pyfunction]
#[pyo3(signature = (a_pressure, q_pred, p_base, a=0.0, b=1.0))]
fn solve_mean_ma_pred(a_pressure: f64, q_pred: f64, p_base: f64, a: f64, b: f64) -> PyResult<f64> {
    minimax::solve_mean_ma_pred(a_pressure, q_pred, p_base, &range(a, b)?, CostKind::Squared).map_err(value_err)
}

/// Row player minimises. Returns `{row, col, value, residual}`.
#[pyfunction]
#[pyo3(signature = (matrix, tol=1e-4))]
fn solve_zero_sum<'py>(py: Python<'py>, matrix: Vec<Vec<f64>>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let game = GameMatrix::from_rows(&matrix).map_err(value_err)?;
    let settings = SolverSettings { tol, ..SolverSettings::default() };
    let sol = minimax::solve_zero_sum(&game, &settings).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let d = PyDict::new(py);
    d.set_item("row", sol.row)?;
    d.set_item("col", sol.col)?;
    d.set_item("value", sol.value)?;
    d.set_item("residual", sol.residual)?;
    Ok(d)
}

#[pyfunction]
fn interpolate_cdf(levels: Vec<f64>, values: Vec<f64>, x: f64) -> PyResult<f64> {
    Ok(cdf(&QuantileRow::new(levels, values).map_err(value_err)?, x))
}

fn stream_dict<'py>(py: Python<'py>, s: &lamol_core::ingest::SampleStream) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("y", s.labels())?;
    d.set_item("baseline", s.records.iter().map(|r| r.baseline).collect::<Vec<_>>())?;
    d.set_item("groups", s.groups.iter().map(|g| g.id.clone()).collect::<Vec<_>>())?;
    d.set_item("group_values", s.records.iter().map(|r| r.group_values.clone()).collect::<Vec<_>>())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (t, seed=0))]
fn switch_stream<'py>(py: Python<'py>, t: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    stream_dict(py, &gen_switch(t, seed).map_err(value_err)?)
}

/// `setting` is `small`, `medium` or `large`.
#[pyfunction]
#[pyo3(signature = (setting, t=3000, seed=0, d=5))]
fn jump_shift_stream<'py>(py: Python<'py>, setting: &str, t: usize, seed: u64, d: usize) -> PyResult<Bound<'py, PyDict>> {
    let setting = match setting {
        "small" => ShiftSetting::Small,
        "medium" => ShiftSetting::Medium,
        "large" => ShiftSetting::Large,
        other => return Err(PyValueError::new_err(format!("unknown setting `{other}`"))),
    };
    let mut sc = ShiftScenario::new(setting, t, seed);
    sc.d = d;
    stream_dict(py, &gen_jump_shift(&sc).map_err(value_err)?)
}

fn eval_mode(mode: &str) -> PyResult<EvalMode> {
    match mode {
        "auto" => Ok(EvalMode::Auto),
        "realized" => Ok(EvalMode::Realized),
        "expected" => Ok(EvalMode::Expected),
        other => Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    }
}

/// A finished run.
#[pyclass(name = "Trace", frozen)]
struct PyTrace {
    inner: RunTrace,
}

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: read_trace(&path).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_trace(&self.inner, &path).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.config.name.clone()
    }

    #[getter]
    fn completed(&self) -> bool {
        self.inner.is_completed()
    }

    #[getter]
    fn objective_ids(&self) -> Vec<String> {
        self.inner.objective_ids.clone()
    }

    #[getter]
    fn group_ids(&self) -> Vec<String> {
        self.inner.group_ids.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<f64> {
        self.inner.labels()
    }

    #[getter]
    fn predictions(&self) -> Vec<f64> {
        self.inner.predictions()
    }

    #[getter]
    fn mean_predictions(&self) -> Vec<f64> {
        self.inner.mean_predictions()
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.steps.iter().map(|s| s.q.clone()).collect()
    }

    #[getter]
    fn losses(&self) -> Vec<Vec<f64>> {
        self.inner.steps.iter().map(|s| s.losses.clone()).collect()
    }

    #[getter]
    fn etas(&self) -> Vec<f64> {
        self.inner.steps.iter().map(|s| s.eta).collect()
    }

    /// `(window_ends, values)` of the windowed multiaccuracy error.
    #[pyo3(signature = (width, mode="auto"))]
    fn local_ma_error(&self, width: usize, mode: &str) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let s = local_multiaccuracy_error(&self.inner, None, &WindowSpec::steps(width), eval_mode(mode)?).map_err(value_err)?;
        Ok((s.ends, s.values))
    }

    #[pyo3(signature = (width, mode="auto"))]
    fn local_pred_error(&self, width: usize, mode: &str) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let s = local_prediction_error(&self.inner, &WindowSpec::steps(width), CostKind::Squared, eval_mode(mode)?)
            .map_err(value_err)?;
        Ok((s.ends, s.values))
    }

    fn global_ma_error(&self) -> f64 {
        global_ma_error(&self.inner)
    }

    fn global_mc_error(&self, bins: usize) -> PyResult<f64> {
        global_mc_error(&self.inner, bins).map_err(value_err)
    }

    /// Interval-bound checks; returns `{ok, violations, checks: {name: {...}}}`.
    #[pyo3(signature = (lemma31=true, lemma32=true, thm33=true, samples=10_000))]
    fn verify<'py>(&self, py: Python<'py>, lemma31: bool, lemma32: bool, thm33: bool, samples: usize) -> PyResult<Bound<'py, PyDict>> {
        let opts = VerifyOptions {
            checks: BoundChecks { lemma31, lemma32, thm33, envelope: false },
            sample_count: samples,
            ..VerifyOptions::default()
        };
        let rep = verify_interval_bounds(&self.inner, &opts).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("ok", rep.is_ok())?;
        d.set_item("violations", rep.violations())?;
        d.set_item("simplex_violations", rep.simplex_violations)?;
        let checks = PyDict::new(py);
        for c in &rep.checks {
            let e = PyDict::new(py);
            e.set_item("intervals", c.intervals)?;
            e.set_item("violations", c.violations)?;
            e.set_item("worst_slack", c.worst_slack)?;
            checks.set_item(&c.name, e)?;
        }
        d.set_item("checks", checks)?;
        Ok(d)
    }
}

/// Runs one episode. `run` is a run config and `dataset` a dataset block,
/// both as JSON.
#[pyfunction]
#[pyo3(signature = (run, dataset, base_dir=None))]
fn run_episode_json(py: Python<'_>, run: &str, dataset: &str, base_dir: Option<PathBuf>) -> PyResult<PyTrace> {
    let cfg: RunConfig = serde_json::from_str(run).map_err(value_err)?;
    let ds: DatasetConfig = serde_json::from_str(dataset).map_err(value_err)?;
    let base = base_dir.unwrap_or_else(|| PathBuf::from("."));
    py.detach(|| {
        let stream = prepare_stream(&ds, &base).map_err(value_err)?;
        let trace = run_episode(&cfg, &stream).map_err(value_err)?;
        Ok(PyTrace { inner: trace })
    })
}

/// Executes an experiment config file; returns the summary rows.
#[pyfunction]
#[pyo3(signature = (config, out_dir, workers=None))]
fn run_config<'py>(py: Python<'py>, config: PathBuf, out_dir: PathBuf, workers: Option<usize>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::load(&config).map_err(value_err)?;
    let base = config.parent().map(PathBuf::from).unwrap_or_default();
    let outcome = py
        .detach(|| run_experiment(&cfg, &base, &out_dir, workers))
        .map_err(|e| PyRuntimeError::new_err(e.to_json()))?;
    outcome
        .summary
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("run_id", &r.run_id)?;
            d.set_item("metric", &r.metric)?;
            d.set_item("width", r.width)?;
            d.set_item("total", r.total)?;
            d.set_item("max", r.max)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn lamol(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(multiaccuracy_loss, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_error_loss, m)?)?;
    m.add_function(wrap_pyfunction!(multicalibration_loss, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_loss, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_pred_loss, m)?)?;
    m.add_function(wrap_pyfunction!(hedge_update, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_share_update, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_eta, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mean_ma_pred, m)?)?;
    m.add_function(wrap_pyfunction!(solve_zero_sum, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(switch_stream, m)?)?;
    m.add_function(wrap_pyfunction!(jump_shift_stream, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode_json, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_class::<PyWeightLearner>()?;
    m.add_class::<PyTrace>()?;
    Ok(())
}
