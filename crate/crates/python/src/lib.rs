//! Python bindings for the off-dynamics lab.
//!
//! Configurations travel as TOML text, results as plain Python dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use offdyn::agent::{soft_value_iteration_env, ActMode, Agent};
use offdyn::env::Domain;
use offdyn::harness::{self, ExperimentConfig, Method, SeedRun, Sweep};
use offdyn::imitation;
use offdyn::ratio::ExactRatio;
use offdyn::seed::{self, Stream};
use offdyn::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numerical { .. } => PyArithmeticError::new_err(e.to_string()),
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_domain(name: &str) -> PyResult<Domain> {
    match name {
        "src" | "source" => Ok(Domain::Src),
        "trg" | "target" => Ok(Domain::Trg),
        _ => Err(PyValueError::new_err(format!("unknown domain {name:?}; expected src or trg"))),
    }
}

fn parse_mode(name: &str) -> PyResult<ActMode> {
    match name {
        "sample" => Ok(ActMode::Sample),
        "greedy" => Ok(ActMode::Greedy),
        _ => Err(PyValueError::new_err(format!("unknown mode {name:?}; expected sample or greedy"))),
    }
}

/// Round-trip a serializable value through JSON into Python objects.
fn to_object<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// `-log D + rho (r + log D)`.
#[pyfunction]
fn reward_augmented(rho: f64, r_src: f64, d: f64) -> f64 {
    imitation::reward_augmented_value(rho, r_src, d)
}

/// `-rho log D`.
#[pyfunction]
fn dail_reward(rho: f64, d: f64) -> f64 {
    imitation::dail_reward_value(rho, d)
}

/// An experiment configuration.
#[pyclass(name = "Experiment", module = "offdyn_py", from_py_object)]
#[derive(Clone)]
struct PyExperiment {
    config: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    /// Parse TOML text, applying `KEY=VALUE` overrides first.
    #[new]
    #[pyo3(signature = (toml="", overrides=Vec::new()))]
    fn new(toml: &str, overrides: Vec<String>) -> PyResult<Self> {
        let config = ExperimentConfig::from_toml_str(toml, &overrides).map_err(to_py)?;
        Ok(PyExperiment { config })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides=Vec::new()))]
    fn load(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        let config = ExperimentConfig::load(&path, &overrides).map_err(to_py)?;
        Ok(PyExperiment { config })
    }

    /// A copy with more overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        PyExperiment::new(&self.config.to_toml_string(), overrides)
    }

    fn to_toml(&self) -> String {
        self.config.to_toml_string()
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.config.seeds.clone()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.config.env.n_actions()
    }

    #[getter]
    fn n_states(&self) -> Option<usize> {
        self.config.env.n_states()
    }

    /// Exact `p_trg / p_src` for tabular states, by index.
    fn exact_ratio(&self, s: usize, a: usize, next: usize) -> PyResult<f64> {
        let exact = ExactRatio::from_pair(&self.config.pair().map_err(to_py)?).map_err(to_py)?;
        exact.ratio(s, a, next).map_err(to_py)
    }

    /// Soft-optimal Q-values of the given domain, one row per state.
    #[pyo3(signature = (domain="trg", alpha=None))]
    fn soft_q(&self, domain: &str, alpha: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
        let pair = self.config.pair().map_err(to_py)?;
        let env = pair.get(parse_domain(domain)?);
        let alpha = alpha.unwrap_or(self.config.agent.alpha);
        let sol = soft_value_iteration_env(env, alpha, self.config.agent.gamma).map_err(to_py)?;
        Ok(sol.q.chunks(sol.n_actions).map(|r| r.to_vec()).collect())
    }

    /// Train one method on one seed. Imitation methods roll out their
    /// expert from a DARC run on the same seed unless `expert` is given.
    #[pyo3(signature = (method, seed=0, expert=None))]
    fn train(&self, py: Python<'_>, method: &str, seed: u64, expert: Option<&PyRun>) -> PyResult<PyRun> {
        let m = Method::parse(method).map_err(to_py)?;
        let config = self.config.clone();
        let expert_set = expert.and_then(|e| e.run.expert.clone());
        let run = py
            .detach(move || -> offdyn::Result<SeedRun> {
                if m == Method::Darc {
                    return harness::run_darc(&config, seed);
                }
                let demo = match expert_set {
                    Some(e) => Some(e),
                    None if m.needs_expert() => harness::run_darc(&config, seed)?.expert,
                    None => None,
                };
                harness::run_baseline(&config, m, seed, demo.as_ref())
            })
            .map_err(to_py)?;
        Ok(PyRun { run })
    }

    /// Run methods over every configured seed; returns their aggregates.
    /// When `out` is given, run directories are written there.
    #[pyo3(signature = (methods, out=None))]
    fn run<'py>(&self, py: Python<'py>, methods: Vec<String>, out: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
        let ms = methods
            .iter()
            .map(|m| Method::parse(m))
            .collect::<offdyn::Result<Vec<_>>>()
            .map_err(to_py)?;
        let config = self.config.clone();
        let results = py
            .detach(move || -> offdyn::Result<_> {
                let results = harness::run_methods(&config, &ms)?;
                if let Some(root) = out {
                    harness::write_results(&root, &config, &results)?;
                }
                Ok(results)
            })
            .map_err(to_py)?;
        let aggregates: Vec<_> = results.iter().map(|r| &r.aggregate).collect();
        to_object(py, &aggregates)
    }

    /// Run an ablation sweep (`clip`, `pf`, `eta`, `k` or `n`); returns
    /// `{label: [aggregate, ...]}`.
    #[pyo3(signature = (sweep, methods=None))]
    fn sweep<'py>(&self, py: Python<'py>, sweep: &str, methods: Option<Vec<String>>) -> PyResult<Bound<'py, PyDict>> {
        let sw = Sweep::parse(sweep).map_err(to_py)?;
        let ms = match methods {
            Some(ms) => ms
                .iter()
                .map(|m| Method::parse(m))
                .collect::<offdyn::Result<Vec<_>>>()
                .map_err(to_py)?,
            None => sw.default_methods(),
        };
        let config = self.config.clone();
        let points = py
            .detach(move || harness::run_sweep(&config, sw, &ms, None))
            .map_err(to_py)?;
        let out = PyDict::new(py);
        for p in &points {
            let aggregates: Vec<_> = p.results.iter().map(|r| &r.aggregate).collect();
            out.set_item(&p.label, to_object(py, &aggregates)?)?;
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Experiment(name={:?}, seeds={:?})", self.config.name, self.config.seeds)
    }
}

/// A finished training run with its agent and learning curve.
#[pyclass(name = "Run", module = "offdyn_py")]
struct PyRun {
    run: SeedRun,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn method(&self) -> &'static str {
        self.run.method.name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.run.seed
    }

    #[getter]
    fn final_source_return(&self) -> f64 {
        self.run.summary.final_source_train_return
    }

    #[getter]
    fn final_target_return(&self) -> f64 {
        self.run.summary.final_target_eval_return
    }

    #[getter]
    fn target_reward_reads(&self) -> u64 {
        self.run.summary.target_reward_reads
    }

    #[getter]
    fn has_expert(&self) -> bool {
        self.run.expert.is_some()
    }

    /// The metrics table as CSV text.
    fn metrics_csv(&self) -> String {
        self.run.metrics.to_csv_string()
    }

    /// The learning curve as a list of dicts.
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.run.metrics.points)
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.run.summary)
    }

    /// The tabular Q-table, one row per state; `None` for neural agents.
    fn q_table(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.run.agent.n_actions();
        self.run.agent.q_table().map(|q| q.chunks(n).map(|r| r.to_vec()).collect())
    }

    /// Mean and standard error of `episodes` returns in `domain`.
    #[pyo3(signature = (experiment, domain="trg", episodes=100, mode="sample", seed=0))]
    fn evaluate(&self, experiment: &PyExperiment, domain: &str, episodes: usize, mode: &str, seed: u64) -> PyResult<(f64, f64)> {
        let pair = experiment.config.pair().map_err(to_py)?;
        if self.run.agent.features() != &pair.spec().features() {
            return Err(PyValueError::new_err("agent does not match the experiment's environment"));
        }
        let mut env = pair.get(parse_domain(domain)?).clone();
        let mut rng = seed::stream(seed, Stream::Evaluation);
        let ev = self
            .run
            .agent
            .evaluate(&mut env, episodes, parse_mode(mode)?, &mut rng)
            .map_err(to_py)?;
        Ok((ev.mean, ev.stderr))
    }

    fn save_agent(&self, path: PathBuf) -> PyResult<()> {
        self.run.agent.save(&path).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Run(method={:?}, seed={}, source={:.3}, target={:.3})",
            self.run.method.name(),
            self.run.seed,
            self.run.summary.final_source_train_return,
            self.run.summary.final_target_eval_return
        )
    }
}

/// Load a saved agent and evaluate it.
#[pyfunction]
#[pyo3(signature = (path, experiment, domain="trg", episodes=100, mode="sample", seed=0))]
fn evaluate_checkpoint(
    path: PathBuf,
    experiment: &PyExperiment,
    domain: &str,
    episodes: usize,
    mode: &str,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let agent = Agent::load(&path).map_err(to_py)?;
    let pair = experiment.config.pair().map_err(to_py)?;
    let mut env = pair.get(parse_domain(domain)?).clone();
    let ev = agent
        .evaluate(&mut env, episodes, parse_mode(mode)?, &mut seed::stream(seed, Stream::Evaluation))
        .map_err(to_py)?;
    Ok((ev.mean, ev.stderr))
}

#[pymodule]
fn offdyn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExperiment>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(reward_augmented, m)?)?;
    m.add_function(wrap_pyfunction!(dail_reward, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_checkpoint, m)?)?;
    m.add("CSV_HEADER", harness::CSV_HEADER.join(","))?;
    Ok(())
}
