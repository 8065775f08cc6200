//! Python bindings: models, schemes, iteration, exact values and sampling.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mannfix::analysis::{self, StateClass};
use mannfix::experiments::{self, GeneratorConfig};
use mannfix::iteration::ConstantProvider;
use mannfix::sampling::{self, SamplerState, StructuralPrior};
use mannfix::{IndexSets, StoppingRule, Trajectory, VectorScheme};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A stochastic game with MAX and MIN states.
#[pyclass(name = "Ssg", module = "mannfix_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySsg {
    inner: mannfix::Ssg,
}

#[pymethods]
impl PySsg {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        mannfix::Ssg::from_json(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        mannfix::Ssg::load(path)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Random normalised game `index` from a generator configuration (JSON).
    #[staticmethod]
    #[pyo3(signature = (index, config = None))]
    fn generate(index: usize, config: Option<&str>) -> PyResult<Self> {
        let cfg: GeneratorConfig = match config {
            Some(text) => serde_json_from(text)?,
            None => GeneratorConfig::default(),
        };
        cfg.validate().map_err(value_err)?;
        experiments::generate_game(&cfg, index)
            .map(|inner| Self { inner })
            .map_err(runtime_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_pairs(&self) -> usize {
        self.inner.num_pairs()
    }

    fn is_markov_chain(&self) -> bool {
        self.inner.is_markov_chain()
    }

    fn bellman(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.bellman_apply(&v).map_err(value_err)
    }

    fn split_state_action(&self) -> Self {
        Self {
            inner: self.inner.split_state_action(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Ssg(states={}, pairs={})",
            self.inner.num_states(),
            self.inner.num_pairs()
        )
    }
}

fn serde_json_from(text: &str) -> PyResult<GeneratorConfig> {
    serde_json::from_str(text).map_err(value_err)
}

/// Learning-rate and dampening sequences.
#[pyclass(name = "Scheme", module = "mannfix_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScheme {
    inner: mannfix::Scheme,
}

#[pymethods]
impl PyScheme {
    /// Parses `alpha=<family>,beta=<family>` or `S1`..`S6`.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        text.parse().map(|inner| Self { inner }).map_err(value_err)
    }

    /// `(alpha_n, beta_n)` at step `n`.
    fn eval(&self, n: usize) -> PyResult<(f64, f64)> {
        self.inner.try_eval(n).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Scheme('{}')", self.inner)
    }
}

/// Result of a Mann run.
#[pyclass(name = "Run", module = "mannfix_py", frozen, get_all)]
struct PyRun {
    steps: Vec<usize>,
    errors: Vec<Option<f64>>,
    max_changes: Vec<f64>,
    final_value: Vec<f64>,
    termination: String,
    component_updates: u64,
}

impl From<Trajectory> for PyRun {
    fn from(t: Trajectory) -> Self {
        Self {
            steps: t.records.iter().map(|r| r.step).collect(),
            errors: t.records.iter().map(|r| r.error).collect(),
            max_changes: t.records.iter().map(|r| r.max_change).collect(),
            termination: format!("{:?}", t.termination),
            component_updates: t.component_updates,
            final_value: t.final_value.0,
        }
    }
}

/// Mann iteration on the Bellman operator of `game`.
///
/// `mode` is `full`, `chaotic` (round robin) or `random-chaotic`.
#[pyfunction]
#[pyo3(signature = (game, scheme, steps, x0 = None, reference = None, error_threshold = None, change_threshold = None, mode = "full", seed = 0))]
#[allow(clippy::too_many_arguments)]
fn iterate(
    py: Python<'_>,
    game: &PySsg,
    scheme: &PyScheme,
    steps: usize,
    x0: Option<Vec<f64>>,
    reference: Option<Vec<f64>>,
    error_threshold: Option<f64>,
    change_threshold: Option<f64>,
    mode: &str,
    seed: u64,
) -> PyResult<PyRun> {
    let g = &game.inner;
    let d = g.num_states();
    let x0 = x0.unwrap_or_else(|| vec![0.0; d]);
    let mut stop = StoppingRule::steps(steps);
    if let Some(t) = error_threshold {
        stop = stop.with_error_threshold(t);
    }
    if let Some(t) = change_threshold {
        stop = stop.with_change_threshold(t);
    }
    let base = scheme.inner.clone();
    let r = reference.as_deref();
    let t = py
        .detach(|| {
            let mut p = ConstantProvider::unbounded(g);
            match mode {
                "full" => mannfix::iterate(&mut p, &base, &x0, &stop, r).map_err(|e| e.to_string()),
                "chaotic" => {
                    let mut vs = VectorScheme::replicated(base, d);
                    mannfix::chaotic_iterate(
                        &mut p,
                        &mut vs,
                        &IndexSets::round_robin(d),
                        &x0,
                        &stop,
                        r,
                    )
                    .map_err(|e| e.to_string())
                }
                "random-chaotic" => {
                    mannfix::random_chaotic_iterate(&mut p, &base, seed, &x0, &stop, r)
                        .map_err(|e| e.to_string())
                }
                other => Err(format!("unknown mode `{other}`")),
            }
        })
        .map_err(PyValueError::new_err)?;
    Ok(t.into())
}

/// Kleene iteration from zero. Returns `(value, converged, steps)`.
#[pyfunction]
#[pyo3(signature = (game, max_steps = 10_000_000, threshold = 1e-12))]
fn kleene(
    py: Python<'_>,
    game: &PySsg,
    max_steps: usize,
    threshold: f64,
) -> PyResult<(Vec<f64>, bool, usize)> {
    let stop = StoppingRule::steps(max_steps).with_change_threshold(threshold);
    let r = py
        .detach(|| mannfix::kleene_iterate(&game.inner, &stop))
        .map_err(value_err)?;
    Ok((r.value.0, r.converged, r.steps))
}

/// Value by policy enumeration. Returns `(value, min_policy, max_policy)`.
#[pyfunction]
#[pyo3(signature = (game, budget = 10_000_000))]
#[allow(clippy::type_complexity)]
fn exact_value(
    py: Python<'_>,
    game: &PySsg,
    budget: u128,
) -> PyResult<(Vec<f64>, Vec<Option<usize>>, Vec<Option<usize>>)> {
    let v = py
        .detach(|| analysis::exact_ssg_value(&game.inner, budget))
        .map_err(value_err)?;
    let (pmin, pmax) = v
        .witness
        .ok_or_else(|| runtime_err("no witness policies"))?;
    Ok((v.value.0, pmin.choices, pmax.choices))
}

/// Labels of a Markov chain: `zero`, `infinite` or `finite` per state.
#[pyfunction]
fn classify(game: &PySsg) -> PyResult<Vec<&'static str>> {
    let c = analysis::classify_chain(&game.inner).map_err(value_err)?;
    Ok(c.labels
        .iter()
        .map(|l| match l {
            StateClass::Zero => "zero",
            StateClass::Infinite => "infinite",
            StateClass::Finite => "finite",
        })
        .collect())
}

/// Exact value of a Markov chain; infinite states map to `inf`.
#[pyfunction]
fn chain_value(game: &PySsg) -> PyResult<Vec<f64>> {
    analysis::exact_chain_value(&game.inner)
        .map(|v| v.value.0)
        .map_err(value_err)
}

/// Builds empirical games from simulated transitions of a true game.
#[pyclass(name = "Sampler", module = "mannfix_py")]
struct PySampler {
    truth: mannfix::Ssg,
    prior: StructuralPrior,
    state: SamplerState,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PySampler {
    #[new]
    #[pyo3(signature = (truth, seed = 0))]
    fn new(truth: &PySsg, seed: u64) -> Self {
        let prior = StructuralPrior::from_model(&truth.inner);
        let state = SamplerState::new(&prior);
        Self {
            truth: truth.inner.clone(),
            prior,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Draws `k` uniformly chosen state-action pairs and one transition each.
    fn observe(&mut self, k: usize) -> PyResult<()> {
        sampling::batch_observe(&mut self.state, &self.truth, &self.prior, k, &mut self.rng)
            .map(|_| ())
            .map_err(value_err)
    }

    #[getter]
    fn observations(&self) -> u64 {
        self.state.total_observations()
    }

    fn empirical(&self) -> PySsg {
        PySsg {
            inner: sampling::empirical_ssg(&self.state, &self.prior),
        }
    }

    /// Largest gap between empirical and true transition probabilities.
    fn transition_distance(&self) -> PyResult<f64> {
        sampling::transition_distance(
            &sampling::empirical_ssg(&self.state, &self.prior),
            &self.truth,
        )
        .map_err(value_err)
    }
}

#[pymodule]
fn mannfix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySsg>()?;
    m.add_class::<PyScheme>()?;
    m.add_class::<PyRun>()?;
    m.add_class::<PySampler>()?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(kleene, m)?)?;
    m.add_function(wrap_pyfunction!(exact_value, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(chain_value, m)?)?;
    Ok(())
}
