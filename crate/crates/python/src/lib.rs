//! Python bindings: risk metrics, scenarios, single planning steps and
//! closed-loop episodes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use riskplan::belief::{observe, FeatureSchema, NoiseProfile};
use riskplan::config::Config;
use riskplan::harness::{load_scenarios, Noise};
use riskplan::{risk, SelectionPolicy};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn policy(name: &str) -> PyResult<SelectionPolicy> {
    name.parse().map_err(value_error)
}

fn config(json: Option<&str>) -> PyResult<Config> {
    match json {
        Some(text) => Config::from_json(text, "<config>").map_err(value_error),
        None => Ok(Config::default()),
    }
}

#[pyfunction]
fn var(samples: Vec<f64>, alpha: f64) -> PyResult<f64> {
    risk::var(&samples, alpha).map_err(value_error)
}

#[pyfunction]
fn var_plus(samples: Vec<f64>, alpha: f64) -> PyResult<f64> {
    risk::var_plus(&samples, alpha).map_err(value_error)
}

#[pyfunction]
fn cvar(samples: Vec<f64>, alpha: f64) -> PyResult<f64> {
    risk::cvar(&samples, alpha).map_err(value_error)
}

#[pyfunction]
fn ccvar(samples: Vec<f64>, alpha: f64) -> PyResult<f64> {
    risk::ccvar(&samples, alpha).map_err(value_error)
}

/// A validated driving scenario.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: riskplan::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Loads a bundled scenario by id or a scenario JSON file by path.
    #[staticmethod]
    fn load(name: &str) -> PyResult<Self> {
        let mut all = load_scenarios(name).map_err(value_error)?;
        if all.len() != 1 {
            return Err(PyValueError::new_err(format!("`{name}` names {} scenarios", all.len())));
        }
        Ok(Self { inner: all.remove(0) })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        riskplan::Scenario::from_json(text, "<string>").map(|inner| Self { inner }).map_err(value_error)
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn agents(&self) -> usize {
        self.inner.agents.len()
    }

    #[getter]
    fn horizon(&self) -> u32 {
        self.inner.episode_horizon
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("scenario serializes")
    }

    fn __repr__(&self) -> String {
        format!("Scenario(id={:?}, agents={})", self.inner.id, self.inner.agents.len())
    }
}

/// Plans the first step of `scenario` and returns one `(ax, ay)` per agent.
#[pyfunction]
#[pyo3(signature = (scenario, policy_name, iterations, seed, noise=true, config_json=None))]
fn plan(
    scenario: &PyScenario,
    policy_name: &str,
    iterations: u64,
    seed: u64,
    noise: bool,
    config_json: Option<&str>,
) -> PyResult<Vec<(f64, f64)>> {
    let config = config(config_json)?;
    let profile = if noise { config.active_noise() } else { NoiseProfile::off() };
    let sc = &scenario.inner;
    let schema = FeatureSchema::for_scenario(sc, &profile);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let belief = observe(&sc.initial_state(), &schema, &mut rng).map_err(value_error)?;
    let cfg = riskplan::PlannerConfig {
        iterations,
        policy: policy(policy_name)?,
        ..config.planner
    };
    let out = riskplan::plan(&belief, sc, &cfg, &mut rng).map_err(value_error)?;
    Ok(out.action().0.iter().map(|a| (a.ax, a.ay)).collect())
}

/// Runs one closed-loop episode and returns its record as a dict.
#[pyfunction]
#[pyo3(signature = (scenario, policy_name, iterations, seed, noise=true, config_json=None))]
fn run_episode<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    policy_name: &str,
    iterations: u64,
    seed: u64,
    noise: bool,
    config_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = config(config_json)?;
    let noise = if noise { Noise::On } else { Noise::Off };
    let r = py
        .detach(|| riskplan::harness::run_episode(&scenario.inner, policy(policy_name)?, iterations, seed, noise, &config).map_err(value_error))?;
    let d = PyDict::new(py);
    d.set_item("scenario", &r.scenario)?;
    d.set_item("policy", r.policy.name())?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("seed", r.seed)?;
    d.set_item("noise", r.noise.name())?;
    d.set_item("outcome", serde_json::to_value(r.outcome).unwrap().as_str())?;
    d.set_item("success", r.outcome.is_success())?;
    d.set_item("steps", r.steps)?;
    d.set_item("fallback_steps", r.fallback_steps)?;
    d.set_item("mean_start_states", r.mean_start_states)?;
    d.set_item("step_ms", r.step_ms)?;
    Ok(d)
}

/// Default configuration as JSON, a starting point for `config_json`.
#[pyfunction]
fn default_config() -> String {
    Config::default().to_json()
}

#[pymodule]
fn riskplan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(var, m)?)?;
    m.add_function(wrap_pyfunction!(var_plus, m)?)?;
    m.add_function(wrap_pyfunction!(cvar, m)?)?;
    m.add_function(wrap_pyfunction!(ccvar, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_and_planning_round_trip() {
        Python::initialize();
        assert_eq!(cvar(vec![1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 3.0);
        assert!(ccvar(vec![], 0.5).is_err());
        assert!(policy("greedy").is_err());

        let sc = PyScenario::load("merge2").unwrap();
        assert_eq!(PyScenario::from_json(&sc.to_json()).unwrap().id(), "merge2");
        let a = plan(&sc, "cvar", 150, 4, true, None).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a, plan(&sc, "cvar", 150, 4, true, None).unwrap());
        assert!(plan(&sc, "krlcb", 150, 4, true, Some("{not json")).is_err());
    }
}
