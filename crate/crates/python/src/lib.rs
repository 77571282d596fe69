//! Python bindings: `Model` and `AdmissionProblem`, with results returned as
//! plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use retrial_core::analytic::{self, ModelSpec};
use retrial_core::optimizer::{self, AdmissionProblem as CoreProblem};
use retrial_core::oracles::{certify_truncation, TruncationConfig};
use retrial_core::simulator::{self, SimConfig};
use retrial_core::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidRates(_) | Error::InvalidDistribution(_) | Error::Domain(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if let Ok(s) = obj.extract::<String>() {
        s
    } else {
        py.import_bound("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A retrial queue: five arrival rates, a service law and a seek law.
/// Built from a dict or JSON string in the model-file format.
#[pyclass(module = "retrial")]
#[derive(Clone)]
struct Model {
    inner: ModelSpec,
}

#[pymethods]
impl Model {
    #[new]
    fn new(py: Python<'_>, spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let inner: ModelSpec = from_py(py, spec)?;
        inner.validate().map_err(err)?;
        Ok(Model { inner })
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<PyObject> {
        to_py(py, &self.inner)
    }

    fn stability_margin(&self) -> f64 {
        analytic::stability_margin(&self.inner)
    }

    #[pyo3(signature = (pmf_max=None))]
    fn analyze(&self, py: Python<'_>, pmf_max: Option<usize>) -> PyResult<PyObject> {
        to_py(py, &analytic::analyze(&self.inner, pmf_max).map_err(err)?)
    }

    /// Orbit-size pmf at an arbitrary epoch for `0..=n_max`.
    fn orbit_pmf(&self, n_max: usize) -> PyResult<Vec<f64>> {
        analytic::orbit_pmf(&self.inner, n_max).map_err(err)
    }

    /// Orbit-size pmf at departures from the truncated chain.
    #[pyo3(signature = (max_orbit=400, tail_tolerance=1e-10))]
    fn truncated_pmf(&self, max_orbit: usize, tail_tolerance: f64) -> PyResult<Vec<f64>> {
        let cfg = TruncationConfig::new(max_orbit, tail_tolerance).map_err(err)?;
        retrial_core::oracles::embedded_stationary_truncated(&self.inner, &cfg)
            .map(|s| s.pi)
            .map_err(err)
    }

    /// Doubling truncation levels tried and their boundary masses.
    #[pyo3(signature = (start=25, cap=8192, tail_tolerance=1e-10))]
    fn truncation_demand(&self, start: usize, cap: usize, tail_tolerance: f64) -> Vec<(usize, f64)> {
        certify_truncation(&self.inner, start, cap, tail_tolerance).0
    }

    /// Total-variation distance to the same model with instantaneous seeks.
    fn instant_seek_distance(&self) -> PyResult<f64> {
        analytic::instant_seek_distance(&self.inner).map_err(err)
    }

    #[pyo3(signature = (departures=100_000, replications=10, seed=1))]
    fn simulate(&self, py: Python<'_>, departures: u64, replications: usize, seed: u64) -> PyResult<PyObject> {
        let cfg = SimConfig::new(departures, replications, seed);
        let est = py.allow_threads(|| simulator::run(&self.inner, &cfg)).map_err(err)?;
        to_py(py, &est)
    }

    fn __repr__(&self) -> String {
        format!("Model({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// Throughput maximization over joining probabilities.
#[pyclass(module = "retrial")]
struct AdmissionProblem {
    inner: CoreProblem,
}

#[pymethods]
impl AdmissionProblem {
    #[new]
    fn new(py: Python<'_>, spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let inner: CoreProblem = from_py(py, spec)?;
        inner.validate().map_err(err)?;
        Ok(AdmissionProblem { inner })
    }

    fn model(&self, q: [f64; 4]) -> Model {
        Model {
            inner: self.inner.model(q),
        }
    }

    fn evaluate(&self, py: Python<'_>, q: [f64; 4]) -> PyResult<PyObject> {
        to_py(py, &optimizer::evaluate(&self.inner, q))
    }

    #[pyo3(signature = (restarts=32, seed=1))]
    fn solve(&self, py: Python<'_>, restarts: usize, seed: u64) -> PyResult<PyObject> {
        let sol = py.allow_threads(|| optimizer::solve(&self.inner, restarts, seed)).map_err(err)?;
        to_py(py, &sol)
    }
}

#[pymodule]
fn retrial(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<AdmissionProblem>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
