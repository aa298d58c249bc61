//! Python bindings for the `dsgda` crate.
//!
//! Structured results cross the boundary as native Python objects decoded
//! from the crate's JSON serializations.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dsgda::config::{preset_names, preset_text, ExperimentConfig};
use dsgda::data::parse_libsvm_str;
use dsgda::experiment::{family_bounds, stability_study, sweep, ExperimentError, Instance, Point};
use dsgda::report;
use dsgda::topology::{build_mixing_matrix, Topology, TopologyKind};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn experiment_err(e: ExperimentError) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn from_json<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn parse_config(text: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_toml_str(text, Path::new("<python>")).map_err(value_err)
}

/// Symmetric doubly-stochastic gossip matrix.
#[pyclass(name = "MixingMatrix", module = "dsgda_py", frozen)]
struct PyMixingMatrix {
    inner: dsgda::topology::MixingMatrix,
    kind: TopologyKind,
}

#[pymethods]
impl PyMixingMatrix {
    #[new]
    fn new(topology: &str, m: usize) -> PyResult<Self> {
        let kind: TopologyKind = topology.parse().map_err(value_err)?;
        let inner = build_mixing_matrix(Topology::new(kind, m)).map_err(value_err)?;
        Ok(Self { inner, kind })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn topology(&self) -> &'static str {
        self.kind.name()
    }

    /// Second-largest eigenvalue magnitude.
    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda()
    }

    #[getter]
    fn spectral_gap(&self) -> f64 {
        self.inner.spectral_gap()
    }

    #[getter]
    fn spectrum(&self) -> Vec<f64> {
        self.inner.spectrum().to_vec()
    }

    /// Rows of the matrix.
    fn rows(&self) -> Vec<Vec<f64>> {
        let m = self.inner.m();
        (0..m).map(|i| (0..m).map(|k| self.inner.weight(i, k)).collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("MixingMatrix(topology='{}', m={}, lambda={:.6})", self.kind.name(), self.inner.m(), self.inner.lambda())
    }
}

/// An experiment configuration parsed from TOML.
#[pyclass(name = "Config", module = "dsgda_py")]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_config(toml)? })
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let text = preset_text(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset '{name}'")))?;
        Self::new(text)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    /// Every applicable bound at the configured point.
    fn bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let cfg = &self.inner;
        let point = Point::base(cfg);
        let inst = Instance::build(cfg, &point).map_err(experiment_err)?;
        let (reports, ..) = family_bounds(&inst.problem.family, &inst.bound_inputs(cfg, &point));
        from_json(py, &serde_json::to_string(&reports).map_err(value_err)?)
    }

    /// Coupled-run stability study; returns the JSON summary as a dict.
    #[pyo3(signature = (seeds=None))]
    fn stability<'py>(&self, py: Python<'py>, seeds: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        let mut cfg = self.inner.clone();
        if let Some(k) = seeds {
            cfg.seeds = k;
            cfg.validate(Path::new("<python>")).map_err(value_err)?;
        }
        let study = py.detach(|| stability_study(&cfg, &Point::base(&cfg))).map_err(experiment_err)?;
        from_json(py, &report::stability_summary_json(&study))
    }

    /// Full sweep; returns `(sweep_csv, sweep_bounds_csv)`.
    fn sweep(&self, py: Python<'_>) -> PyResult<(String, String)> {
        let cfg = self.inner.clone();
        let res = py.detach(|| sweep(&cfg)).map_err(experiment_err)?;
        Ok((report::sweep_csv(&res), report::sweep_bounds_csv(&res)))
    }

    fn __repr__(&self) -> String {
        format!("Config(T={}, m={}, n={})", self.inner.iterations, self.inner.data.m, self.inner.data.n)
    }
}

/// `C_lambda` topology constant for decay exponent `k`.
#[pyfunction]
fn c_lambda(lambda_: f64, k: f64) -> PyResult<f64> {
    dsgda::topology::c_lambda(lambda_, k).map_err(value_err)
}

type SparseRecord = (f64, Vec<(u32, f64)>);

/// Parses LIBSVM text into `(label, [(index, value), ...])` records.
#[pyfunction]
fn parse_libsvm(text: &str) -> PyResult<Vec<SparseRecord>> {
    let recs = parse_libsvm_str(text).map_err(value_err)?;
    Ok(recs.into_iter().map(|r| (r.label, r.features)).collect())
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    preset_names().collect()
}

/// Joins sweep CSVs; returns the comparison as a dict.
#[pyfunction]
fn compare<'py>(py: Python<'py>, stability_csv: &str, bounds_csv: &str) -> PyResult<Bound<'py, PyAny>> {
    let r = report::compare_report(stability_csv, bounds_csv).map_err(experiment_err)?;
    from_json(py, &serde_json::to_string(&r).map_err(value_err)?)
}

#[pymodule]
fn dsgda_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMixingMatrix>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(c_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(parse_libsvm, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
