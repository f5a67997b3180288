//! Python bindings. Matrices come in as sequences of rows (lists or 2-D
//! numpy arrays); structured results come back as plain dicts.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;
use selinf_core::geometry::{Interval, TruncationSet};
use selinf_core::inference::{self, AnalysisOptions, Method, SigmaSpec, TargetKind};
use selinf_core::lasso::{DesignMatrix, LassoOptions, ResponseVector};
use selinf_core::simulation::{self, DesignScheme, StudyConfig};
use selinf_core::{tgauss, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Input(_) | Error::Dimension(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn design(rows: Vec<Vec<f64>>, names: Option<Vec<String>>) -> PyResult<DesignMatrix> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("design rows have unequal lengths"));
    }
    let m = DMatrix::from_row_iterator(n, p, rows.into_iter().flatten());
    DesignMatrix::new(m, names).map_err(err)
}

fn support(intervals: &[(f64, f64)]) -> TruncationSet {
    TruncationSet::new(intervals.iter().map(|&(a, b)| Interval::new(a, b)), 0.0)
}

/// Round-trip any serializable value through json so Python sees dicts.
fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<PyObject> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

/// Union of closed intervals on the real line.
#[pyclass(name = "TruncationSet", frozen)]
struct PyTruncationSet(TruncationSet);

#[pymethods]
impl PyTruncationSet {
    #[new]
    fn new(intervals: Vec<(f64, f64)>) -> Self {
        Self(support(&intervals))
    }

    #[getter]
    fn intervals(&self) -> Vec<(f64, f64)> {
        self.0.intervals().iter().map(|iv| (iv.lo, iv.hi)).collect()
    }

    #[pyo3(signature = (z, tol = 0.0))]
    fn contains(&self, z: f64, tol: f64) -> bool {
        self.0.contains(z, tol)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("TruncationSet({:?})", self.intervals())
    }
}

/// N(mean, variance) restricted to a truncation set.
#[pyclass(name = "TruncatedGaussian", frozen)]
struct PyTruncatedGaussian(tgauss::TruncatedGaussian);

#[pymethods]
impl PyTruncatedGaussian {
    #[new]
    fn new(mean: f64, variance: f64, support: &PyTruncationSet) -> PyResult<Self> {
        tgauss::TruncatedGaussian::new(mean, variance, support.0.clone()).map(Self).map_err(err)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.0.cdf(x).map_err(err)
    }

    fn sf(&self, x: f64) -> PyResult<f64> {
        self.0.cdf_sf(x).map(|v| v.1).map_err(err)
    }

    fn mean(&self) -> PyResult<f64> {
        self.0.expectation().map_err(err)
    }
}

#[pyfunction]
fn tg_pivot(z_obs: f64, mean: f64, variance: f64, support: &PyTruncationSet) -> PyResult<f64> {
    tgauss::tg_pivot(z_obs, mean, variance, &support.0).map_err(err)
}

/// Equal-tailed 1 − alpha interval for the mean; returns (lower, upper).
#[pyfunction]
#[pyo3(signature = (z_obs, variance, support, alpha = 0.1))]
fn tg_interval(z_obs: f64, variance: f64, support: &PyTruncationSet, alpha: f64) -> PyResult<(f64, f64)> {
    let iv = tgauss::tg_interval(z_obs, variance, &support.0, alpha).map_err(err)?;
    Ok((iv.lower, iv.upper))
}

/// Returns (estimate, unbounded).
#[pyfunction]
fn tg_mle(z_obs: f64, variance: f64, support: &PyTruncationSet) -> PyResult<(f64, bool)> {
    let m = tgauss::tg_mle(z_obs, variance, &support.0).map_err(err)?;
    Ok((m.value, m.unbounded))
}

/// Lasso at a sum-scale penalty: ½‖y − Xβ‖² + penalty·‖β‖₁.
#[pyfunction]
fn fit_lasso(py: Python<'_>, x: Vec<Vec<f64>>, y: Vec<f64>, penalty: f64) -> PyResult<PyObject> {
    let x = design(x, None)?;
    let y = ResponseVector::from_slice(&y).map_err(err)?;
    let fit = selinf_core::lasso::fit_lasso(&x, &y, &LassoOptions::with_penalty(penalty)).map_err(err)?;
    to_py(py, &fit)
}

/// Selective inference for every active variable. `sigma` takes the CLI
/// forms: "known:<value>", "ols" or "reid".
#[pyfunction]
#[pyo3(signature = (x, y, penalty, methods = None, target = "partial", sigma = "ols", alpha = 0.1,
                    cutoff = None, lambda_high = None, names = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    penalty: f64,
    methods: Option<Vec<String>>,
    target: &str,
    sigma: &str,
    alpha: f64,
    cutoff: Option<f64>,
    lambda_high: Option<f64>,
    names: Option<Vec<String>>,
    seed: u64,
) -> PyResult<PyObject> {
    let x = design(x, names)?;
    let methods: Vec<Method> = match methods {
        Some(v) => v.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(err)?,
        None => vec![Method::TzMs],
    };
    let target: TargetKind = target.parse().map_err(err)?;
    let sigma: SigmaSpec = sigma.parse().map_err(err)?;
    let opts = AnalysisOptions {
        alpha,
        cutoff,
        lambda_high,
        seed,
        ..AnalysisOptions::default()
    };
    let a = py
        .allow_threads(|| inference::analyze(&x, &DVector::from_vec(y), penalty, &methods, target, sigma, &opts))
        .map_err(err)?;
    to_py(py, &a)
}

#[pyfunction]
fn universal_lambda(n: usize, p: usize) -> f64 {
    inference::universal_lambda(n, p)
}

/// (δ_low, δ_high) for an independent Gaussian design.
#[pyfunction]
#[pyo3(signature = (n, p, reps = 1000, seed = 20240601))]
fn calibrate_delta(py: Python<'_>, n: usize, p: usize, reps: usize, seed: u64) -> PyResult<(f64, f64)> {
    py.allow_threads(|| simulation::calibrate_delta(n, p, &DesignScheme::Independent, reps, seed)).map_err(err)
}

/// Runs a coverage study from a config given as a JSON string or dict.
#[pyfunction]
#[pyo3(signature = (config, threads = None))]
fn run_study(py: Python<'_>, config: &Bound<'_, PyAny>, threads: Option<usize>) -> PyResult<PyObject> {
    let text: String = match config.extract::<String>() {
        Ok(s) => s,
        Err(_) => py.import("json")?.call_method1("dumps", (config,))?.extract()?,
    };
    let cfg: StudyConfig = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rep = py.allow_threads(|| simulation::run_study_with_threads(&cfg, threads)).map_err(err)?;
    to_py(py, &rep)
}

#[pymodule]
fn selinf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTruncationSet>()?;
    m.add_class::<PyTruncatedGaussian>()?;
    m.add_function(wrap_pyfunction!(tg_pivot, m)?)?;
    m.add_function(wrap_pyfunction!(tg_interval, m)?)?;
    m.add_function(wrap_pyfunction!(tg_mle, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(universal_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_delta, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add(
        "METHODS",
        PyList::new(m.py(), Method::ALL.iter().map(|m| m.as_str()))?,
    )?;
    Ok(())
}
