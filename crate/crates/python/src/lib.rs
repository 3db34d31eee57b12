//! Python bindings: datasets, the joint fit, AUC/ROC with Wald intervals,
//! goodness-of-fit tests and simulation.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use niroc::gof::{gof_disease, gof_verification};
use niroc::inference::PluginContext;
use niroc::likelihood::{fit_mle, FitOptions, FitResult};
use niroc::simulation::{run_campaign, simulate_dataset, CampaignConfig, Scenario};

fn to_py(e: niroc::Error) -> PyErr {
    match e {
        niroc::Error::Dimension { .. }
        | niroc::Error::InvalidRecord { .. }
        | niroc::Error::InvalidDataset(_)
        | niroc::Error::InvalidArgument(_)
        | niroc::Error::DegenerateGroup(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Biomarker, covariates, verification flags and (verified-only) disease status.
#[pyclass(name = "Dataset", frozen)]
pub struct PyDataset {
    inner: niroc::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(x: Vec<f64>, v: Vec<Vec<f64>>, r: Vec<bool>, y: Vec<Option<bool>>) -> PyResult<Self> {
        let p = v.first().map_or(0, Vec::len);
        let flat: Vec<f64> = v.into_iter().flatten().collect();
        let inner = niroc::Dataset::from_columns(p, x, flat, r, y).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn n_verified(&self) -> usize {
        self.inner.n1()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, p={}, verified={})",
            self.inner.n(),
            self.inner.p(),
            self.inner.n1()
        )
    }
}

/// Result of the joint maximum likelihood fit.
#[pyclass(name = "Fit", frozen)]
pub struct PyFit {
    inner: FitResult,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn eta(&self) -> Vec<f64> {
        self.inner.eta_hat.as_slice().to_vec()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.eta_hat.beta()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn loglik(&self) -> f64 {
        self.inner.loglik
    }

    fn standard_errors(&self) -> PyResult<Vec<f64>> {
        self.inner.standard_errors().map_err(to_py)
    }

    fn names(&self) -> Vec<String> {
        self.inner.eta_hat.names(&[])
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(converged={}, iterations={}, beta={:.4})",
            self.inner.converged,
            self.inner.iterations,
            self.inner.eta_hat.beta()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (data, tol = 1e-8, max_iter = 500))]
fn fit(data: &PyDataset, tol: f64, max_iter: usize) -> PyResult<PyFit> {
    let inner = fit_mle(&data.inner, None, &FitOptions { tol, max_iter }).map_err(to_py)?;
    Ok(PyFit { inner })
}

/// `(estimate, se, lo, hi)` for the AUC.
#[pyfunction]
#[pyo3(signature = (data, fit, alpha = 0.05))]
fn auc(data: &PyDataset, fit: &PyFit, alpha: f64) -> PyResult<(f64, f64, f64, f64)> {
    let ctx = PluginContext::new(&data.inner, &fit.inner).map_err(to_py)?;
    let e = ctx.auc(alpha).map_err(to_py)?;
    Ok((e.point, e.se, e.ci.0, e.ci.1))
}

/// `(estimate, se, lo, hi)` for ROC(s).
#[pyfunction]
#[pyo3(signature = (data, fit, s, alpha = 0.05))]
fn roc(data: &PyDataset, fit: &PyFit, s: f64, alpha: f64) -> PyResult<(f64, f64, f64, f64)> {
    let ctx = PluginContext::new(&data.inner, &fit.inner).map_err(to_py)?;
    let e = ctx.roc(s, alpha).map_err(to_py)?;
    Ok((e.point, e.se, e.ci.0, e.ci.1))
}

/// `((T1, p1), (T2, p2))`: disease-model and verification-model tests.
#[pyfunction]
#[pyo3(signature = (data, fit, replicates = 200, seed = 1))]
fn gof(
    data: &PyDataset,
    fit: &PyFit,
    replicates: usize,
    seed: u64,
) -> PyResult<((f64, f64), (f64, f64))> {
    let d = gof_disease(&data.inner, replicates, seed).map_err(to_py)?;
    let v = gof_verification(&data.inner, &fit.inner, replicates, seed, &FitOptions::default())
        .map_err(to_py)?;
    Ok(((d.statistic, d.p_value), (v.statistic, v.p_value)))
}

/// Simulated dataset from scenario `1`, `2`, `3` or a JSON file, plus the
/// true status of every record.
#[pyfunction]
fn simulate(scenario: &str, n: usize, seed: u64) -> PyResult<(PyDataset, Vec<bool>)> {
    let sc = Scenario::resolve(scenario).map_err(to_py)?;
    let s = simulate_dataset(&sc, n, seed);
    Ok((PyDataset { inner: s.data }, s.oracle_y))
}

/// Monte Carlo campaign; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (scenario, n, replicates, seed = 1, truth_n = 2_000_000))]
fn campaign(
    py: Python<'_>,
    scenario: &str,
    n: usize,
    replicates: usize,
    seed: u64,
    truth_n: usize,
) -> PyResult<String> {
    let sc = Scenario::resolve(scenario).map_err(to_py)?;
    let mut cfg = CampaignConfig::new(sc, n, replicates, seed);
    cfg.truth_n = truth_n;
    let report = py.detach(|| run_campaign(&cfg)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
fn expit_neg(t: f64) -> f64 {
    niroc::model::expit_neg(t)
}

#[pymodule(name = "niroc")]
fn niroc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(roc, m)?)?;
    m.add_function(wrap_pyfunction!(gof, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(campaign, m)?)?;
    m.add_function(wrap_pyfunction!(expit_neg, m)?)?;
    Ok(())
}
