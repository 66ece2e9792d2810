//! Python bindings. Means, specs, grids and simulation configs cross the
//! boundary as JSON strings in the same format the CLI reads.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;

use random_means as rm;
use rm::{EmpiricalSample, GridSpec, MeanExpr, RandomMeanSpec, SimConfig};

fn to_py(e: rm::Error) -> PyErr {
    match e {
        rm::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: DeserializeOwned>(what: &str, json: &str) -> PyResult<T> {
    serde_json::from_str(json).map_err(|e| PyValueError::new_err(format!("invalid {what}: {e}")))
}

fn spec(json: &str) -> PyResult<RandomMeanSpec> {
    RandomMeanSpec::from_json(json).map_err(to_py)
}

fn sample(values: Vec<f64>) -> PyResult<EmpiricalSample> {
    EmpiricalSample::new(values, 0, (0, 0)).map_err(to_py)
}

/// A p-variable mean.
#[pyclass(name = "Mean", module = "random_means_py", frozen)]
struct PyMean {
    inner: MeanExpr,
}

#[pymethods]
impl PyMean {
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(PyMean {
            inner: MeanExpr::from_json(json).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn arithmetic(p: usize) -> Self {
        PyMean {
            inner: MeanExpr::arithmetic(p),
        }
    }

    #[staticmethod]
    fn geometric(p: usize) -> Self {
        PyMean {
            inner: MeanExpr::geometric(p),
        }
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind_name()
    }

    #[getter]
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Values at every node of `grid` (row-major).
    fn tabulate(&self, grid: &str) -> PyResult<Vec<f64>> {
        rm::tabulate(&self.inner, &parse::<GridSpec>("grid", grid)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Mean({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// Grid sup distance between two means.
#[pyfunction]
fn rho(m1: &PyMean, m2: &PyMean, grid: &str) -> PyResult<f64> {
    rm::rho(&m1.inner, &m2.inner, &parse("grid", grid)?).map_err(to_py)
}

/// Largest excess of `m` over `[min x, max x]` on the grid.
#[pyfunction]
fn internality_violation(m: &PyMean, grid: &str) -> PyResult<f64> {
    rm::internality_violation(&m.inner, &parse("grid", grid)?).map_err(to_py)
}

/// `E(M)` in closed form, or `None`.
#[pyfunction]
fn closed_form_expectation(spec_json: &str) -> PyResult<Option<PyMean>> {
    Ok(rm::closed_form_expectation(&spec(spec_json)?)
        .map_err(to_py)?
        .map(|r| PyMean { inner: r.mean }))
}

/// `(mean, error_estimate)` by Gauss–Legendre quadrature on the grid.
#[pyfunction]
#[pyo3(signature = (spec_json, grid, nodes = 64))]
fn quadrature_expectation(
    py: Python<'_>,
    spec_json: &str,
    grid: &str,
    nodes: usize,
) -> PyResult<(PyMean, f64)> {
    let (s, g) = (spec(spec_json)?, parse::<GridSpec>("grid", grid)?);
    let r = py
        .detach(|| rm::quadrature_expectation(&s, &g, nodes))
        .map_err(to_py)?;
    Ok((PyMean { inner: r.mean }, r.error_estimate))
}

/// `(mean, max standard error)` from `n` draws on stream `(seed, 0)`.
#[pyfunction]
fn monte_carlo_expectation(
    py: Python<'_>,
    spec_json: &str,
    n: usize,
    seed: u64,
    grid: &str,
) -> PyResult<(PyMean, f64)> {
    let (s, g) = (spec(spec_json)?, parse::<GridSpec>("grid", grid)?);
    let r = py
        .detach(|| rm::monte_carlo_expectation(&s, n, &mut rm::RngStream::new(seed, 0), &g))
        .map_err(to_py)?;
    Ok((PyMean { inner: r.mean }, r.error_estimate))
}

/// `R` draws of `sqrt(n) kappa_n`.
#[pyfunction]
fn clt_sample(py: Python<'_>, spec_json: &str, sim: &str) -> PyResult<Vec<f64>> {
    let (s, c) = (spec(spec_json)?, parse::<SimConfig>("sim config", sim)?);
    let out = py.detach(|| rm::clt_sample(&s, &c)).map_err(to_py)?;
    Ok(out.values().to_vec())
}

/// `R` draws from the theoretical limit law.
#[pyfunction]
fn limit_law_sample(py: Python<'_>, spec_json: &str, sim: &str) -> PyResult<Vec<f64>> {
    let (s, c) = (spec(spec_json)?, parse::<SimConfig>("sim config", sim)?);
    let out = py.detach(|| rm::limit_law_sample(&s, &c)).map_err(to_py)?;
    Ok(out.values().to_vec())
}

/// `(empirical, theoretical)` samples for the weighted power family.
#[pyfunction]
fn power_limit_sample(py: Python<'_>, spec_json: &str, sim: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (s, c) = (spec(spec_json)?, parse::<SimConfig>("sim config", sim)?);
    let out = py.detach(|| rm::power_limit_sample(&s, &c)).map_err(to_py)?;
    Ok((out.empirical.values().to_vec(), out.theoretical.values().to_vec()))
}

/// `(schedule, values)` with `values[r][i]` the statistic of replicate `r`.
#[pyfunction]
fn slln_trajectory(
    py: Python<'_>,
    spec_json: &str,
    sim: &str,
) -> PyResult<(Vec<usize>, Vec<Vec<f64>>)> {
    let (s, c) = (spec(spec_json)?, parse::<SimConfig>("sim config", sim)?);
    let t = py.detach(|| rm::slln_trajectory(&s, &c)).map_err(to_py)?;
    Ok((t.schedule, t.values))
}

/// One-sample KS distance against the half-normal law with scale `sigma`.
#[pyfunction]
fn ks_half_normal(values: Vec<f64>, sigma: f64) -> PyResult<f64> {
    Ok(rm::ks_against_cdf(&sample(values)?, |x| {
        rm::half_normal_cdf(sigma, x)
    }))
}

/// Two-sample KS distance.
#[pyfunction]
fn ks_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    Ok(rm::ks_distance(&sample(a)?, &sample(b)?))
}

#[pymodule]
pub fn random_means_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMean>()?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(internality_violation, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(quadrature_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(clt_sample, m)?)?;
    m.add_function(wrap_pyfunction!(limit_law_sample, m)?)?;
    m.add_function(wrap_pyfunction!(power_limit_sample, m)?)?;
    m.add_function(wrap_pyfunction!(slln_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(ks_half_normal, m)?)?;
    m.add_function(wrap_pyfunction!(ks_distance, m)?)?;
    Ok(())
}
