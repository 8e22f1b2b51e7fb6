//! Python bindings. Matrices cross the boundary as lists of rows; structured
//! results (bounds, traces, audits) come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use rsvd::adaptive::{adaptive_rsi as core_adaptive, AdaptiveConfig};
use rsvd::bounds::{self, SpectrumView};
use rsvd::densela::{self, io, Matrix, RngSeed};
use rsvd::normest;
use rsvd::sketch::{self, SketchConfig};
use rsvd::testmat::{self, DecaySpec};
use rsvd::validate;

fn err(e: rsvd::Error) -> PyErr {
    match e {
        rsvd::Error::InvalidArgument(_) | rsvd::Error::DimensionMismatch(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

fn json_to_py(py: Python<'_>, v: &Value) -> PyResult<PyObject> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py_any(py)?,
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_py_any(py)?,
            (None, Some(f)) => f.into_py_any(py)?,
            _ => py.None(),
        },
        Value::String(s) => s.into_py_any(py)?,
        Value::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_py_any(py)?
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_py_any(py)?
        }
    })
}

fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<PyObject> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

/// Rank-`k` approximation `U diag(sigma) Vᵀ` with `U = Q·core_u`.
#[pyclass(module = "rsvd_lab")]
pub struct LowRank {
    inner: sketch::LowRankApprox,
}

#[pymethods]
impl LowRank {
    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.inner.sigma_hat.clone()
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        self.inner.left_vectors().to_rows()
    }

    #[getter]
    fn v(&self) -> Vec<Vec<f64>> {
        self.inner.v_hat.to_rows()
    }

    #[getter]
    fn matvec_count(&self) -> usize {
        self.inner.matvec_count
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn reconstruct(&self) -> Vec<Vec<f64>> {
        self.inner.reconstruct().to_rows()
    }

    fn __repr__(&self) -> String {
        format!("LowRank(k={}, matvecs={})", self.inner.k(), self.inner.matvec_count)
    }
}

#[pyfunction]
fn exact_svd(a: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    let f = densela::exact_svd(&to_matrix(a)?).map_err(err)?;
    Ok((f.u.to_rows(), f.sigma, f.v.to_rows()))
}

#[pyfunction]
fn singular_values(a: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    densela::singular_values(&to_matrix(a)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, k, ell, q=1, seed=0, p=None, delta=0.05))]
fn randomized_subspace_iteration(
    a: Vec<Vec<f64>>,
    k: usize,
    ell: usize,
    q: usize,
    seed: u64,
    p: Option<usize>,
    delta: f64,
) -> PyResult<LowRank> {
    let mut cfg = SketchConfig::new(k, ell, q, seed).with_delta(delta);
    if let Some(p) = p {
        cfg = cfg.with_p(p);
    }
    let inner = sketch::randomized_subspace_iteration(&to_matrix(a)?, &cfg).map_err(err)?;
    Ok(LowRank { inner })
}

#[pyfunction]
#[pyo3(signature = (a, k, ell, seed=0))]
fn basic_randomized(a: Vec<Vec<f64>>, k: usize, ell: usize, seed: u64) -> PyResult<LowRank> {
    let inner = sketch::basic_randomized(&to_matrix(a)?, k, ell, RngSeed(seed)).map_err(err)?;
    Ok(LowRank { inner })
}

#[pyfunction]
#[pyo3(signature = (a, k, ell1, ell2, q, seed=0))]
fn improved_small_k(a: Vec<Vec<f64>>, k: usize, ell1: usize, ell2: usize, q: usize, seed: u64) -> PyResult<LowRank> {
    let inner = sketch::improved_small_k(&to_matrix(a)?, k, ell1, ell2, q, RngSeed(seed)).map_err(err)?;
    Ok(LowRank { inner })
}

/// Returns `(approximation, trace)`.
#[pyfunction]
#[pyo3(signature = (a, k, q, tau, cmax, seed=0))]
fn adaptive_rsi(py: Python<'_>, a: Vec<Vec<f64>>, k: usize, q: usize, tau: f64, cmax: usize, seed: u64) -> PyResult<(LowRank, PyObject)> {
    let res = core_adaptive(&to_matrix(a)?, &AdaptiveConfig::new(k, q, tau, cmax, seed)).map_err(err)?;
    Ok((LowRank { inner: res.approx }, to_py(py, &res.trace)?))
}

/// Returns `(estimate, matvec_count)`.
#[pyfunction]
#[pyo3(signature = (a, q, seed=0))]
fn randomized_power_method(a: Vec<Vec<f64>>, q: usize, seed: u64) -> PyResult<(f64, usize)> {
    let e = sketch::randomized_power_method(&to_matrix(a)?, q, RngSeed(seed)).map_err(err)?;
    Ok((e.norm_estimate, e.matvec_count))
}

#[pyfunction]
#[pyo3(signature = (a, x0=None, max_iter=5))]
fn hager_one_norm(a: Vec<Vec<f64>>, x0: Option<Vec<f64>>, max_iter: usize) -> PyResult<f64> {
    let a = to_matrix(a)?;
    let n = a.cols();
    let x0 = x0.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    Ok(normest::hager_one_norm(&a, &x0, max_iter).map_err(err)?.value)
}

#[pyfunction]
#[pyo3(signature = (a, ell=5, seed=0, hager_iters=5))]
fn randomized_hager(a: Vec<Vec<f64>>, ell: usize, seed: u64, hager_iters: usize) -> PyResult<f64> {
    Ok(normest::randomized_hager(&to_matrix(a)?, ell, RngSeed(seed), hager_iters).map_err(err)?.value)
}

#[pyfunction]
fn oversampling_p(delta: f64) -> PyResult<usize> {
    bounds::oversampling_p(delta).map_err(err)
}

#[pyfunction]
fn deviation_bounds(py: Python<'_>, sigma: Vec<f64>, k: usize, ell: usize, p: usize, q: usize, delta: f64) -> PyResult<PyObject> {
    let spec = SpectrumView::square(sigma).map_err(err)?;
    to_py(py, &bounds::deviation_bounds(&spec, k, ell, p, q, delta).map_err(err)?)
}

#[pyfunction]
fn average_bounds(py: Python<'_>, sigma: Vec<f64>, k: usize, ell: usize, p: usize, q: usize) -> PyResult<PyObject> {
    let spec = SpectrumView::square(sigma).map_err(err)?;
    to_py(py, &bounds::average_bounds(&spec, k, ell, p, q).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (k, p, t_model=1.0))]
fn optimal_ell(py: Python<'_>, k: usize, p: usize, t_model: f64) -> PyResult<PyObject> {
    to_py(py, &bounds::optimal_ell(k, p, t_model).map_err(err)?)
}

/// Sketches `a` with subspace iteration and checks every bound against its
/// exact spectrum. Returns the audit as a dict.
#[pyfunction]
#[pyo3(signature = (a, k, ell, q=1, seed=0, delta=0.05))]
fn audit(py: Python<'_>, a: Vec<Vec<f64>>, k: usize, ell: usize, q: usize, seed: u64, delta: f64) -> PyResult<PyObject> {
    let a = to_matrix(a)?;
    let oracle = densela::exact_svd(&a).map_err(err)?;
    let cfg = SketchConfig::new(k, ell, q, seed).with_delta(delta);
    let ap = sketch::randomized_subspace_iteration_diagnosed(&a, &cfg, &oracle.v)
        .or_else(|_| sketch::randomized_subspace_iteration(&a, &cfg))
        .map_err(err)?;
    let spec = SpectrumView::new(oracle.sigma, a.rows(), a.cols()).map_err(err)?;
    to_py(py, &validate::bound_audit(&a, &ap, &cfg, &spec).map_err(err)?)
}

/// Returns `(matrix, true_sigma)`.
#[pyfunction]
#[pyo3(signature = (n, kind, param, seed=0))]
fn decay_matrix(n: usize, kind: &str, param: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let spec = match kind {
        "exponential" => DecaySpec::exponential(n, param),
        "power_law" => DecaySpec::power_law(n, param),
        _ => return Err(PyValueError::new_err("kind must be 'exponential' or 'power_law'")),
    };
    let d = testmat::decay_matrix(&spec, RngSeed(seed)).map_err(err)?;
    Ok((d.matrix.to_rows(), d.true_sigma))
}

#[pyfunction]
#[pyo3(signature = (n, mu, seed=0))]
fn log_kernel_gaussian(n: usize, mu: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(testmat::log_kernel_gaussian(n, mu, RngSeed(seed)).map_err(err)?.to_rows())
}

#[pyfunction]
fn log_kernel_discs(n: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(testmat::log_kernel_discs(n).map_err(err)?.to_rows())
}

#[pyfunction]
#[pyo3(signature = (n, rho, seed=0))]
fn adversarial_hager(n: usize, rho: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(testmat::adversarial_hager(n, rho, RngSeed(seed)).map_err(err)?.to_rows())
}

#[pyfunction]
fn identical_leading(n: usize, k: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(testmat::identical_leading(n, k).map_err(err)?.to_rows())
}

#[pyfunction]
fn load_matrix(path: &str) -> PyResult<Vec<Vec<f64>>> {
    Ok(io::load(path).map_err(err)?.to_rows())
}

#[pyfunction]
fn save_matrix(a: Vec<Vec<f64>>, path: &str) -> PyResult<()> {
    io::save(&to_matrix(a)?, path).map_err(err)
}

#[pymodule]
fn rsvd_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LowRank>()?;
    m.add_function(wrap_pyfunction!(exact_svd, m)?)?;
    m.add_function(wrap_pyfunction!(singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(randomized_subspace_iteration, m)?)?;
    m.add_function(wrap_pyfunction!(basic_randomized, m)?)?;
    m.add_function(wrap_pyfunction!(improved_small_k, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_rsi, m)?)?;
    m.add_function(wrap_pyfunction!(randomized_power_method, m)?)?;
    m.add_function(wrap_pyfunction!(hager_one_norm, m)?)?;
    m.add_function(wrap_pyfunction!(randomized_hager, m)?)?;
    m.add_function(wrap_pyfunction!(oversampling_p, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(average_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_ell, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(decay_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(log_kernel_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(log_kernel_discs, m)?)?;
    m.add_function(wrap_pyfunction!(adversarial_hager, m)?)?;
    m.add_function(wrap_pyfunction!(identical_leading, m)?)?;
    m.add_function(wrap_pyfunction!(load_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(save_matrix, m)?)?;
    Ok(())
}
