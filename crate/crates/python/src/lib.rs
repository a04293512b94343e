//! Python bindings for `logrank`.
//!
//! Matrices cross the boundary as 2-D `float64` NumPy arrays. Heavy calls
//! release the GIL.

use logrank::lvm::specfile::{parse_spec, piecewise_spec_to_text, read_spec, spec_to_text, KeyValues, SpecDocument};
use logrank::scan::{scan_to_csv, scan_to_svg};
use logrank::{
    compress_lvm, generate_matrix, generate_piecewise_matrix, jl_target_dim as core_jl_target_dim,
    rank_eps_upper_bound, run_scan, sample_latents, svd as core_svd, taylor_factorize as core_taylor,
    taylor_factorize_piecewise, theorem0_compress as core_theorem0, theorem3_compress, CompressOptions,
    CompressedApprox, DenseMatrix, Error, LvmSpec, ScanConfig,
};
use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray2};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(logrank_py, NumericalError, PyRuntimeError, "Numerical or probabilistic failure.");
create_exception!(logrank_py, CapacityError, PyRuntimeError, "Problem size or capability limit exceeded.");

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Io { .. } => PyOSError::new_err(msg),
        Error::Numerical(_) | Error::ProbabilisticFailure { .. } | Error::InternalConsistency(_) => {
            NumericalError::new_err(msg)
        }
        Error::Capability(_) | Error::Capacity(_) => CapacityError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn from_numpy(x: &PyReadonlyArray2<'_, f64>) -> PyResult<DenseMatrix> {
    let view = x.as_array();
    let (m, n) = view.dim();
    let data: Vec<f64> = view.iter().copied().collect();
    DenseMatrix::from_vec(m, n, data).map_err(to_py)
}

fn to_numpy<'py>(py: Python<'py>, x: DenseMatrix) -> Bound<'py, PyArray2<f64>> {
    let (m, n) = x.shape();
    Array2::from_shape_vec((m, n), x.into_vec())
        .expect("row-major buffer matches its shape")
        .into_pyarray(py)
}

/// A plain or piecewise latent variable model.
#[pyclass(name = "Spec", module = "logrank_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpec {
    doc: SpecDocument,
}

#[pymethods]
impl PySpec {
    /// `exp(-|a - b|^2)` on the radius-`radius` ball in `n` dimensions.
    #[staticmethod]
    #[pyo3(signature = (n, radius = 1.0))]
    fn rbf(n: usize, radius: f64) -> PyResult<Self> {
        Ok(Self { doc: SpecDocument::Plain(LvmSpec::rbf(n, radius).map_err(to_py)?) })
    }

    #[staticmethod]
    #[pyo3(signature = (n, radius = 1.0))]
    fn inner_product(n: usize, radius: f64) -> PyResult<Self> {
        Ok(Self { doc: SpecDocument::Plain(LvmSpec::inner_product(n, radius).map_err(to_py)?) })
    }

    /// `f(a, b) = b^degree` with scalar latents.
    #[staticmethod]
    #[pyo3(signature = (degree, radius = 1.0))]
    fn monomial(degree: u32, radius: f64) -> PyResult<Self> {
        Ok(Self { doc: SpecDocument::Plain(LvmSpec::monomial(degree, radius).map_err(to_py)?) })
    }

    /// Parses the `key = value` spec format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { doc: parse_spec(text, "<string>").map_err(to_py)?.document })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self { doc: read_spec(path).map_err(to_py)?.document })
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.doc.latent_dim()
    }

    #[getter]
    fn sup_norm(&self) -> f64 {
        self.doc.sup_norm()
    }

    #[getter]
    fn is_piecewise(&self) -> bool {
        matches!(self.doc, SpecDocument::Piecewise(_))
    }

    fn to_text(&self) -> String {
        match &self.doc {
            SpecDocument::Plain(s) => spec_to_text(s),
            SpecDocument::Piecewise(s) => piecewise_spec_to_text(s),
        }
    }

    /// Samples latents with `seed` and returns the `m x n` matrix.
    #[pyo3(signature = (m, n, seed = 0))]
    fn generate<'py>(&self, py: Python<'py>, m: usize, n: usize, seed: u64) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let doc = self.doc.clone();
        let x = py
            .detach(move || match &doc {
                SpecDocument::Plain(s) => generate_matrix(s, &sample_latents(s, m, n, seed)?),
                SpecDocument::Piecewise(s) => generate_piecewise_matrix(s, &s.sample_latents(m, n, seed)?),
            })
            .map_err(to_py)?;
        Ok(to_numpy(py, x))
    }

    fn __repr__(&self) -> String {
        format!("Spec({:?})", self.to_text().trim_end().replace('\n', "; "))
    }
}

fn approx_info<'py>(py: Python<'py>, a: &CompressedApprox) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", a.method)?;
    d.set_item("rank", a.rank_budget)?;
    d.set_item("theoretical_rank", a.theoretical_rank)?;
    d.set_item("ln_theoretical_rank", a.theoretical_rank_ln)?;
    d.set_item("epsilon", a.epsilon)?;
    d.set_item("eps_jl", a.eps_jl())?;
    d.set_item("reference_norm", a.reference_norm)?;
    d.set_item("target_error", a.target_error)?;
    d.set_item("achieved_max_error", a.achieved_max_error)?;
    d.set_item("jl_max_error", a.jl_max_error)?;
    d.set_item("projection", a.projection.name())?;
    d.set_item("seed", a.seed)?;
    d.set_item("accepted_seed", a.accepted_seed)?;
    d.set_item("retries_used", a.retries_used)?;
    d.set_item("nontrivial", a.nontrivial)?;
    Ok(d)
}

type Factors<'py> = (Bound<'py, PyArray2<f64>>, Bound<'py, PyArray2<f64>>, Bound<'py, PyDict>);

/// Smallest `r` with `max|X - [X]_r| <= epsilon` and the curve `mu_0..mu_r`.
#[pyfunction]
fn rank_bound<'py>(py: Python<'py>, x: PyReadonlyArray2<'py, f64>, epsilon: f64) -> PyResult<(usize, Bound<'py, PyArray1<f64>>)> {
    let x = from_numpy(&x)?;
    let res = py.detach(move || rank_eps_upper_bound(&x, epsilon)).map_err(to_py)?;
    Ok((res.rank_upper_bound, PyArray1::from_vec(py, res.mu_curve)))
}

/// Thin SVD `(U, s, Vt)`.
#[pyfunction]
fn svd<'py>(
    py: Python<'py>,
    x: PyReadonlyArray2<'py, f64>,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Bound<'py, PyArray1<f64>>, Bound<'py, PyArray2<f64>>)> {
    let x = from_numpy(&x)?;
    let s = py.detach(move || core_svd(&x)).map_err(to_py)?;
    Ok((to_numpy(py, s.u), PyArray1::from_vec(py, s.singular_values), to_numpy(py, s.vt)))
}

/// Taylor factors `(U, V)` with `max|X - UV| <= epsilon * sup_norm`.
#[pyfunction]
#[pyo3(signature = (spec, m, n, epsilon, seed = 0))]
fn taylor_factorize<'py>(py: Python<'py>, spec: &PySpec, m: usize, n: usize, epsilon: f64, seed: u64) -> PyResult<Factors<'py>> {
    let doc = spec.doc.clone();
    let d = PyDict::new(py);
    match doc {
        SpecDocument::Plain(s) => {
            let f = py
                .detach(move || core_taylor(&s, &sample_latents(&s, m, n, seed)?, epsilon))
                .map_err(to_py)?;
            d.set_item("k", f.k)?;
            d.set_item("n_tilde", f.n_tilde)?;
            d.set_item("achieved_error", f.achieved_error)?;
            d.set_item("error_bound", f.error_bound)?;
            d.set_item("ln_c_u", f.c_u.ln)?;
            d.set_item("ln_c_v", f.c_v.ln)?;
            Ok((to_numpy(py, f.u_matrix), to_numpy(py, f.v_matrix), d))
        }
        SpecDocument::Piecewise(s) => {
            let f = py
                .detach(move || taylor_factorize_piecewise(&s, &s.sample_latents(m, n, seed)?, epsilon))
                .map_err(to_py)?;
            d.set_item("n_tilde", f.n_tilde())?;
            d.set_item("pieces", f.pieces.len())?;
            d.set_item("achieved_error", f.achieved_error)?;
            d.set_item("error_bound", f.error_bound)?;
            d.set_item("ln_c_u", f.c_u.ln)?;
            d.set_item("ln_c_v", f.c_v.ln)?;
            Ok((to_numpy(py, f.u_matrix), to_numpy(py, f.v_matrix), d))
        }
    }
}

/// Taylor factorization at `epsilon/2` followed by a shared random projection;
/// returns `(left, right, info)` with `max|X - left @ right| <= epsilon * sup_norm`.
#[pyfunction]
#[pyo3(signature = (spec, m, n, epsilon, seed = 0, max_retries = 20, rank = None))]
#[allow(clippy::too_many_arguments)]
fn compress<'py>(
    py: Python<'py>,
    spec: &PySpec,
    m: usize,
    n: usize,
    epsilon: f64,
    seed: u64,
    max_retries: usize,
    rank: Option<usize>,
) -> PyResult<Factors<'py>> {
    let doc = spec.doc.clone();
    let opts = CompressOptions { max_retries, rank_override: rank };
    let a = py
        .detach(move || match &doc {
            SpecDocument::Plain(s) => compress_lvm(s, &sample_latents(s, m, n, seed)?, epsilon, seed, &opts).map(|r| r.1),
            SpecDocument::Piecewise(s) => {
                let sample = s.sample_latents(m, n, seed)?;
                let pf = taylor_factorize_piecewise(s, &sample, epsilon / 2.0)?;
                let x = generate_piecewise_matrix(s, &sample)?;
                theorem3_compress(&pf, &x, epsilon, seed, &opts)
            }
        })
        .map_err(to_py)?;
    let info = approx_info(py, &a)?;
    Ok((to_numpy(py, a.left), to_numpy(py, a.right), info))
}

/// Projected SVD factors with `max|X - left @ right| <= epsilon * ||X||_2`.
#[pyfunction]
#[pyo3(signature = (x, epsilon, seed = 0, max_retries = 20, rank = None))]
fn theorem0_compress<'py>(
    py: Python<'py>,
    x: PyReadonlyArray2<'py, f64>,
    epsilon: f64,
    seed: u64,
    max_retries: usize,
    rank: Option<usize>,
) -> PyResult<Factors<'py>> {
    let x = from_numpy(&x)?;
    let opts = CompressOptions { max_retries, rank_override: rank };
    let a = py.detach(move || core_theorem0(&x, epsilon, seed, &opts)).map_err(to_py)?;
    let info = approx_info(py, &a)?;
    Ok((to_numpy(py, a.left), to_numpy(py, a.right), info))
}

/// `ceil(8 ln(n_points + 1) / eps_jl^2)`.
#[pyfunction]
fn jl_target_dim(n_points: usize, eps_jl: f64) -> PyResult<usize> {
    core_jl_target_dim(n_points, eps_jl).map_err(to_py)
}

/// Runs a scan from config text; returns `(csv, svg)`.
#[pyfunction]
fn scan(py: Python<'_>, config: &str) -> PyResult<(String, String)> {
    let kv = KeyValues::parse(config, "<string>").map_err(to_py)?;
    let cfg = ScanConfig::from_key_values(&kv).map_err(to_py)?;
    let records = py.detach(move || run_scan(&cfg)).map_err(to_py)?;
    Ok((scan_to_csv(&records), scan_to_svg(&records)))
}

#[pymodule]
fn logrank_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_function(wrap_pyfunction!(rank_bound, m)?)?;
    m.add_function(wrap_pyfunction!(svd, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_factorize, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(theorem0_compress, m)?)?;
    m.add_function(wrap_pyfunction!(jl_target_dim, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("CapacityError", m.py().get_type::<CapacityError>())?;
    Ok(())
}
