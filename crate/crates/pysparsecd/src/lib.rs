//! Python bindings. Results cross the boundary as plain dicts and lists,
//! built from the serde representation of the Rust types.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sparsecd::data::{self, NormLaw, SyntheticSpec};
use sparsecd::error::Error;
use sparsecd::faceoff::{self, SerialKind};
use sparsecd::harness::{self, ExperimentConfig};

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Extremal C_P, C_D over binary d x n matrices with `alpha` nonzeros, plus the regime flags.
#[pyfunction]
fn bounds(py: Python<'_>, d: u64, n: u64, alpha: u64) -> PyResult<Bound<'_, PyAny>> {
    let r = faceoff::check_regime_theorems(d, n, alpha).map_err(to_py)?;
    to_dict(py, &r)
}

/// Primal vs dual total complexity for a dataset given as LIBSVM text.
#[pyfunction]
#[pyo3(signature = (libsvm, lam=None, gamma=4.0, sampling="importance", normalize=false))]
fn faceoff_report<'py>(
    py: Python<'py>,
    libsvm: &str,
    lam: Option<f64>,
    gamma: f64,
    sampling: &str,
    normalize: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mut ds = data::parse_libsvm_str(libsvm).map_err(to_py)?;
    if normalize {
        ds = data::normalize_by_avg_col_norm(&ds).map_err(to_py)?;
    }
    let kind = match sampling {
        "uniform" => SerialKind::Uniform,
        "importance" => SerialKind::Importance,
        other => return Err(PyValueError::new_err(format!("unknown sampling {other:?}"))),
    };
    let lam = lam.unwrap_or(1.0 / ds.n() as f64);
    let r = faceoff::total_complexities(&ds.x, lam, gamma, kind).map_err(to_py)?;
    to_dict(py, &r)
}

/// Synthetic dataset as LIBSVM text. `param` is `k` for chisq, `big` for
/// extreme and `value` for constant.
#[pyfunction]
#[pyo3(signature = (n, d, sparsity, seed=0, norm_law="uniform", param=None))]
fn generate_synthetic(
    n: usize,
    d: usize,
    sparsity: f64,
    seed: u64,
    norm_law: &str,
    param: Option<f64>,
) -> PyResult<String> {
    let need =
        || param.ok_or_else(|| PyValueError::new_err(format!("norm_law {norm_law:?} needs param")));
    let norm_law = match norm_law {
        "uniform" => NormLaw::Uniform,
        "chisq" => NormLaw::Chisq { k: need()? },
        "extreme" => NormLaw::Extreme { big: need()? },
        "constant" => NormLaw::Constant { value: need()? },
        other => return Err(PyValueError::new_err(format!("unknown norm_law {other:?}"))),
    };
    let ds = data::generate_synthetic(&SyntheticSpec {
        n,
        d,
        sparsity,
        norm_law,
        seed,
    })
    .map_err(to_py)?;
    Ok(data::to_libsvm(&ds))
}

/// Runs one seed of a TOML config in memory and returns the trace.
#[pyfunction]
#[pyo3(signature = (config, seed=0))]
fn solve<'py>(py: Python<'py>, config: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_toml(config).map_err(to_py)?;
    let trace = py
        .detach(|| {
            let problem = harness::build_problem(&cfg.problem)?;
            harness::run_seed(&cfg, &problem, seed)
        })
        .map_err(to_py)?;
    to_dict(py, &trace)
}

/// Runs every seed of a TOML config and writes traces under `out`.
#[pyfunction]
#[pyo3(signature = (config, out=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_toml(config).map_err(to_py)?;
    let root = out.unwrap_or_else(harness::out_root);
    let res = py
        .detach(|| harness::run_experiment(&cfg, &root))
        .map_err(to_py)?;
    to_dict(
        py,
        &serde_json::json!({ "dir": res.dir, "runs": res.summaries }),
    )
}

/// Pass ratios between two globs of trace CSVs at `target` gap.
#[pyfunction]
fn compare<'py>(py: Python<'py>, a: &str, b: &str, target: f64) -> PyResult<Bound<'py, PyAny>> {
    let ra = harness::load_traces(a).map_err(to_py)?;
    let rb = harness::load_traces(b).map_err(to_py)?;
    let rep = harness::compare_runs(&ra, &rb, target).map_err(to_py)?;
    to_dict(py, &rep)
}

#[pymodule]
fn pysparsecd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(faceoff_report, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
