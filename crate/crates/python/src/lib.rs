//! Python bindings: the trend estimators, DTW, clustering, distance correlation
//! and the pipeline entry points.

// #[pyfunction] expansion trips this lint on every PyResult return
#![allow(clippy::useless_conversion)]

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyException, PyValueError};
use pyo3::prelude::*;

use stationtrend::cluster::{self, DistanceMatrix};
use stationtrend::dependence;
use stationtrend::dtw::{self, DtwConfig, StepWeights};
use stationtrend::ingest::{impute_seasonal, RegularSeries, Resolution};
use stationtrend::pipeline::{self, ConfigOverrides, PipelineConfig, SyntheticSpec};
use stationtrend::trend;
use stationtrend::Error;

create_exception!(stationtrend_py, StationTrendError, PyException);
create_exception!(stationtrend_py, ConfigError, PyValueError);
create_exception!(stationtrend_py, ConvergenceError, PyArithmeticError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.exit_code() {
        2 => ConfigError::new_err(msg),
        4 => ConvergenceError::new_err(msg),
        _ => StationTrendError::new_err(msg),
    }
}

#[pyclass(name = "TrendFit", get_all, frozen)]
#[derive(Clone)]
struct PyTrendFit {
    method: String,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    p_value: f64,
    significant: bool,
}

#[pymethods]
impl PyTrendFit {
    fn __repr__(&self) -> String {
        format!(
            "TrendFit(method={:?}, slope={:.6}, r_squared={:.4}, p_value={:.4})",
            self.method, self.slope, self.r_squared, self.p_value
        )
    }
}

impl From<trend::TrendFit> for PyTrendFit {
    fn from(f: trend::TrendFit) -> Self {
        Self {
            method: format!("{:?}", f.method),
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
            p_value: f.p_value,
            significant: f.significant_5pct,
        }
    }
}

#[pyclass(name = "MannKendall", get_all, frozen)]
struct PyMannKendall {
    s: i64,
    variance: f64,
    z: f64,
    p_value: f64,
    n: usize,
}

#[pymethods]
impl PyMannKendall {
    fn __repr__(&self) -> String {
        format!("MannKendall(s={}, z={:.4}, p_value={:.4})", self.s, self.z, self.p_value)
    }
}

#[pyclass(name = "Dcor", get_all, frozen)]
struct PyDcor {
    dcor: f64,
    dcov_sq: f64,
    dvar_x_sq: f64,
    dvar_y_sq: f64,
    p_value: Option<f64>,
    degenerate: bool,
}

#[pymethods]
impl PyDcor {
    fn __repr__(&self) -> String {
        format!("Dcor(dcor={:.6}, p_value={:?})", self.dcor, self.p_value)
    }
}

#[pyclass(name = "ClusterSolution", get_all, frozen)]
struct PyClusterSolution {
    labels: Vec<String>,
    k: usize,
    /// 1-based cluster of each label.
    assignment: Vec<usize>,
    silhouette: Vec<f64>,
    mean_silhouette: f64,
}

#[pymethods]
impl PyClusterSolution {
    fn __repr__(&self) -> String {
        format!("ClusterSolution(k={}, mean_silhouette={:.3})", self.k, self.mean_silhouette)
    }
}

#[pyfunction]
fn ols_trend(values: Vec<f64>) -> PyResult<PyTrendFit> {
    trend::ols_trend(&values).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn sens_slope(values: Vec<f64>) -> PyResult<PyTrendFit> {
    trend::sens_slope(&values).map(Into::into).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (values, seed = 0))]
fn s_estimator_trend(values: Vec<f64>, seed: u64) -> PyResult<PyTrendFit> {
    let cfg = trend::SEstimatorConfig {
        seed,
        ..Default::default()
    };
    trend::s_estimator_trend(&values, &cfg).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn mann_kendall(values: Vec<f64>) -> PyResult<PyMannKendall> {
    let r = trend::mann_kendall(&values).map_err(to_py)?;
    Ok(PyMannKendall {
        s: r.s_statistic,
        variance: r.variance,
        z: r.z_score,
        p_value: r.p_value,
        n: r.n,
    })
}

/// Returns `(W, p)`.
#[pyfunction]
fn shapiro_wilk(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = trend::shapiro_wilk(&values).map_err(to_py)?;
    Ok((r.w, r.p_value))
}

/// Returns `(r1, significant)`.
#[pyfunction]
fn lag1(values: Vec<f64>) -> PyResult<(f64, bool)> {
    let r = trend::lag1_check(&values).map_err(to_py)?;
    Ok((r.r1, r.significant))
}

fn dtw_config(local_dist: &str, weights: (f64, f64, f64), lam: f64) -> PyResult<DtwConfig> {
    let cfg = DtwConfig {
        local_distance: local_dist.parse().map_err(to_py)?,
        weights: StepWeights {
            horizontal: weights.0,
            vertical: weights.1,
            diagonal: weights.2,
        },
        lambda: lam,
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

#[pyfunction]
#[pyo3(signature = (x, y, local_dist = "manhattan", weights = (1.0, 1.0, 2.0), lam = 0.01))]
fn dtw_distance(x: Vec<f64>, y: Vec<f64>, local_dist: &str, weights: (f64, f64, f64), lam: f64) -> PyResult<f64> {
    dtw::dtw_distance(&x, &y, &dtw_config(local_dist, weights, lam)?).map_err(to_py)
}

/// Pairwise DTW distances as a nested list.
#[pyfunction]
#[pyo3(signature = (sequences, local_dist = "manhattan", weights = (1.0, 1.0, 2.0), lam = 0.01))]
fn dtw_matrix(
    sequences: Vec<Vec<f64>>,
    local_dist: &str,
    weights: (f64, f64, f64),
    lam: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let labels: Vec<String> = (0..sequences.len()).map(|i| i.to_string()).collect();
    let d = dtw::distance_matrix(&labels, &sequences, &dtw_config(local_dist, weights, lam)?).map_err(to_py)?;
    Ok(d.rows().to_vec())
}

fn matrix(values: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> PyResult<DistanceMatrix> {
    let labels = labels.unwrap_or_else(|| (0..values.len()).map(|i| i.to_string()).collect());
    DistanceMatrix::new(labels, values).map_err(to_py)
}

/// Complete-linkage clustering of a precomputed distance matrix.
#[pyfunction]
#[pyo3(signature = (distances, k, labels = None))]
fn hcluster(distances: Vec<Vec<f64>>, k: usize, labels: Option<Vec<String>>) -> PyResult<PyClusterSolution> {
    let d = matrix(distances, labels)?;
    let s = cluster::hcluster(&d, k).map_err(to_py)?;
    Ok(PyClusterSolution {
        labels: s.labels,
        k: s.k,
        assignment: s.assignment.iter().map(|c| c + 1).collect(),
        silhouette: s.silhouette,
        mean_silhouette: s.mean_silhouette,
    })
}

/// Mean silhouette per k as `[(k, score, best), ...]`.
#[pyfunction]
#[pyo3(signature = (distances, k_min = 2, k_max = 6))]
fn select_k(distances: Vec<Vec<f64>>, k_min: usize, k_max: usize) -> PyResult<Vec<(usize, f64, bool)>> {
    let d = matrix(distances, None)?;
    let scores = cluster::select_k(&d, k_min..=k_max).map_err(to_py)?;
    Ok(scores.into_iter().map(|s| (s.k, s.mean_silhouette, s.best)).collect())
}

/// Distance correlation of two equal-length samples; `permutations > 0` adds a p-value.
#[pyfunction]
#[pyo3(signature = (x, y, permutations = 0, seed = 0))]
fn dcor(x: Vec<f64>, y: Vec<f64>, permutations: usize, seed: u64) -> PyResult<PyDcor> {
    let r = if permutations == 0 {
        dependence::dcor_1d(&x, &y)
    } else {
        dependence::dcor_test_1d(&x, &y, permutations, seed)
    }
    .map_err(to_py)?;
    Ok(PyDcor {
        dcor: r.dcor,
        dcov_sq: r.dcov_sq,
        dvar_x_sq: r.dvar_x_sq,
        dvar_y_sq: r.dvar_y_sq,
        p_value: r.p_value,
        degenerate: r.degenerate,
    })
}

/// Fill gaps (`None`) in a monthly series that starts in January of `start_year`.
#[pyfunction]
#[pyo3(signature = (values, start_year = 2000))]
fn impute_monthly(values: Vec<Option<f64>>, start_year: i32) -> PyResult<Vec<f64>> {
    let coverage = values.iter().map(|v| if v.is_some() { 1.0 } else { 0.0 }).collect();
    let s = RegularSeries::new("py", Resolution::Monthly, start_year, values, coverage).map_err(to_py)?;
    impute_seasonal(&s).and_then(|s| s.dense()).map_err(to_py)
}

/// Annual (or, with `monthly=True`, per-calendar-month) anomalies against a baseline.
#[pyfunction]
#[pyo3(signature = (values, start_year, baseline, monthly = false))]
fn anomaly(values: Vec<f64>, start_year: i32, baseline: (i32, i32), monthly: bool) -> PyResult<Vec<f64>> {
    let resolution = if monthly { Resolution::Monthly } else { Resolution::Annual };
    let s = RegularSeries::from_values("py", resolution, start_year, &values).map_err(to_py)?;
    pipeline::anomaly(&s, baseline).and_then(|a| a.dense()).map_err(to_py)
}

/// Write the built-in four-group synthetic corpus; returns the station ids.
#[pyfunction]
#[pyo3(signature = (directory, seed = 42, start_year = None, end_year = None))]
fn gen_corpus(directory: PathBuf, seed: u64, start_year: Option<i32>, end_year: Option<i32>) -> PyResult<Vec<String>> {
    let mut spec = SyntheticSpec::four_groups(seed);
    if let Some(y) = start_year {
        spec.start_year = y;
    }
    if let Some(y) = end_year {
        spec.end_year = y;
    }
    let metas = pipeline::gen_corpus(&spec, &directory).map_err(to_py)?;
    Ok(metas.into_iter().map(|m| m.id).collect())
}

/// Run every stage; returns the config hash. Keyword arguments override the config file.
#[pyfunction]
#[pyo3(signature = (config = None, corpus_dir = None, out_dir = None, seed = None, start_year = None, end_year = None, permutations = None))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    py: Python<'_>,
    config: Option<PathBuf>,
    corpus_dir: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    start_year: Option<i32>,
    end_year: Option<i32>,
    permutations: Option<usize>,
) -> PyResult<String> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::from_file(p).map_err(to_py)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&ConfigOverrides {
        corpus_dir,
        out_dir,
        seed,
        start_year,
        end_year,
        permutations,
        ..Default::default()
    })
    .map_err(to_py)?;
    let summary = py.allow_threads(|| pipeline::run_pipeline(&cfg)).map_err(to_py)?;
    Ok(summary.config_hash)
}

#[pymodule]
fn stationtrend_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("StationTrendError", py.get_type_bound::<StationTrendError>())?;
    m.add("ConfigError", py.get_type_bound::<ConfigError>())?;
    m.add("ConvergenceError", py.get_type_bound::<ConvergenceError>())?;
    m.add_class::<PyTrendFit>()?;
    m.add_class::<PyMannKendall>()?;
    m.add_class::<PyDcor>()?;
    m.add_class::<PyClusterSolution>()?;
    m.add_function(wrap_pyfunction!(ols_trend, m)?)?;
    m.add_function(wrap_pyfunction!(sens_slope, m)?)?;
    m.add_function(wrap_pyfunction!(s_estimator_trend, m)?)?;
    m.add_function(wrap_pyfunction!(mann_kendall, m)?)?;
    m.add_function(wrap_pyfunction!(shapiro_wilk, m)?)?;
    m.add_function(wrap_pyfunction!(lag1, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_distance, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(hcluster, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(dcor, m)?)?;
    m.add_function(wrap_pyfunction!(impute_monthly, m)?)?;
    m.add_function(wrap_pyfunction!(anomaly, m)?)?;
    m.add_function(wrap_pyfunction!(gen_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
