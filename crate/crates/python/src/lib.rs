//! Python bindings. Plain data crosses the boundary as Python lists and
//! dicts; the nested report structures go through JSON.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ehr::cli::{run_pipeline as run_pipeline_rs, CliError, PipelineConfig};
use ehr::model::{self, CriterionId, CriterionSet, Format, ItemId};
use ehr::opa;
use ehr::report;
use ehr::robustness::{self, Execution, SensitivityMode};
use ehr::{kmeans, stats};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn invalid(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Invalid(m) => PyValueError::new_err(m),
        CliError::Internal(m) => PyRuntimeError::new_err(m),
    }
}

/// Converts any serializable value to native Python objects via `json.loads`.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn criteria_for(open: bool, nist: bool) -> CriterionSet {
    match (open, nist) {
        (true, _) => CriterionSet::open(),
        (false, true) => CriterionSet::nist(),
        (false, false) => CriterionSet::evaluation(),
    }
}

#[pyclass(name = "RankProfile", module = "ehr_priority", frozen)]
struct PyRankProfile {
    inner: model::RankProfile,
}

#[pymethods]
impl PyRankProfile {
    #[new]
    fn new(
        expert_id: u32,
        expert_rank: u32,
        criterion_ranks: BTreeMap<String, u32>,
        item_ranks: BTreeMap<String, Vec<String>>,
    ) -> PyResult<Self> {
        let inner = model::RankProfile {
            expert_id,
            expert_rank,
            criterion_ranks: criterion_ranks.into_iter().map(|(c, r)| (CriterionId::new(c), r)).collect(),
            item_ranks: item_ranks
                .into_iter()
                .map(|(c, items)| (CriterionId::new(c), items.into_iter().map(ItemId::new).collect()))
                .collect(),
        };
        inner.validate().map_err(invalid)?;
        Ok(Self { inner })
    }

    #[getter]
    fn expert_id(&self) -> u32 {
        self.inner.expert_id
    }

    #[getter]
    fn expert_rank(&self) -> u32 {
        self.inner.expert_rank
    }

    #[getter]
    fn criterion_ranks(&self) -> BTreeMap<String, u32> {
        self.inner
            .criterion_ranks
            .iter()
            .map(|(c, &r)| (c.as_str().to_string(), r))
            .collect()
    }

    /// Items per criterion, most important first.
    #[getter]
    fn item_ranks(&self) -> BTreeMap<String, Vec<String>> {
        self.inner
            .item_ranks
            .iter()
            .map(|(c, items)| (c.as_str().to_string(), items.iter().map(|i| i.as_str().to_string()).collect()))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "RankProfile(expert_id={}, expert_rank={}, criteria={})",
            self.inner.expert_id,
            self.inner.expert_rank,
            self.inner.criterion_ranks.len()
        )
    }
}

#[pyclass(name = "ClusterSolution", module = "ehr_priority", frozen)]
struct PyClusterSolution {
    inner: kmeans::ClusterSolution,
}

#[pymethods]
impl PyClusterSolution {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn assignments(&self) -> Vec<usize> {
        self.inner.assignments.clone()
    }

    #[getter]
    fn centroids(&self) -> Vec<Vec<f64>> {
        self.inner.centroids.clone()
    }

    #[getter]
    fn wcss(&self) -> f64 {
        self.inner.wcss
    }

    #[getter]
    fn wcss_trajectory(&self) -> Vec<f64> {
        self.inner.wcss_trajectory.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn initial_rows(&self) -> Vec<usize> {
        self.inner.initial_rows.clone()
    }

    fn members(&self) -> Vec<Vec<usize>> {
        self.inner.members()
    }

    fn center_distances(&self) -> Vec<Vec<f64>> {
        kmeans::center_distances(&self.inner.centroids).distances
    }

    fn __repr__(&self) -> String {
        format!(
            "ClusterSolution(k={}, wcss={}, iterations={})",
            self.inner.k, self.inner.wcss, self.inner.iterations
        )
    }
}

#[pyclass(name = "WeightSolution", module = "ehr_priority", frozen)]
struct PyWeightSolution {
    inner: opa::WeightSolution,
}

#[pymethods]
impl PyWeightSolution {
    #[getter]
    fn z(&self) -> f64 {
        self.inner.z
    }

    #[getter]
    fn factor_weights(&self) -> BTreeMap<String, f64> {
        self.inner
            .factor_weights
            .iter()
            .map(|(k, &w)| (k.as_str().to_string(), w))
            .collect()
    }

    #[getter]
    fn criterion_weights(&self) -> BTreeMap<String, f64> {
        self.inner
            .criterion_weights
            .iter()
            .map(|(k, &w)| (k.as_str().to_string(), w))
            .collect()
    }

    #[getter]
    fn expert_weights(&self) -> BTreeMap<u32, f64> {
        self.inner.expert_weights.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    /// Weight of one (expert, criterion, item) cell.
    fn weight(&self, expert_id: u32, criterion: &str, item: &str) -> PyResult<f64> {
        let s = &self.inner;
        let e = s.experts.iter().position(|x| x.id == expert_id);
        let c = s.criteria.iter().position(|x| x.as_str() == criterion);
        let k = s.items.iter().position(|x| x.as_str() == item);
        match (e, c, k) {
            (Some(e), Some(c), Some(k)) => Ok(s.weight(e, c, k)),
            _ => Err(PyValueError::new_err(format!("no cell ({expert_id}, {criterion}, {item})"))),
        }
    }

    /// `(item, weight, tied)` in priority order.
    fn ranking(&self) -> Vec<(String, f64, bool)> {
        opa::rank_items(&self.inner)
            .into_iter()
            .map(|r| (r.item.as_str().to_string(), r.weight, r.tied))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("WeightSolution(z={}, items={})", self.inner.z, self.inner.items.len())
    }
}

fn profiles_of(profiles: &[PyRef<'_, PyRankProfile>]) -> Vec<model::RankProfile> {
    profiles.iter().map(|p| p.inner.clone()).collect()
}

/// Parses survey ratings and averages them per concept.
///
/// Returns `(concept_ids, criteria, rows)`.
#[pyfunction]
#[pyo3(signature = (text, open_criteria = false))]
fn rating_matrix(text: &str, open_criteria: bool) -> PyResult<(Vec<u32>, Vec<String>, Vec<Vec<f64>>)> {
    let criteria = criteria_for(open_criteria, true);
    let records = model::parse_ratings(text.as_bytes(), Format::Csv, &criteria).map_err(invalid)?;
    let m = model::aggregate_ratings(&records, &criteria).map_err(invalid)?;
    Ok((
        m.concept_ids().to_vec(),
        m.criteria().iter().map(|c| c.as_str().to_string()).collect(),
        m.rows().to_vec(),
    ))
}

/// Parses a long-format rank table into one profile per expert.
#[pyfunction]
#[pyo3(signature = (text, open_criteria = false))]
fn parse_ranks(text: &str, open_criteria: bool) -> PyResult<Vec<PyRankProfile>> {
    let criteria = criteria_for(open_criteria, false);
    let profiles = model::parse_ranks(text.as_bytes(), Format::Csv, &criteria, None).map_err(invalid)?;
    Ok(profiles.into_iter().map(|inner| PyRankProfile { inner }).collect())
}

#[pyfunction]
#[pyo3(signature = (points, k, seed = kmeans::DEFAULT_SEED, max_iter = kmeans::DEFAULT_MAX_ITER))]
fn lloyd(points: Vec<Vec<f64>>, k: usize, seed: u64, max_iter: usize) -> PyResult<PyClusterSolution> {
    let inner = kmeans::lloyd(&points, k, seed, max_iter).map_err(invalid)?;
    Ok(PyClusterSolution { inner })
}

#[pyfunction]
fn solve_opa(profiles: Vec<PyRef<'_, PyRankProfile>>) -> PyResult<PyWeightSolution> {
    let inner = opa::solve_opa(&profiles_of(&profiles)).map_err(invalid)?;
    Ok(PyWeightSolution { inner })
}

/// Kendall's W; `rankings[r][j]` is rater `r`'s rank for item `j`.
#[pyfunction]
fn kendalls_w(rankings: Vec<Vec<u32>>) -> PyResult<f64> {
    stats::kendalls_w(&rankings).map_err(invalid)
}

/// Upper-tail probability of the F distribution.
#[pyfunction]
fn f_significance(f: f64, df1: u64, df2: u64) -> PyResult<f64> {
    stats::f_significance(f, df1, df2).map_err(invalid)
}

#[pyfunction]
fn pca_project<'py>(py: Python<'py>, rows: Vec<Vec<f64>>, dims: usize) -> PyResult<Bound<'py, PyAny>> {
    let pca = stats::pca_project(&rows, dims).map_err(invalid)?;
    to_py(py, &pca)
}

#[pyfunction]
#[pyo3(signature = (profiles, threshold = None))]
fn uncertainty_table<'py>(
    py: Python<'py>,
    profiles: Vec<PyRef<'_, PyRankProfile>>,
    threshold: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let profiles = profiles_of(&profiles);
    let panel = opa::solve_opa(&profiles).map_err(invalid)?;
    let rows = robustness::uncertainty_table(&profiles, &panel, threshold).map_err(invalid)?;
    to_py(py, &rows)
}

#[pyfunction]
#[pyo3(signature = (profiles, mode = "both"))]
fn sensitivity_analysis<'py>(
    py: Python<'py>,
    profiles: Vec<PyRef<'_, PyRankProfile>>,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "leave-one-out" => SensitivityMode::LeaveOneOut,
        "adjacent-swap" => SensitivityMode::AdjacentSwap,
        "both" => SensitivityMode::Both,
        other => return Err(PyValueError::new_err(format!("unknown sensitivity mode {other:?}"))),
    };
    let profiles = profiles_of(&profiles);
    let r = py
        .detach(|| robustness::sensitivity_analysis(&profiles, mode, Execution::Parallel))
        .map_err(invalid)?;
    to_py(py, &r)
}

/// Runs clustering and prioritization on two input files and returns the
/// report bundle as a JSON string.
#[pyfunction]
#[pyo3(signature = (ratings, ranks, k = kmeans::DEFAULT_K, seed = kmeans::DEFAULT_SEED, pca_dims = None, threshold = None))]
fn run_pipeline(
    py: Python<'_>,
    ratings: PathBuf,
    ranks: PathBuf,
    k: usize,
    seed: u64,
    pca_dims: Option<usize>,
    threshold: Option<f64>,
) -> PyResult<String> {
    let mut config = PipelineConfig::new(ratings, ranks);
    config.k = k;
    config.seed = seed;
    config.pca_dims = pca_dims;
    config.threshold_override = threshold;
    let bundle = py.detach(|| run_pipeline_rs(&config)).map_err(cli_err)?;
    serde_json::to_string_pretty(&bundle).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn bundle_of(json: &str) -> PyResult<report::ReportBundle> {
    serde_json::from_str(json).map_err(invalid)
}

/// Renders a bundle JSON string as Markdown.
#[pyfunction]
fn render_markdown(bundle: &str) -> PyResult<String> {
    Ok(report::render_markdown(&bundle_of(bundle)?))
}

/// Writes report.md, tables/*.csv and provenance files into `out`.
#[pyfunction]
fn write_report(bundle: &str, out: PathBuf) -> PyResult<()> {
    report::write_report_dir(&bundle_of(bundle)?, &out).map_err(|e| match e {
        report::ReportError::OutputExists(_) => invalid(e),
        other => PyRuntimeError::new_err(other.to_string()),
    })
}

#[pymodule]
#[pyo3(name = "ehr_priority")]
pub fn ehr_priority_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyRankProfile>()?;
    m.add_class::<PyClusterSolution>()?;
    m.add_class::<PyWeightSolution>()?;
    m.add_function(wrap_pyfunction!(rating_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(parse_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(lloyd, m)?)?;
    m.add_function(wrap_pyfunction!(solve_opa, m)?)?;
    m.add_function(wrap_pyfunction!(kendalls_w, m)?)?;
    m.add_function(wrap_pyfunction!(f_significance, m)?)?;
    m.add_function(wrap_pyfunction!(pca_project, m)?)?;
    m.add_function(wrap_pyfunction!(uncertainty_table, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivity_analysis, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(render_markdown, m)?)?;
    m.add_function(wrap_pyfunction!(write_report, m)?)?;
    Ok(())
}
