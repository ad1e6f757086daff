//! Markdown and CSV rendering of pipeline results, and the on-disk output
//! directory (`report.md`, `tables/*.csv`, `provenance.json`, `bundle.json`).
//!
//! Markdown rounds, CSV keeps full precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kmeans::CenterDistanceMatrix;
use crate::model::{CriterionId, ItemId};
use crate::opa::rank_weights;
use crate::robustness::{SensitivityMode, SensitivityReport, UncertaintyRow, WeightKind};
use crate::simplex::Tolerances;
use crate::stats::{AnovaRow, ConcordanceReport, DescriptiveRow};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("section {0} is not present in this report")]
    SectionAbsent(&'static str),
    #[error("output directory {0} exists and was not written by this tool")]
    OutputExists(PathBuf),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub max_iter: Option<usize>,
    pub pca_dims: Option<usize>,
    pub threshold_override: Option<f64>,
    pub sensitivity_mode: Option<SensitivityMode>,
    pub sigma_convention: String,
    pub interval_rule: String,
    pub verdict_rule: String,
    pub lp_tolerances: Tolerances,
    /// SHA-256 of each input file, keyed by file name.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: impl Into<String>) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            seed: None,
            k: None,
            max_iter: None,
            pca_dims: None,
            threshold_override: None,
            sensitivity_mode: None,
            sigma_convention: "population".to_string(),
            interval_rule: "min/max over single-expert OPA solves".to_string(),
            verdict_rule: "pass iff delta <= threshold".to_string(),
            lp_tolerances: Tolerances::default(),
            inputs: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub dims: usize,
    pub explained_variance_ratio: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub k: usize,
    pub rows: usize,
    pub iterations: usize,
    pub converged: bool,
    pub wcss: f64,
    pub wcss_trajectory: Vec<f64>,
    /// Concept ids drawn as initial centroids.
    pub initial_concepts: Vec<u32>,
    pub pca: Option<PcaSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptRef {
    pub id: u32,
    pub notation: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorCluster {
    pub factor: ItemId,
    /// 1-based cluster number.
    pub cluster: usize,
    pub concepts: Vec<ConceptRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpaSummary {
    pub z: f64,
    pub lp_iterations: usize,
    pub expert_weights: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub descriptive: Option<Vec<DescriptiveRow>>,
    pub clustering: Option<ClusteringSummary>,
    pub center_distances: Option<CenterDistanceMatrix>,
    pub anova: Option<Vec<AnovaRow>>,
    pub cluster_table: Option<Vec<FactorCluster>>,
    pub criterion_weights: Option<BTreeMap<CriterionId, f64>>,
    pub factor_weights: Option<BTreeMap<ItemId, f64>>,
    pub opa: Option<OpaSummary>,
    pub concordance: Option<ConcordanceReport>,
    pub uncertainty: Option<Vec<UncertaintyRow>>,
    pub sensitivity: Option<SensitivityReport>,
}

impl ReportBundle {
    pub fn new(provenance: Provenance) -> Self {
        ReportBundle {
            provenance,
            descriptive: None,
            clustering: None,
            center_distances: None,
            anova: None,
            cluster_table: None,
            criterion_weights: None,
            factor_weights: None,
            opa: None,
            concordance: None,
            uncertainty: None,
            sensitivity: None,
        }
    }
}

/// One CSV file each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Section {
    Summary,
    Descriptive,
    WcssTrajectory,
    CenterDistances,
    Anova,
    Clusters,
    CriterionWeights,
    FactorWeights,
    ExpertWeights,
    Concordance,
    Uncertainty,
    Sensitivity,
    Scenarios,
}

impl Section {
    pub const ALL: [Section; 13] = [
        Section::Summary,
        Section::Descriptive,
        Section::WcssTrajectory,
        Section::CenterDistances,
        Section::Anova,
        Section::Clusters,
        Section::CriterionWeights,
        Section::FactorWeights,
        Section::ExpertWeights,
        Section::Concordance,
        Section::Uncertainty,
        Section::Sensitivity,
        Section::Scenarios,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Section::Summary => "summary",
            Section::Descriptive => "descriptive",
            Section::WcssTrajectory => "wcss_trajectory",
            Section::CenterDistances => "center_distances",
            Section::Anova => "anova",
            Section::Clusters => "clusters",
            Section::CriterionWeights => "criterion_weights",
            Section::FactorWeights => "factor_weights",
            Section::ExpertWeights => "expert_weights",
            Section::Concordance => "concordance",
            Section::Uncertainty => "uncertainty",
            Section::Sensitivity => "sensitivity",
            Section::Scenarios => "sensitivity_scenarios",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

/// Fixed-point with `-0` folded to `0` and non-finite values shown as `-`.
pub fn fixed(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return "-".to_string();
    }
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Three decimals, or scientific notation below 0.001.
pub fn p_value(p: f64) -> String {
    if p.is_finite() && p > 0.0 && p < 1e-3 {
        format!("{p:.2e}")
    } else {
        fixed(p, 3)
    }
}

fn full(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        x.to_string()
    }
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|")
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", header.iter().map(|_| "---|").collect::<String>());
    for row in rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    out.push('\n');
}

fn sorted_desc<K: Ord + Clone>(weights: &BTreeMap<K, f64>) -> Vec<(K, f64)> {
    let mut v: Vec<(K, f64)> = weights.iter().map(|(k, w)| (k.clone(), *w)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub fn render_markdown(bundle: &ReportBundle) -> String {
    let mut out = String::from("# Prioritization report\n\n");
    let p = &bundle.provenance;
    out.push_str("## Provenance\n\n");
    let _ = writeln!(out, "- tool: {} {}", p.tool, p.version);
    let _ = writeln!(out, "- command: {}", p.command);
    let _ = writeln!(out, "- seed: {}", opt(&p.seed));
    let _ = writeln!(out, "- k: {}", opt(&p.k));
    let _ = writeln!(out, "- max iterations: {}", opt(&p.max_iter));
    let _ = writeln!(out, "- PCA dimensions: {}", opt(&p.pca_dims));
    let _ = writeln!(out, "- threshold override: {}", opt(&p.threshold_override));
    let mode = p.sensitivity_mode.map(|m| match m {
        SensitivityMode::LeaveOneOut => "leave-one-out",
        SensitivityMode::AdjacentSwap => "adjacent-swap",
        SensitivityMode::Both => "both",
    });
    let _ = writeln!(out, "- sensitivity mode: {}", opt(&mode));
    let _ = writeln!(out, "- sigma: {}", p.sigma_convention);
    let _ = writeln!(out, "- intervals: {}", p.interval_rule);
    let _ = writeln!(out, "- verdict: {}", p.verdict_rule);
    for (name, hash) in &p.inputs {
        let _ = writeln!(out, "- input {name}: sha256 {hash}");
    }
    out.push('\n');

    if let Some(rows) = &bundle.descriptive {
        out.push_str("## Descriptive statistics\n\n");
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    cell(r.criterion.as_str()),
                    r.n.to_string(),
                    fixed(r.min, 3),
                    fixed(r.max, 3),
                    fixed(r.mean, 3),
                    fixed(r.std, 3),
                ]
            })
            .collect();
        table(&mut out, &["Criterion", "N", "Min", "Max", "Mean", "Std. deviation"], &body);
    }

    if let Some(c) = &bundle.clustering {
        out.push_str("## Clustering\n\n");
        let _ = writeln!(out, "- concepts: {}", c.rows);
        let _ = writeln!(out, "- k: {}", c.k);
        let _ = writeln!(out, "- iterations: {}", c.iterations);
        let _ = writeln!(out, "- converged: {}", if c.converged { "yes" } else { "no" });
        let _ = writeln!(out, "- WCSS: {}", fixed(c.wcss, 3));
        let initial: Vec<String> = c.initial_concepts.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "- initial centroids (concept ids): {}", initial.join(", "));
        if let Some(pca) = &c.pca {
            let _ = writeln!(
                out,
                "- PCA: {} dimensions, explained variance {}",
                pca.dims,
                fixed(pca.explained_variance_ratio, 3)
            );
        }
        out.push('\n');
    }

    if let Some(d) = &bundle.center_distances {
        out.push_str("## Distances between final cluster centers\n\n");
        let k = d.distances.len();
        let labels: Vec<String> = (1..=k).map(|i| i.to_string()).collect();
        let mut header = vec!["Cluster"];
        header.extend(labels.iter().map(String::as_str));
        let body: Vec<Vec<String>> = d
            .distances
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = vec![(i + 1).to_string()];
                r.extend(row.iter().map(|&x| fixed(x, 3)));
                r
            })
            .collect();
        table(&mut out, &header, &body);
    }

    if let Some(rows) = &bundle.anova {
        out.push_str("## ANOVA\n\n");
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    cell(r.criterion.as_str()),
                    fixed(r.cluster_ms, 3),
                    r.cluster_df.to_string(),
                    fixed(r.error_ms, 3),
                    r.error_df.to_string(),
                    fixed(r.f_stat, 3),
                    if r.f_stat.is_finite() { p_value(r.significance) } else { "-".to_string() },
                ]
            })
            .collect();
        table(
            &mut out,
            &["Criterion", "Cluster mean square", "df", "Error mean square", "df", "F", "Sig."],
            &body,
        );
    }

    if let Some(clusters) = &bundle.cluster_table {
        out.push_str("## Factor clustering\n\n");
        let body: Vec<Vec<String>> = clusters
            .iter()
            .map(|f| {
                let names: Vec<String> = f
                    .concepts
                    .iter()
                    .map(|c| format!("{} {}", c.notation, cell(&c.name)))
                    .collect();
                vec![f.factor.to_string(), f.cluster.to_string(), names.join("; ")]
            })
            .collect();
        table(&mut out, &["Factor", "Cluster", "Concepts"], &body);
    }

    if let Some(w) = &bundle.criterion_weights {
        out.push_str("## Importance of criteria\n\n");
        let body: Vec<Vec<String>> = sorted_desc(w)
            .into_iter()
            .enumerate()
            .map(|(i, (c, w))| vec![(i + 1).to_string(), cell(c.as_str()), fixed(w, 3)])
            .collect();
        table(&mut out, &["Rank", "Criterion", "Weight"], &body);
    }

    if let Some(w) = &bundle.factor_weights {
        out.push_str("## Importance of factors\n\n");
        let body: Vec<Vec<String>> = rank_weights(w)
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                vec![
                    (i + 1).to_string(),
                    cell(r.item.as_str()),
                    fixed(r.weight, 3),
                    if r.tied { "tie".to_string() } else { String::new() },
                ]
            })
            .collect();
        table(&mut out, &["Rank", "Factor", "Weight", "Note"], &body);
    }

    if let Some(o) = &bundle.opa {
        out.push_str("## Expert weights\n\n");
        let _ = writeln!(out, "Optimal Z: {}\n", fixed(o.z, 3));
        let body: Vec<Vec<String>> = o
            .expert_weights
            .iter()
            .map(|(e, w)| vec![e.to_string(), fixed(*w, 3)])
            .collect();
        table(&mut out, &["Expert", "Weight"], &body);
    }

    if let Some(c) = &bundle.concordance {
        out.push_str("## Concordance (Kendall's W)\n\n");
        let mut body = vec![vec!["criteria order".to_string(), fixed(c.among_criteria_w, 3)]];
        body.extend(
            c.per_criterion_w
                .iter()
                .map(|(k, w)| vec![format!("items under {}", cell(k.as_str())), fixed(*w, 3)]),
        );
        table(&mut out, &["Ranking", "W"], &body);
    }

    if let Some(rows) = &bundle.uncertainty {
        out.push_str("## Uncertainty analysis\n\n");
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    match r.kind {
                        WeightKind::Criterion => "criterion".to_string(),
                        WeightKind::Factor => "factor".to_string(),
                    },
                    cell(&r.item),
                    fixed(r.lower, 2),
                    fixed(r.upper, 2),
                    fixed(r.point, 2),
                    fixed(r.delta, 2),
                    fixed(r.sigma, 2),
                    r.cv_percent.map_or_else(|| "-".to_string(), |x| fixed(x, 2)),
                    fixed(r.threshold, 2),
                    r.verdict.to_string(),
                ]
            })
            .collect();
        table(
            &mut out,
            &["Kind", "Item", "Lower", "Upper", "Point", "Delta", "Sigma", "Sigma %", "T", "Result"],
            &body,
        );
    }

    if let Some(s) = &bundle.sensitivity {
        out.push_str("## Sensitivity analysis\n\n");
        let _ = writeln!(out, "- scenarios: {}", s.scenarios.len());
        let _ = writeln!(out, "- ranking stable: {}", if s.rank_stable { "yes" } else { "no" });
        for (a, b) in &s.changed_pairs {
            let _ = writeln!(out, "- order of {a} over {b} reverses in at least one scenario");
        }
        out.push('\n');
        let body: Vec<Vec<String>> = s
            .envelope
            .iter()
            .map(|(item, e)| vec![cell(item.as_str()), fixed(e.min, 3), fixed(e.max, 3), fixed(e.point, 3)])
            .collect();
        table(&mut out, &["Factor", "Lower weight", "Upper weight", "OPA weight"], &body);
    }

    out.truncate(out.trim_end().len());
    out.push('\n');
    out
}

pub fn sections(bundle: &ReportBundle) -> Vec<Section> {
    Section::ALL
        .into_iter()
        .filter(|&s| render_csv(bundle, s).is_ok())
        .collect()
}

fn interval_of(bundle: &ReportBundle, kind: WeightKind, item: &str) -> (String, String) {
    bundle
        .uncertainty
        .as_ref()
        .and_then(|rows| rows.iter().find(|r| r.kind == kind && r.item == item))
        .map_or((String::new(), String::new()), |r| (full(r.lower), full(r.upper)))
}

pub fn render_csv(bundle: &ReportBundle, section: Section) -> Result<String, ReportError> {
    let absent = || ReportError::SectionAbsent(section.name());
    let mut w = csv::Writer::from_writer(Vec::new());
    match section {
        Section::Summary => {
            let mut pairs: Vec<(&str, String)> = Vec::new();
            if let Some(c) = &bundle.clustering {
                pairs.push(("k", c.k.to_string()));
                pairs.push(("concepts", c.rows.to_string()));
                pairs.push(("iterations", c.iterations.to_string()));
                pairs.push(("converged", c.converged.to_string()));
                pairs.push(("wcss", full(c.wcss)));
                if let Some(pca) = &c.pca {
                    pairs.push(("pca_dims", pca.dims.to_string()));
                    pairs.push(("pca_explained_variance_ratio", full(pca.explained_variance_ratio)));
                }
            }
            if let Some(o) = &bundle.opa {
                pairs.push(("z", full(o.z)));
                pairs.push(("lp_iterations", o.lp_iterations.to_string()));
            }
            if let Some(s) = &bundle.sensitivity {
                pairs.push(("scenarios", s.scenarios.len().to_string()));
                pairs.push(("rank_stable", s.rank_stable.to_string()));
            }
            if pairs.is_empty() {
                return Err(absent());
            }
            w.write_record(["key", "value"])?;
            for (k, v) in pairs {
                w.write_record([k, v.as_str()])?;
            }
        }
        Section::Descriptive => {
            let rows = bundle.descriptive.as_ref().ok_or_else(absent)?;
            w.write_record(["criterion", "n", "min", "max", "mean", "std"])?;
            for r in rows {
                w.write_record([
                    r.criterion.to_string(),
                    r.n.to_string(),
                    full(r.min),
                    full(r.max),
                    full(r.mean),
                    full(r.std),
                ])?;
            }
        }
        Section::WcssTrajectory => {
            let c = bundle.clustering.as_ref().ok_or_else(absent)?;
            w.write_record(["iteration", "wcss"])?;
            for (i, x) in c.wcss_trajectory.iter().enumerate() {
                w.write_record([(i + 1).to_string(), full(*x)])?;
            }
        }
        Section::CenterDistances => {
            let d = bundle.center_distances.as_ref().ok_or_else(absent)?;
            let mut header = vec!["cluster".to_string()];
            header.extend((1..=d.distances.len()).map(|i| i.to_string()));
            w.write_record(&header)?;
            for (i, row) in d.distances.iter().enumerate() {
                let mut r = vec![(i + 1).to_string()];
                r.extend(row.iter().map(|&x| full(x)));
                w.write_record(&r)?;
            }
        }
        Section::Anova => {
            let rows = bundle.anova.as_ref().ok_or_else(absent)?;
            w.write_record(["criterion", "cluster_ms", "cluster_df", "error_ms", "error_df", "f", "significance"])?;
            for r in rows {
                w.write_record([
                    r.criterion.to_string(),
                    full(r.cluster_ms),
                    r.cluster_df.to_string(),
                    full(r.error_ms),
                    r.error_df.to_string(),
                    full(r.f_stat),
                    full(r.significance),
                ])?;
            }
        }
        Section::Clusters => {
            let clusters = bundle.cluster_table.as_ref().ok_or_else(absent)?;
            w.write_record(["factor", "cluster", "concept_id", "notation", "name"])?;
            for f in clusters {
                for c in &f.concepts {
                    w.write_record([
                        f.factor.to_string(),
                        f.cluster.to_string(),
                        c.id.to_string(),
                        c.notation.clone(),
                        c.name.clone(),
                    ])?;
                }
            }
        }
        Section::CriterionWeights => {
            let weights = bundle.criterion_weights.as_ref().ok_or_else(absent)?;
            w.write_record(["item", "lower", "upper", "point"])?;
            for (c, x) in sorted_desc(weights) {
                let (lo, hi) = interval_of(bundle, WeightKind::Criterion, c.as_str());
                w.write_record([c.to_string(), lo, hi, full(x)])?;
            }
        }
        Section::FactorWeights => {
            let weights = bundle.factor_weights.as_ref().ok_or_else(absent)?;
            w.write_record(["item", "lower", "upper", "point"])?;
            for r in rank_weights(weights) {
                let (lo, hi) = interval_of(bundle, WeightKind::Factor, r.item.as_str());
                w.write_record([r.item.to_string(), lo, hi, full(r.weight)])?;
            }
        }
        Section::ExpertWeights => {
            let o = bundle.opa.as_ref().ok_or_else(absent)?;
            w.write_record(["expert", "weight"])?;
            for (e, x) in &o.expert_weights {
                w.write_record([e.to_string(), full(*x)])?;
            }
        }
        Section::Concordance => {
            let c = bundle.concordance.as_ref().ok_or_else(absent)?;
            w.write_record(["ranking", "w"])?;
            w.write_record(["criteria", full(c.among_criteria_w).as_str()])?;
            for (k, x) in &c.per_criterion_w {
                w.write_record([format!("items:{k}"), full(*x)])?;
            }
        }
        Section::Uncertainty => {
            let rows = bundle.uncertainty.as_ref().ok_or_else(absent)?;
            w.write_record([
                "kind",
                "item",
                "lower",
                "upper",
                "point",
                "delta",
                "sigma",
                "cv_percent",
                "threshold",
                "verdict",
            ])?;
            for r in rows {
                w.write_record([
                    match r.kind {
                        WeightKind::Criterion => "criterion".to_string(),
                        WeightKind::Factor => "factor".to_string(),
                    },
                    r.item.clone(),
                    full(r.lower),
                    full(r.upper),
                    full(r.point),
                    full(r.delta),
                    full(r.sigma),
                    r.cv_percent.map(full).unwrap_or_default(),
                    full(r.threshold),
                    r.verdict.to_string(),
                ])?;
            }
        }
        Section::Sensitivity => {
            let s = bundle.sensitivity.as_ref().ok_or_else(absent)?;
            w.write_record(["item", "lower", "upper", "point"])?;
            for (item, e) in &s.envelope {
                w.write_record([item.to_string(), full(e.min), full(e.max), full(e.point)])?;
            }
        }
        Section::Scenarios => {
            let s = bundle.sensitivity.as_ref().ok_or_else(absent)?;
            w.write_record(["scenario", "item", "weight"])?;
            for sc in &s.scenarios {
                for (item, x) in &sc.factor_weights {
                    w.write_record([sc.label.clone(), item.to_string(), full(*x)])?;
                }
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

fn replaceable(dir: &Path) -> std::io::Result<bool> {
    if !dir.exists() {
        return Ok(true);
    }
    if !dir.is_dir() {
        return Ok(false);
    }
    Ok(dir.join("provenance.json").is_file() || fs::read_dir(dir)?.next().is_none())
}

/// Renders every present section into a sibling temp directory, then moves it
/// into place. An existing `out` is replaced only if empty or a previous report.
pub fn write_report_dir(bundle: &ReportBundle, out: &Path) -> Result<(), ReportError> {
    if !replaceable(out)? {
        return Err(ReportError::OutputExists(out.to_path_buf()));
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new().prefix(".report-").tempdir_in(&parent)?;
    let root = staging.path();
    fs::write(root.join("report.md"), render_markdown(bundle))?;
    fs::create_dir(root.join("tables"))?;
    for section in sections(bundle) {
        fs::write(root.join("tables").join(section.file_name()), render_csv(bundle, section)?)?;
    }
    let mut provenance = serde_json::to_string_pretty(&bundle.provenance)?;
    provenance.push('\n');
    fs::write(root.join("provenance.json"), provenance)?;
    let mut json = serde_json::to_string_pretty(bundle)?;
    json.push('\n');
    fs::write(root.join("bundle.json"), json)?;

    if out.exists() {
        fs::remove_dir_all(out)?;
    }
    let staged = staging.keep();
    fs::rename(&staged, out)?;
    Ok(())
}

pub fn read_bundle(path: &Path) -> Result<ReportBundle, ReportError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
