//! Batch front end: `cluster`, `prioritize`, `pipeline` and `report`.
//!
//! Exit codes: 0 success, 2 invalid input, 3 internal or numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kmeans::{self, center_distances, KMeansError};
use crate::model::{self, concepts, CriterionSet, Format, ItemId, ModelError, RankProfile, RatingMatrix};
use crate::opa::{self, OpaError};
use crate::report::{
    self, ClusteringSummary, ConceptRef, FactorCluster, OpaSummary, PcaSummary, Provenance, ReportBundle,
    ReportError,
};
use crate::robustness::{self, Execution, RobustnessError, SensitivityMode};
use crate::stats::{self, StatsError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<KMeansError> for CliError {
    fn from(e: KMeansError) -> Self {
        match e {
            KMeansError::KTooLarge { .. } | KMeansError::KZero => CliError::Invalid(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::DimsTooLarge { .. } | StatsError::TooFewRows => CliError::Invalid(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<OpaError> for CliError {
    fn from(e: OpaError) -> Self {
        match e {
            OpaError::Empty | OpaError::InconsistentProfiles(_) | OpaError::InvalidProfile(_) => {
                CliError::Invalid(e.to_string())
            }
            OpaError::Solver(_) | OpaError::UnexpectedStatus(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<RobustnessError> for CliError {
    fn from(e: RobustnessError) -> Self {
        match e {
            RobustnessError::InsufficientPanel(_) => CliError::Invalid(e.to_string()),
            RobustnessError::Opa(inner) => inner.into(),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::OutputExists(_) | ReportError::SectionAbsent(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ehr-priority", version, about = "Cluster rated concepts and prioritize factors with OPA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group concepts by their averaged ratings.
    Cluster(ClusterArgs),
    /// Derive criterion, factor and expert weights from rank profiles.
    Prioritize(PrioritizeArgs),
    /// Cluster, then prioritize the resulting factors.
    Pipeline(PipelineArgs),
    /// Re-render a report from a saved bundle.json.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ClusterOpts {
    /// Survey ratings (CSV or JSON).
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long, default_value_t = kmeans::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = kmeans::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = kmeans::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Cluster on this many principal components instead of raw ratings.
    #[arg(long)]
    pub pca_dims: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    LeaveOneOut,
    AdjacentSwap,
    Both,
}

impl From<ModeArg> for SensitivityMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::LeaveOneOut => SensitivityMode::LeaveOneOut,
            ModeArg::AdjacentSwap => SensitivityMode::AdjacentSwap,
            ModeArg::Both => SensitivityMode::Both,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PrioritizeOpts {
    /// Expert, criterion and item ranks (CSV or JSON).
    #[arg(long)]
    pub ranks: PathBuf,
    /// Uncertainty threshold for both criteria and factors; default 1/n per group.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub sensitivity_mode: ModeArg,
    /// Write the OPA linear program in text form to this file.
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CriteriaOpts {
    /// Accept any criterion codes instead of the built-in sets.
    #[arg(long)]
    pub open_criteria: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub cluster: ClusterOpts,
    #[command(flatten)]
    pub criteria: CriteriaOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PrioritizeArgs {
    #[command(flatten)]
    pub prioritize: PrioritizeOpts,
    #[command(flatten)]
    pub criteria: CriteriaOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub cluster: ClusterOpts,
    #[command(flatten)]
    pub prioritize: PrioritizeOpts,
    #[command(flatten)]
    pub criteria: CriteriaOpts,
    /// Rank whatever items the ranks file names instead of the factors F1..Fk.
    #[arg(long)]
    pub any_items: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// A bundle.json from an earlier run.
    #[arg(long)]
    pub bundle: PathBuf,
    /// Output directory; prints the Markdown to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything the pipeline needs, independent of argument parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub ratings_path: PathBuf,
    pub ranks_path: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub pca_dims: Option<usize>,
    pub threshold_override: Option<f64>,
    pub sensitivity_mode: SensitivityMode,
    pub open_criteria: bool,
    pub any_items: bool,
}

impl PipelineConfig {
    pub fn new(ratings_path: impl Into<PathBuf>, ranks_path: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            ratings_path: ratings_path.into(),
            ranks_path: ranks_path.into(),
            k: kmeans::DEFAULT_K,
            seed: kmeans::DEFAULT_SEED,
            max_iter: kmeans::DEFAULT_MAX_ITER,
            pca_dims: None,
            threshold_override: None,
            sensitivity_mode: SensitivityMode::Both,
            open_criteria: false,
            any_items: false,
        }
    }
}

struct Input {
    bytes: Vec<u8>,
    format: Format,
}

fn read_input(path: &Path, provenance: &mut Provenance) -> Result<Input, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    provenance.inputs.insert(name, hex::encode(Sha256::digest(&bytes)));
    Ok(Input {
        bytes,
        format: Format::from_path(path),
    })
}

fn rating_criteria(open: bool) -> CriterionSet {
    if open {
        CriterionSet::open()
    } else {
        CriterionSet::nist()
    }
}

fn rank_criteria(open: bool) -> CriterionSet {
    if open {
        CriterionSet::open()
    } else {
        CriterionSet::evaluation()
    }
}

/// Factor id for a 0-based cluster index.
pub fn factor_id(cluster: usize) -> ItemId {
    ItemId::new(format!("F{}", cluster + 1))
}

/// Fills the clustering sections of `bundle`.
pub fn cluster_stage(
    matrix: &RatingMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    pca_dims: Option<usize>,
    bundle: &mut ReportBundle,
) -> Result<(), CliError> {
    if k > matrix.n_rows() {
        return Err(CliError::Invalid(format!(
            "k exceeds row count: k = {k}, concepts = {}",
            matrix.n_rows()
        )));
    }
    let (points, pca) = match pca_dims {
        Some(dims) => {
            let p = stats::pca_project(matrix.rows(), dims)?;
            let summary = PcaSummary {
                dims,
                explained_variance_ratio: p.explained_variance_ratio,
                eigenvalues: p.eigenvalues.clone(),
            };
            (p.scores, Some(summary))
        }
        None => (matrix.rows().to_vec(), None),
    };
    let solution = kmeans::lloyd(&points, k, seed, max_iter)?;
    bundle.descriptive = Some(stats::descriptive_stats(matrix)?);
    bundle.anova = Some(stats::anova(matrix, &solution.assignments, k)?);
    bundle.center_distances = Some(center_distances(&solution.centroids));
    let catalogue = concepts();
    let ids = matrix.concept_ids();
    bundle.cluster_table = Some(
        solution
            .members()
            .iter()
            .enumerate()
            .map(|(c, rows)| FactorCluster {
                factor: factor_id(c),
                cluster: c + 1,
                concepts: rows
                    .iter()
                    .map(|&r| {
                        let id = ids[r];
                        let known = catalogue.iter().find(|x| x.id == id);
                        ConceptRef {
                            id,
                            notation: known.map_or_else(|| format!("CNCPT{id}"), |x| x.notation.clone()),
                            name: known.map_or_else(String::new, |x| x.name.clone()),
                        }
                    })
                    .collect(),
            })
            .collect(),
    );
    bundle.clustering = Some(ClusteringSummary {
        k,
        rows: matrix.n_rows(),
        iterations: solution.iterations,
        converged: solution.converged,
        wcss: solution.wcss,
        wcss_trajectory: solution.wcss_trajectory.clone(),
        initial_concepts: solution.initial_rows.iter().map(|&r| ids[r]).collect(),
        pca,
    });
    Ok(())
}

/// Fills the prioritization sections of `bundle`. Intervals and concordance
/// need two or more experts and are left out for a single expert.
pub fn prioritize_stage(
    profiles: &[RankProfile],
    threshold_override: Option<f64>,
    mode: SensitivityMode,
    bundle: &mut ReportBundle,
) -> Result<(), CliError> {
    let solution = opa::solve_opa(profiles)?;
    let sensitivity = robustness::sensitivity_analysis(profiles, mode, Execution::Parallel)?;
    if profiles.len() >= 2 {
        bundle.uncertainty = Some(robustness::uncertainty_table(profiles, &solution, threshold_override)?);
        let items = profiles[0].items().len();
        if items >= 2 {
            bundle.concordance = Some(stats::concordance(profiles)?);
        }
    }
    bundle.criterion_weights = Some(solution.criterion_weights.clone());
    bundle.factor_weights = Some(solution.factor_weights.clone());
    bundle.opa = Some(OpaSummary {
        z: solution.z,
        lp_iterations: solution.iterations,
        expert_weights: solution.expert_weights.clone(),
    });
    bundle.sensitivity = Some(sensitivity);
    Ok(())
}

fn dump_lp(profiles: &[RankProfile], path: &Path) -> Result<(), CliError> {
    let model = opa::build_opa_lp(profiles)?;
    fs::write(path, model.lp.to_string())
        .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))
}

fn record_cluster(p: &mut Provenance, o: &ClusterOpts) {
    p.seed = Some(o.seed);
    p.k = Some(o.k);
    p.max_iter = Some(o.max_iter);
    p.pca_dims = o.pca_dims;
}

fn record_prioritize(p: &mut Provenance, o: &PrioritizeOpts) {
    p.threshold_override = o.threshold;
    p.sensitivity_mode = Some(o.sensitivity_mode.into());
}

fn load_matrix(input: &Input, open: bool) -> Result<RatingMatrix, CliError> {
    let criteria = rating_criteria(open);
    let records = model::parse_ratings(input.bytes.as_slice(), input.format, &criteria)?;
    Ok(model::aggregate_ratings(&records, &criteria)?)
}

fn load_profiles(input: &Input, open: bool, items: Option<&[ItemId]>) -> Result<Vec<RankProfile>, CliError> {
    Ok(model::parse_ranks(input.bytes.as_slice(), input.format, &rank_criteria(open), items)?)
}

fn check_threshold(t: Option<f64>) -> Result<(), CliError> {
    match t {
        Some(t) if !(t.is_finite() && t >= 0.0) => {
            Err(CliError::Invalid(format!("threshold must be a non-negative number, got {t}")))
        }
        _ => Ok(()),
    }
}

pub fn cmd_cluster(args: &ClusterArgs) -> Result<(), CliError> {
    let mut p = Provenance::new("cluster");
    record_cluster(&mut p, &args.cluster);
    let input = read_input(&args.cluster.ratings, &mut p)?;
    let matrix = load_matrix(&input, args.criteria.open_criteria)?;
    let mut bundle = ReportBundle::new(p);
    let o = &args.cluster;
    cluster_stage(&matrix, o.k, o.seed, o.max_iter, o.pca_dims, &mut bundle)?;
    Ok(report::write_report_dir(&bundle, &args.out)?)
}

pub fn cmd_prioritize(args: &PrioritizeArgs) -> Result<(), CliError> {
    let o = &args.prioritize;
    check_threshold(o.threshold)?;
    let mut p = Provenance::new("prioritize");
    record_prioritize(&mut p, o);
    let input = read_input(&o.ranks, &mut p)?;
    let profiles = load_profiles(&input, args.criteria.open_criteria, None)?;
    if let Some(path) = &o.dump_lp {
        dump_lp(&profiles, path)?;
    }
    let mut bundle = ReportBundle::new(p);
    prioritize_stage(&profiles, o.threshold, o.sensitivity_mode.into(), &mut bundle)?;
    Ok(report::write_report_dir(&bundle, &args.out)?)
}

/// Runs both stages and returns the combined bundle without writing anything.
/// Both inputs are parsed and validated before any computation.
pub fn run_pipeline(config: &PipelineConfig) -> Result<ReportBundle, CliError> {
    check_threshold(config.threshold_override)?;
    let mut p = Provenance::new("pipeline");
    p.seed = Some(config.seed);
    p.k = Some(config.k);
    p.max_iter = Some(config.max_iter);
    p.pca_dims = config.pca_dims;
    p.threshold_override = config.threshold_override;
    p.sensitivity_mode = Some(config.sensitivity_mode);
    let ratings = read_input(&config.ratings_path, &mut p)?;
    let ranks = read_input(&config.ranks_path, &mut p)?;
    let matrix = load_matrix(&ratings, config.open_criteria)?;
    let factors: Vec<ItemId> = (0..config.k).map(factor_id).collect();
    let items = (!config.any_items).then_some(factors.as_slice());
    let profiles = load_profiles(&ranks, config.open_criteria, items)?;
    if config.k == 0 {
        return Err(KMeansError::KZero.into());
    }
    let mut bundle = ReportBundle::new(p);
    cluster_stage(&matrix, config.k, config.seed, config.max_iter, config.pca_dims, &mut bundle)?;
    prioritize_stage(&profiles, config.threshold_override, config.sensitivity_mode, &mut bundle)?;
    Ok(bundle)
}

pub fn cmd_pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    let config = PipelineConfig {
        ratings_path: args.cluster.ratings.clone(),
        ranks_path: args.prioritize.ranks.clone(),
        k: args.cluster.k,
        seed: args.cluster.seed,
        max_iter: args.cluster.max_iter,
        pca_dims: args.cluster.pca_dims,
        threshold_override: args.prioritize.threshold,
        sensitivity_mode: args.prioritize.sensitivity_mode.into(),
        open_criteria: args.criteria.open_criteria,
        any_items: args.any_items,
    };
    let bundle = run_pipeline(&config)?;
    if let Some(path) = &args.prioritize.dump_lp {
        let mut p = Provenance::new("pipeline");
        let ranks = read_input(&config.ranks_path, &mut p)?;
        let factors: Vec<ItemId> = (0..config.k).map(factor_id).collect();
        let items = (!config.any_items).then_some(factors.as_slice());
        dump_lp(&load_profiles(&ranks, config.open_criteria, items)?, path)?;
    }
    Ok(report::write_report_dir(&bundle, &args.out)?)
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let bundle = report::read_bundle(&args.bundle).map_err(|e| {
        CliError::Invalid(format!("cannot load bundle {}: {e}", args.bundle.display()))
    })?;
    match &args.out {
        Some(out) => Ok(report::write_report_dir(&bundle, out)?),
        None => {
            print!("{}", report::render_markdown(&bundle));
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Prioritize(a) => cmd_prioritize(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
