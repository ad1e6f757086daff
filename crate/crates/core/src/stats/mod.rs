//! Descriptive statistics, one-way ANOVA over a cluster partition, Kendall's W
//! and optional PCA preprocessing.

mod pca;
pub mod special;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CriterionId, ItemId, RankProfile, RatingMatrix};

pub use pca::{jacobi_eigen, pca_project, Pca, SymmetricEigen};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("degenerate ANOVA design: {0}")]
    DegenerateDesign(String),
    #[error("invalid degrees of freedom ({df1}, {df2})")]
    InvalidDegrees { df1: u64, df2: u64 },
    #[error("Kendall's W needs at least two raters, got {0}")]
    RaterCountTooSmall(usize),
    #[error("Kendall's W needs at least two items, got {0}")]
    ItemCountTooSmall(usize),
    #[error("ranking {rater} is not a permutation of 1..={n}")]
    NonPermutation { rater: usize, n: usize },
    #[error("requested {dims} components from {cols} columns")]
    DimsTooLarge { dims: usize, cols: usize },
    #[error("PCA needs at least two rows")]
    TooFewRows,
    #[error("eigen solver did not converge")]
    NoConvergence,
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;

/// p-values below this are reported as exactly zero.
pub const P_VALUE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub criterion: CriterionId,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub std: f64,
}

pub fn descriptive_stats(matrix: &RatingMatrix) -> Result<Vec<DescriptiveRow>> {
    describe_columns(matrix.criteria(), matrix.rows())
}

/// Per-column n, min, max, mean and sample standard deviation.
pub fn describe_columns(criteria: &[CriterionId], rows: &[Vec<f64>]) -> Result<Vec<DescriptiveRow>> {
    if rows.is_empty() {
        return Err(StatsError::EmptyMatrix);
    }
    let n = rows.len();
    Ok(criteria
        .iter()
        .enumerate()
        .map(|(j, criterion)| {
            let col = rows.iter().map(|r| r[j]);
            let mean = col.clone().sum::<f64>() / n as f64;
            let ss: f64 = col.clone().map(|x| (x - mean) * (x - mean)).sum();
            DescriptiveRow {
                criterion: criterion.clone(),
                n,
                min: col.clone().fold(f64::INFINITY, f64::min),
                max: col.fold(f64::NEG_INFINITY, f64::max),
                mean,
                std: if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub criterion: CriterionId,
    /// Between-groups mean square.
    pub cluster_ms: f64,
    pub cluster_df: usize,
    /// Within-groups mean square.
    pub error_ms: f64,
    pub error_df: usize,
    /// `+inf` when the within-groups variation vanishes.
    #[serde(with = "crate::nonfinite")]
    pub f_stat: f64,
    pub significance: f64,
}

pub fn anova(matrix: &RatingMatrix, labels: &[usize], k: usize) -> Result<Vec<AnovaRow>> {
    anova_columns(matrix.criteria(), matrix.rows(), labels, k)
}

/// One-way ANOVA of every column against cluster labels in `0..k`.
pub fn anova_columns(
    criteria: &[CriterionId],
    rows: &[Vec<f64>],
    labels: &[usize],
    k: usize,
) -> Result<Vec<AnovaRow>> {
    let n = rows.len();
    if labels.len() != n {
        return Err(StatsError::DegenerateDesign(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if k < 2 || n <= k {
        return Err(StatsError::DegenerateDesign(format!("n = {n}, k = {k}")));
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return Err(StatsError::DegenerateDesign(format!("label {l} outside 0..{k}")));
        }
        sizes[l] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(StatsError::DegenerateDesign(format!("cluster {} is empty", empty + 1)));
    }
    let (df1, df2) = (k - 1, n - k);

    Ok(criteria
        .iter()
        .enumerate()
        .map(|(j, criterion)| {
            let grand = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let mut sums = vec![0.0; k];
            for (r, &l) in rows.iter().zip(labels) {
                sums[l] += r[j];
            }
            let means: Vec<f64> = sums.iter().zip(&sizes).map(|(s, &c)| s / c as f64).collect();
            let between: f64 = means
                .iter()
                .zip(&sizes)
                .map(|(m, &c)| c as f64 * (m - grand) * (m - grand))
                .sum();
            let within: f64 = rows
                .iter()
                .zip(labels)
                .map(|(r, &l)| (r[j] - means[l]) * (r[j] - means[l]))
                .sum();
            let scale: f64 = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().max(f64::MIN_POSITIVE);
            let negligible = |ss: f64| ss <= 1e-14 * scale;
            let cluster_ms = between / df1 as f64;
            let error_ms = within / df2 as f64;
            let (f_stat, significance) = if negligible(between) {
                (0.0, 1.0)
            } else if negligible(within) {
                (f64::INFINITY, 0.0)
            } else {
                let f = cluster_ms / error_ms;
                (f, f_significance(f, df1 as u64, df2 as u64).expect("df >= 1"))
            };
            AnovaRow {
                criterion: criterion.clone(),
                cluster_ms,
                cluster_df: df1,
                error_ms,
                error_df: df2,
                f_stat,
                significance,
            }
        })
        .collect())
}

/// Upper-tail probability `P(F(df1, df2) > f)`; values under [`P_VALUE_FLOOR`] become 0.
pub fn f_significance(f: f64, df1: u64, df2: u64) -> Result<f64> {
    if df1 == 0 || df2 == 0 {
        return Err(StatsError::InvalidDegrees { df1, df2 });
    }
    let p = special::f_upper_tail(f.max(0.0), df1 as f64, df2 as f64);
    Ok(if p < P_VALUE_FLOOR { 0.0 } else { p })
}

/// Kendall's coefficient of concordance without tie correction.
///
/// `rankings[r][j]` is the rank rater `r` gives item `j`; each ranking must
/// be a permutation of `1..=n`.
pub fn kendalls_w(rankings: &[Vec<u32>]) -> Result<f64> {
    let m = rankings.len();
    if m < 2 {
        return Err(StatsError::RaterCountTooSmall(m));
    }
    let n = rankings[0].len();
    if n < 2 {
        return Err(StatsError::ItemCountTooSmall(n));
    }
    let mut sums = vec![0i64; n];
    for (rater, ranking) in rankings.iter().enumerate() {
        let mut seen = vec![false; n];
        if ranking.len() != n {
            return Err(StatsError::NonPermutation { rater, n });
        }
        for (j, &r) in ranking.iter().enumerate() {
            let idx = (r as usize).wrapping_sub(1);
            if idx >= n || seen[idx] {
                return Err(StatsError::NonPermutation { rater, n });
            }
            seen[idx] = true;
            sums[j] += i64::from(r);
        }
    }
    // 4S = sum (2 R_j - m (n + 1))^2 keeps everything integral.
    let (mi, ni) = (m as i64, n as i64);
    let four_s: i64 = sums
        .iter()
        .map(|&r| {
            let d = 2 * r - mi * (ni + 1);
            d * d
        })
        .sum();
    let denom = mi * mi * (ni * ni * ni - ni);
    Ok((3 * four_s) as f64 / denom as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceReport {
    /// Agreement among experts on the item order, per criterion.
    pub per_criterion_w: BTreeMap<CriterionId, f64>,
    /// Agreement among experts on the criterion order.
    pub among_criteria_w: f64,
}

/// Kendall's W over a panel of rank profiles.
pub fn concordance(profiles: &[RankProfile]) -> Result<ConcordanceReport> {
    if profiles.len() < 2 {
        return Err(StatsError::RaterCountTooSmall(profiles.len()));
    }
    let criteria: Vec<CriterionId> = profiles[0].criterion_ranks.keys().cloned().collect();
    let items: Vec<ItemId> = profiles[0].items().into_iter().collect();
    let mut per_criterion_w = BTreeMap::new();
    for c in &criteria {
        let rankings: Vec<Vec<u32>> = profiles
            .iter()
            .map(|p| {
                let order = &p.item_ranks[c];
                items
                    .iter()
                    .map(|it| order.iter().position(|o| o == it).map_or(0, |pos| pos as u32 + 1))
                    .collect()
            })
            .collect();
        per_criterion_w.insert(c.clone(), kendalls_w(&rankings)?);
    }
    let criterion_rankings: Vec<Vec<u32>> = profiles
        .iter()
        .map(|p| criteria.iter().map(|c| p.criterion_ranks.get(c).copied().unwrap_or(0)).collect())
        .collect();
    Ok(ConcordanceReport {
        per_criterion_w,
        among_criteria_w: kendalls_w(&criterion_rankings)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crit(n: usize) -> Vec<CriterionId> {
        (0..n).map(|j| CriterionId::new(format!("C{j}"))).collect()
    }

    fn column(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn describes_min_max_mean_std() {
        let rows = describe_columns(&crit(1), &column(&[8.0, 10.0])).unwrap();
        assert_eq!(rows[0].mean, 9.0);
        assert!((rows[0].std - 2f64.sqrt()).abs() < 1e-15);

        let single = describe_columns(&crit(1), &column(&[5.0])).unwrap();
        assert_eq!((single[0].mean, single[0].std), (5.0, 0.0));

        let eights_and_nines = describe_columns(&crit(1), &column(&[8.0, 9.0, 8.0, 9.0, 9.0])).unwrap();
        assert_eq!((eights_and_nines[0].min, eights_and_nines[0].max), (8.0, 9.0));

        assert_eq!(describe_columns(&crit(1), &[]), Err(StatsError::EmptyMatrix));
    }

    #[test]
    fn zero_within_variance_gives_infinite_f() {
        let rows = column(&[0.0, 0.0, 10.0, 10.0]);
        let a = &anova_columns(&crit(1), &rows, &[0, 0, 1, 1], 2).unwrap()[0];
        assert_eq!(a.error_ms, 0.0);
        assert_eq!(a.f_stat, f64::INFINITY);
        assert_eq!(a.significance, 0.0);
        assert_eq!(a.cluster_ms, 100.0);
    }

    #[test]
    fn identical_points_give_zero_f() {
        let rows = column(&[0.1; 5]);
        let a = &anova_columns(&crit(1), &rows, &[0, 0, 1, 1, 1], 2).unwrap()[0];
        assert_eq!(a.f_stat, 0.0);
        assert_eq!(a.significance, 1.0);
    }

    #[test]
    fn degenerate_designs_are_rejected() {
        let rows = column(&[1.0, 2.0, 3.0]);
        assert!(anova_columns(&crit(1), &rows, &[0, 1, 2], 3).is_err());
        assert!(anova_columns(&crit(1), &rows, &[0, 0, 0], 2).is_err());
        assert!(anova_columns(&crit(1), &rows, &[0, 0, 0], 1).is_err());
    }

    #[test]
    fn large_f_is_highly_significant() {
        let f: f64 = 22.438 / 0.0533;
        assert!(f_significance(f, 4, 15).unwrap() < 1e-10);
    }

    #[test]
    fn f_significance_edges() {
        assert_eq!(f_significance(0.0, 3, 9).unwrap(), 1.0);
        assert!((f_significance(1.0, 6, 6).unwrap() - 0.5).abs() < 1e-13);
        assert!(f_significance(42.96, 4, 15).unwrap() < 1e-7);
        assert_eq!(
            f_significance(1.0, 0, 3),
            Err(StatsError::InvalidDegrees { df1: 0, df2: 3 })
        );
    }

    #[test]
    fn kendall_extremes() {
        assert_eq!(kendalls_w(&[vec![1, 2, 3], vec![1, 2, 3]]).unwrap(), 1.0);
        assert_eq!(kendalls_w(&[vec![1, 2, 3], vec![3, 2, 1]]).unwrap(), 0.0);
        assert_eq!(kendalls_w(&[vec![1, 2]]), Err(StatsError::RaterCountTooSmall(1)));
        assert_eq!(
            kendalls_w(&[vec![1, 1, 2], vec![1, 2, 3]]),
            Err(StatsError::NonPermutation { rater: 0, n: 3 })
        );
        assert_eq!(
            kendalls_w(&[vec![1, 2, 4], vec![1, 2, 3]]),
            Err(StatsError::NonPermutation { rater: 0, n: 3 })
        );
    }

    #[test]
    fn kendall_matches_hand_computation() {
        // rank sums 5, 7, 7, 11 around m(n+1)/2 = 7.5
        let w = kendalls_w(&[vec![1, 2, 3, 4], vec![2, 1, 3, 4], vec![2, 4, 1, 3]]).unwrap();
        let s: f64 = [5.0f64, 7.0, 7.0, 11.0].iter().map(|r| (r - 7.5).powi(2)).sum();
        assert!((w - 12.0 * s / (9.0 * 60.0)).abs() < 1e-15);
    }
}
