//! Uncertainty intervals from per-expert solves, and sensitivity of the factor
//! ranking to dropping an expert or swapping adjacent ranks.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CriterionId, ItemId, RankProfile};
use crate::opa::{rank_weights, solve_opa, OpaError, WeightSolution, TIE_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustnessError {
    #[error("insufficient panel: {0}")]
    InsufficientPanel(String),
    #[error(transparent)]
    Opa(#[from] OpaError),
}

pub type Result<T, E = RobustnessError> = std::result::Result<T, E>;

/// Slack on the `delta <= threshold` test, so a boundary case computed as
/// `0.5000000000000001` still passes.
pub const VERDICT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertWeights {
    pub factor_weights: BTreeMap<ItemId, f64>,
    pub criterion_weights: BTreeMap<CriterionId, f64>,
}

/// Solves OPA once per expert on the singleton panel.
pub fn per_expert_weights(profiles: &[RankProfile]) -> Result<BTreeMap<u32, ExpertWeights>> {
    if profiles.len() < 2 {
        return Err(RobustnessError::InsufficientPanel(format!(
            "per-expert intervals need at least 2 experts, got {}",
            profiles.len()
        )));
    }
    profiles
        .iter()
        .map(|p| {
            let s = solve_opa(std::slice::from_ref(p))?;
            Ok((
                p.expert_id,
                ExpertWeights {
                    factor_weights: s.factor_weights,
                    criterion_weights: s.criterion_weights,
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Criterion,
    Factor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "OK",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRow {
    pub kind: WeightKind,
    pub item: String,
    pub lower: f64,
    pub upper: f64,
    /// Full-panel weight.
    pub point: f64,
    pub delta: f64,
    /// Population standard deviation of the per-expert weights.
    pub sigma: f64,
    /// `None` when the point weight is zero.
    pub cv_percent: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// `100 * sigma / point`, absent for a zero point weight.
pub fn coefficient_of_variation(sigma: f64, point: f64) -> Option<f64> {
    (point != 0.0).then(|| 100.0 * sigma / point)
}

pub fn verdict(delta: f64, threshold: f64) -> Verdict {
    if delta <= threshold + VERDICT_SLACK {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// One row from the per-expert samples of a single weight.
pub fn summarize_interval(
    kind: WeightKind,
    item: impl Into<String>,
    samples: &[f64],
    point: f64,
    threshold: f64,
) -> UncertaintyRow {
    let lower = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sigma = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let delta = upper - lower;
    UncertaintyRow {
        kind,
        item: item.into(),
        lower,
        upper,
        point,
        delta,
        sigma,
        cv_percent: coefficient_of_variation(sigma, point),
        threshold,
        verdict: verdict(delta, threshold),
    }
}

/// Criterion rows first, then factor rows. The threshold defaults to one over
/// the number of weights in the group.
pub fn uncertainty_table(
    profiles: &[RankProfile],
    panel: &WeightSolution,
    threshold_override: Option<f64>,
) -> Result<Vec<UncertaintyRow>> {
    let per_expert = per_expert_weights(profiles)?;
    let mut rows = Vec::new();
    let t = threshold_override.unwrap_or(1.0 / panel.criterion_weights.len() as f64);
    for (c, &point) in &panel.criterion_weights {
        let samples: Vec<f64> = per_expert.values().map(|w| w.criterion_weights[c]).collect();
        rows.push(summarize_interval(WeightKind::Criterion, c.as_str(), &samples, point, t));
    }
    let t = threshold_override.unwrap_or(1.0 / panel.factor_weights.len() as f64);
    for (k, &point) in &panel.factor_weights {
        let samples: Vec<f64> = per_expert.values().map(|w| w.factor_weights[k]).collect();
        rows.push(summarize_interval(WeightKind::Factor, k.as_str(), &samples, point, t));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivityMode {
    LeaveOneOut,
    AdjacentSwap,
    #[default]
    Both,
}

impl SensitivityMode {
    fn leave_one_out(self) -> bool {
        matches!(self, SensitivityMode::LeaveOneOut | SensitivityMode::Both)
    }

    fn adjacent_swap(self) -> bool {
        matches!(self, SensitivityMode::AdjacentSwap | SensitivityMode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ScenarioKey {
    /// The panel without this expert.
    Drop { expert: u32 },
    /// One expert's items at ranks `position` and `position + 1` exchanged.
    Swap { expert: u32, criterion: CriterionId, position: usize },
}

impl fmt::Display for ScenarioKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKey::Drop { expert } => write!(f, "drop expert {expert}"),
            ScenarioKey::Swap {
                expert,
                criterion,
                position,
            } => write!(
                f,
                "expert {expert} swaps {criterion} ranks {position}-{}",
                position + 1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub key: ScenarioKey,
    pub label: String,
    pub factor_weights: BTreeMap<ItemId, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub min: f64,
    pub max: f64,
    pub point: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub mode: SensitivityMode,
    /// Sorted by key.
    pub scenarios: Vec<Scenario>,
    /// Over all scenarios and the baseline.
    pub envelope: BTreeMap<ItemId, Envelope>,
    pub rank_stable: bool,
    /// `(a, b)` where the baseline puts `a` above `b` and some scenario reverses them.
    pub changed_pairs: Vec<(ItemId, ItemId)>,
}

fn scenario_profiles(profiles: &[RankProfile], key: &ScenarioKey) -> Vec<RankProfile> {
    match key {
        ScenarioKey::Drop { expert } => profiles.iter().filter(|p| p.expert_id != *expert).cloned().collect(),
        ScenarioKey::Swap {
            expert,
            criterion,
            position,
        } => {
            let mut out = profiles.to_vec();
            let p = out.iter_mut().find(|p| p.expert_id == *expert).expect("key built from profiles");
            p.item_ranks
                .get_mut(criterion)
                .expect("key built from profiles")
                .swap(position - 1, *position);
            out
        }
    }
}

pub fn scenario_keys(profiles: &[RankProfile], mode: SensitivityMode) -> Result<Vec<ScenarioKey>> {
    let mut keys = Vec::new();
    if mode.leave_one_out() {
        if profiles.len() < 2 {
            return Err(RobustnessError::InsufficientPanel(format!(
                "leave-one-out needs at least 2 experts, got {}",
                profiles.len()
            )));
        }
        keys.extend(profiles.iter().map(|p| ScenarioKey::Drop { expert: p.expert_id }));
    }
    if mode.adjacent_swap() {
        let items = profiles.first().map_or(0, |p| p.items().len());
        if items < 2 {
            return Err(RobustnessError::InsufficientPanel(format!(
                "adjacent-swap needs at least 2 items, got {items}"
            )));
        }
        for p in profiles {
            for (c, order) in &p.item_ranks {
                keys.extend((1..order.len()).map(|position| ScenarioKey::Swap {
                    expert: p.expert_id,
                    criterion: c.clone(),
                    position,
                }));
            }
        }
    }
    keys.sort();
    Ok(keys)
}

pub fn sensitivity_analysis(
    profiles: &[RankProfile],
    mode: SensitivityMode,
    execution: Execution,
) -> Result<SensitivityReport> {
    let baseline = solve_opa(profiles)?;
    let keys = scenario_keys(profiles, mode)?;
    let run = |key: &ScenarioKey| -> Result<Scenario> {
        let s = solve_opa(&scenario_profiles(profiles, key))?;
        Ok(Scenario {
            label: key.to_string(),
            key: key.clone(),
            factor_weights: s.factor_weights,
        })
    };
    let mut scenarios: Vec<Scenario> = match execution {
        Execution::Sequential => keys.iter().map(run).collect::<Result<_>>()?,
        Execution::Parallel => keys.par_iter().map(run).collect::<Result<_>>()?,
    };
    scenarios.sort_by(|a, b| a.key.cmp(&b.key));

    let envelope = baseline
        .factor_weights
        .iter()
        .map(|(item, &point)| {
            let (min, max) = scenarios.iter().fold((point, point), |(lo, hi), s| {
                let w = s.factor_weights[item];
                (lo.min(w), hi.max(w))
            });
            (item.clone(), Envelope { min, max, point })
        })
        .collect();

    let order: Vec<ItemId> = rank_weights(&baseline.factor_weights).into_iter().map(|r| r.item).collect();
    let mut changed_pairs = Vec::new();
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            let (wa, wb) = (baseline.factor_weights[a], baseline.factor_weights[b]);
            if wa - wb <= TIE_TOLERANCE {
                continue;
            }
            let flipped = scenarios
                .iter()
                .any(|s| s.factor_weights[b] - s.factor_weights[a] > TIE_TOLERANCE);
            if flipped {
                changed_pairs.push((a.clone(), b.clone()));
            }
        }
    }
    Ok(SensitivityReport {
        mode,
        scenarios,
        envelope,
        rank_stable: changed_pairs.is_empty(),
        changed_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(expert_id: u32, order: &[&str]) -> RankProfile {
        RankProfile {
            expert_id,
            expert_rank: 1,
            criterion_ranks: [(CriterionId::new("C"), 1)].into_iter().collect(),
            item_ranks: [(CriterionId::new("C"), order.iter().map(|&i| ItemId::new(i)).collect())]
                .into_iter()
                .collect(),
        }
    }

    #[test]
    fn reversed_pair_intervals() {
        let panel = [profile(1, &["a", "b"]), profile(2, &["b", "a"])];
        let per = per_expert_weights(&panel).unwrap();
        assert!((per[&1].factor_weights[&ItemId::new("a")] - 0.75).abs() < 1e-9);
        assert!((per[&2].factor_weights[&ItemId::new("a")] - 0.25).abs() < 1e-9);

        let solution = solve_opa(&panel).unwrap();
        let rows = uncertainty_table(&panel, &solution, None).unwrap();
        let a = rows.iter().find(|r| r.kind == WeightKind::Factor && r.item == "a").unwrap();
        assert!((a.lower - 0.25).abs() < 1e-9 && (a.upper - 0.75).abs() < 1e-9);
        assert!((a.delta - 0.5).abs() < 1e-9);
        assert_eq!(a.threshold, 0.5);
        assert_eq!(a.verdict, Verdict::Pass);
        assert!((a.sigma - 0.25).abs() < 1e-9);
    }

    #[test]
    fn identical_panel_has_no_spread() {
        let panel = [profile(1, &["a", "b", "c"]), profile(2, &["a", "b", "c"]), profile(3, &["a", "b", "c"])];
        let solution = solve_opa(&panel).unwrap();
        for row in uncertainty_table(&panel, &solution, None).unwrap() {
            assert!(row.delta.abs() < 1e-12 && row.sigma.abs() < 1e-12);
            assert_eq!(row.verdict, Verdict::Pass);
        }
        let report = sensitivity_analysis(&panel, SensitivityMode::LeaveOneOut, Execution::Sequential).unwrap();
        assert!(report.rank_stable);
        for s in &report.scenarios {
            for (item, w) in &s.factor_weights {
                assert!((w - solution.factor_weights[item]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cv_is_absent_for_zero_weight() {
        assert_eq!(coefficient_of_variation(0.1, 0.0), None);
        assert!((coefficient_of_variation(0.05, 0.22).unwrap() - 22.727).abs() < 1e-3);
    }

    #[test]
    fn single_expert_is_insufficient() {
        let panel = [profile(1, &["a", "b"])];
        assert!(matches!(
            sensitivity_analysis(&panel, SensitivityMode::LeaveOneOut, Execution::Sequential),
            Err(RobustnessError::InsufficientPanel(_))
        ));
        let swap = sensitivity_analysis(&panel, SensitivityMode::AdjacentSwap, Execution::Sequential).unwrap();
        assert_eq!(swap.scenarios.len(), 1);
        assert_eq!(swap.changed_pairs, vec![(ItemId::new("a"), ItemId::new("b"))]);
        assert!(!swap.rank_stable);
    }

    #[test]
    fn execution_order_does_not_matter() {
        let panel = [
            profile(1, &["a", "b", "c", "d"]),
            profile(2, &["b", "a", "c", "d"]),
            profile(3, &["a", "c", "b", "d"]),
        ];
        let seq = sensitivity_analysis(&panel, SensitivityMode::Both, Execution::Sequential).unwrap();
        let par = sensitivity_analysis(&panel, SensitivityMode::Both, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.scenarios.len(), 3 + 3 * 3);
        for (item, e) in &seq.envelope {
            assert!(e.min <= e.point && e.point <= e.max, "{item}");
        }
    }
}
