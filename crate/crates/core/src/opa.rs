//! Ordinal Priority Approach: ordinal expert, criterion and item ranks in,
//! cardinal weights out, via one max-Z linear program.
//!
//! For expert `i`, criterion `j` and the items ordered by that expert under
//! that criterion, the program requires
//!
//! ```text
//! Z <= r_i * r_j * r * (W[rank r] - W[rank r + 1])   for r = 1..m-1
//! Z <= r_i * r_j * m * W[rank m]
//! sum W = 1, W >= 0
//! ```
//!
//! and maximizes `Z`. Factor, criterion and expert weights are marginals of
//! the optimal `W` tensor.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CriterionId, ItemId, ModelError, RankProfile};
use crate::simplex::{self, Bound, LinearProgram, LpStatus, Relation, SimplexError, Tolerances};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpaError {
    #[error("no rank profiles")]
    Empty,
    #[error("inconsistent profiles: {0}")]
    InconsistentProfiles(String),
    #[error(transparent)]
    InvalidProfile(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SimplexError),
    #[error("OPA program reported {0:?}; valid rankings always admit an optimum")]
    UnexpectedStatus(LpStatus),
}

pub type Result<T, E = OpaError> = std::result::Result<T, E>;

/// Domain of the objective variable `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZDomain {
    /// `Z >= 0`; the optimum is positive for any valid input, so this cut is inactive.
    #[default]
    NonNegative,
    /// Unrestricted, solved through a variable split.
    Free,
}

/// An OPA program together with the index layout of its `W` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct OpaModel {
    pub lp: LinearProgram,
    pub experts: Vec<RankedExpert>,
    pub criteria: Vec<CriterionId>,
    pub items: Vec<ItemId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedExpert {
    pub id: u32,
    pub rank: u32,
}

impl OpaModel {
    /// Column of `W[expert, criterion, item]`; column 0 is `Z`.
    pub fn var(&self, expert: usize, criterion: usize, item: usize) -> usize {
        1 + (expert * self.criteria.len() + criterion) * self.items.len() + item
    }

    pub fn num_weights(&self) -> usize {
        self.experts.len() * self.criteria.len() * self.items.len()
    }
}

pub fn build_opa_lp(profiles: &[RankProfile]) -> Result<OpaModel> {
    build_opa_lp_with(profiles, ZDomain::NonNegative)
}

pub fn build_opa_lp_with(profiles: &[RankProfile], z: ZDomain) -> Result<OpaModel> {
    let first = profiles.first().ok_or(OpaError::Empty)?;
    let criteria: Vec<CriterionId> = first.criterion_ranks.keys().cloned().collect();
    let item_set = first.items();
    let mut seen = BTreeSet::new();
    for p in profiles {
        p.validate()?;
        if !seen.insert(p.expert_id) {
            return Err(OpaError::InconsistentProfiles(format!(
                "expert {} appears twice",
                p.expert_id
            )));
        }
        if !p.criterion_ranks.keys().eq(criteria.iter()) {
            return Err(OpaError::InconsistentProfiles(format!(
                "expert {} ranks a different criterion set",
                p.expert_id
            )));
        }
        if p.items() != item_set {
            return Err(OpaError::InconsistentProfiles(format!(
                "expert {} ranks a different item set",
                p.expert_id
            )));
        }
    }
    let mut sorted: Vec<&RankProfile> = profiles.iter().collect();
    sorted.sort_by_key(|p| p.expert_id);
    let experts: Vec<RankedExpert> = sorted
        .iter()
        .map(|p| RankedExpert {
            id: p.expert_id,
            rank: p.expert_rank,
        })
        .collect();
    let items: Vec<ItemId> = item_set.into_iter().collect();
    let item_index: BTreeMap<ItemId, usize> = items.iter().enumerate().map(|(k, it)| (it.clone(), k)).collect();

    let mut model = OpaModel {
        lp: LinearProgram::maximize(Vec::new()),
        experts,
        criteria,
        items,
    };
    let n_vars = 1 + model.num_weights();
    let mut objective = vec![0.0; n_vars];
    objective[0] = 1.0;
    let mut names = vec!["Z".to_string(); n_vars];
    for (e, ex) in model.experts.iter().enumerate() {
        for (c, crit) in model.criteria.iter().enumerate() {
            for (k, item) in model.items.iter().enumerate() {
                names[model.var(e, c, k)] = format!("W[e{},{},{}]", ex.id, crit, item);
            }
        }
    }
    let mut lp = LinearProgram::maximize(objective).with_names(names);
    if z == ZDomain::Free {
        lp = lp.with_bound(0, Bound::FREE);
    }

    for (e, profile) in sorted.iter().enumerate() {
        let r_i = f64::from(profile.expert_rank);
        for (c, crit) in model.criteria.iter().enumerate() {
            let r_j = f64::from(profile.criterion_ranks[crit]);
            let order: Vec<usize> = profile.item_ranks[crit]
                .iter()
                .map(|it| model.var(e, c, item_index[it]))
                .collect();
            let m = order.len();
            for r in 1..m {
                let factor = r_i * r_j * r as f64;
                let mut row = vec![0.0; n_vars];
                row[0] = 1.0;
                row[order[r - 1]] = -factor;
                row[order[r]] = factor;
                lp.add_constraint(row, Relation::Le, 0.0);
            }
            let mut row = vec![0.0; n_vars];
            row[0] = 1.0;
            row[order[m - 1]] = -(r_i * r_j * m as f64);
            lp.add_constraint(row, Relation::Le, 0.0);
        }
    }
    let mut total = vec![1.0; n_vars];
    total[0] = 0.0;
    lp.add_constraint(total, Relation::Eq, 1.0);
    model.lp = lp;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub experts: Vec<RankedExpert>,
    pub criteria: Vec<CriterionId>,
    pub items: Vec<ItemId>,
    /// `W[expert, criterion, item]`, flattened expert-major.
    pub w: Vec<f64>,
    pub z: f64,
    pub factor_weights: BTreeMap<ItemId, f64>,
    pub criterion_weights: BTreeMap<CriterionId, f64>,
    pub expert_weights: BTreeMap<u32, f64>,
    pub iterations: usize,
}

impl WeightSolution {
    pub fn weight(&self, expert: usize, criterion: usize, item: usize) -> f64 {
        self.w[(expert * self.criteria.len() + criterion) * self.items.len() + item]
    }
}

pub fn solve_opa(profiles: &[RankProfile]) -> Result<WeightSolution> {
    solve_opa_with(profiles, ZDomain::NonNegative, &Tolerances::default())
}

pub fn solve_opa_with(profiles: &[RankProfile], z: ZDomain, tol: &Tolerances) -> Result<WeightSolution> {
    let model = build_opa_lp_with(profiles, z)?;
    let solution = simplex::solve_with(&model.lp, tol)?;
    if solution.status != LpStatus::Optimal {
        return Err(OpaError::UnexpectedStatus(solution.status));
    }
    let w: Vec<f64> = solution.x[1..].to_vec();
    let (ne, nc, ni) = (model.experts.len(), model.criteria.len(), model.items.len());
    let mut factor = vec![0.0; ni];
    let mut criterion = vec![0.0; nc];
    let mut expert = vec![0.0; ne];
    for e in 0..ne {
        for c in 0..nc {
            for k in 0..ni {
                let v = w[(e * nc + c) * ni + k];
                factor[k] += v;
                criterion[c] += v;
                expert[e] += v;
            }
        }
    }
    Ok(WeightSolution {
        factor_weights: model.items.iter().cloned().zip(factor).collect(),
        criterion_weights: model.criteria.iter().cloned().zip(criterion).collect(),
        expert_weights: model.experts.iter().map(|e| e.id).zip(expert).collect(),
        experts: model.experts,
        criteria: model.criteria,
        items: model.items,
        w,
        z: solution.x[0],
        iterations: solution.iterations,
    })
}

/// Weights closer than this are reported as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub item: ItemId,
    pub weight: f64,
    /// Set when the weight ties a neighbour in the ordering.
    pub tied: bool,
}

pub fn rank_items(solution: &WeightSolution) -> Vec<RankedItem> {
    rank_weights(&solution.factor_weights)
}

/// Sorts by weight descending, then id ascending, flagging ties.
pub fn rank_weights(weights: &BTreeMap<ItemId, f64>) -> Vec<RankedItem> {
    let mut ranked: Vec<RankedItem> = weights
        .iter()
        .map(|(item, &weight)| RankedItem {
            item: item.clone(),
            weight,
            tied: false,
        })
        .collect();
    ranked.sort_by(|a, b| {
        let tie = (a.weight - b.weight).abs() <= TIE_TOLERANCE;
        if tie {
            a.item.cmp(&b.item)
        } else {
            b.weight.total_cmp(&a.weight)
        }
    });
    for i in 1..ranked.len() {
        if (ranked[i - 1].weight - ranked[i].weight).abs() <= TIE_TOLERANCE {
            ranked[i - 1].tied = true;
            ranked[i].tied = true;
        }
    }
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn profile(expert_id: u32, expert_rank: u32, blocks: &[(&str, u32, &[&str])]) -> RankProfile {
        RankProfile {
            expert_id,
            expert_rank,
            criterion_ranks: blocks.iter().map(|(c, r, _)| (CriterionId::new(*c), *r)).collect(),
            item_ranks: blocks
                .iter()
                .map(|(c, _, order)| (CriterionId::new(*c), order.iter().map(|&i| ItemId::new(i)).collect()))
                .collect(),
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9
    }

    #[test]
    fn structure_of_a_single_block() {
        let m = build_opa_lp(&[profile(1, 1, &[("C", 1, &["a", "b", "c"])])]).unwrap();
        assert_eq!(m.lp.num_vars(), 4);
        let ordinal = m.lp.constraints.iter().filter(|c| c.relation == Relation::Le).count();
        let equal = m.lp.constraints.iter().filter(|c| c.relation == Relation::Eq).count();
        assert_eq!((ordinal, equal), (3, 1));
    }

    #[test]
    fn two_items_closed_form() {
        let s = solve_opa(&[profile(1, 1, &[("C", 1, &["a", "b"])])]).unwrap();
        assert!(close(s.factor_weights[&ItemId::new("a")], 0.75));
        assert!(close(s.factor_weights[&ItemId::new("b")], 0.25));
        assert!(close(s.z, 0.5));
    }

    #[test]
    fn three_items_closed_form() {
        let s = solve_opa(&[profile(1, 1, &[("C", 1, &["a", "b", "c"])])]).unwrap();
        assert!(close(s.factor_weights[&ItemId::new("a")], 11.0 / 18.0));
        assert!(close(s.factor_weights[&ItemId::new("b")], 5.0 / 18.0));
        assert!(close(s.factor_weights[&ItemId::new("c")], 2.0 / 18.0));
        assert!(close(s.z, 1.0 / 3.0));
    }

    #[test]
    fn single_item_takes_all_weight() {
        let s = solve_opa(&[profile(1, 1, &[("C", 1, &["a"])])]).unwrap();
        assert!(close(s.factor_weights[&ItemId::new("a")], 1.0));
    }

    #[test]
    fn reversed_pair_is_symmetric() {
        let s = solve_opa(&[
            profile(1, 1, &[("C", 1, &["a", "b"])]),
            profile(2, 1, &[("C", 1, &["b", "a"])]),
        ])
        .unwrap();
        assert!(close(s.factor_weights[&ItemId::new("a")], 0.5));
        assert!(close(s.factor_weights[&ItemId::new("b")], 0.5));
    }

    #[test]
    fn mismatched_item_sets_are_inconsistent() {
        let err = build_opa_lp(&[
            profile(1, 1, &[("C", 1, &["a", "b"])]),
            profile(2, 1, &[("C", 1, &["a", "c"])]),
        ])
        .unwrap_err();
        assert!(matches!(err, OpaError::InconsistentProfiles(_)));
        let err = build_opa_lp(&[
            profile(1, 1, &[("C", 1, &["a", "b"])]),
            profile(2, 1, &[("D", 1, &["a", "b"])]),
        ])
        .unwrap_err();
        assert!(matches!(err, OpaError::InconsistentProfiles(_)));
        assert_eq!(build_opa_lp(&[]), Err(OpaError::Empty));
    }

    #[test]
    fn ranking_flags_ties() {
        let weights: BTreeMap<ItemId, f64> = [("F1", 0.34), ("F2", 0.18), ("F3", 0.08), ("F4", 0.08), ("F5", 0.32)]
            .iter()
            .map(|&(i, w)| (ItemId::new(i), w))
            .collect();
        let ranked = rank_weights(&weights);
        let order: Vec<&str> = ranked.iter().map(|r| r.item.as_str()).collect();
        assert_eq!(order, ["F1", "F5", "F2", "F3", "F4"]);
        let tied: Vec<bool> = ranked.iter().map(|r| r.tied).collect();
        assert_eq!(tied, [false, false, false, true, true]);

        let flat: BTreeMap<ItemId, f64> = ["b", "a", "c"].iter().map(|&i| (ItemId::new(i), 0.25)).collect();
        let ranked = rank_weights(&flat);
        assert!(ranked.iter().all(|r| r.tied));
        assert_eq!(ranked[0].item.as_str(), "a");

        let one: BTreeMap<ItemId, f64> = [(ItemId::new("x"), 1.0)].into_iter().collect();
        assert_eq!(rank_weights(&one)[0].item.as_str(), "x");
        assert!(!rank_weights(&one)[0].tied);
    }
}
