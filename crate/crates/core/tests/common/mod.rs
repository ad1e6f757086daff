//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ehr_priority::model::{CriterionId, ItemId, RankProfile};
use ehr_priority::simplex::{LinearProgram, LpStatus, Relation, Sense};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(DATA).join(name)
}

pub fn fixture_matrix() -> ehr_priority::RatingMatrix {
    use ehr_priority::model::{aggregate_ratings, parse_ratings, CriterionSet, Format};
    let file = std::fs::File::open(data_path("ratings.csv")).unwrap();
    let records = parse_ratings(file, Format::Csv, &CriterionSet::nist()).unwrap();
    aggregate_ratings(&records, &CriterionSet::nist()).unwrap()
}

pub fn fixture_profiles() -> Vec<RankProfile> {
    use ehr_priority::model::{parse_ranks, CriterionSet, Format};
    let file = std::fs::File::open(data_path("ranks.csv")).unwrap();
    parse_ranks(file, Format::Csv, &CriterionSet::evaluation(), None).unwrap()
}

// ---------------------------------------------------------------- LP

pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

struct Hyper {
    a: Vec<f64>,
    rel: Relation,
    b: f64,
}

fn satisfied(h: &Hyper, x: &[f64], tol: f64) -> bool {
    let lhs: f64 = h.a.iter().zip(x).map(|(a, x)| a * x).sum();
    match h.rel {
        Relation::Le => lhs <= h.b + tol,
        Relation::Ge => lhs >= h.b - tol,
        Relation::Eq => (lhs - h.b).abs() <= tol,
    }
}

/// Depth-first enumeration of n-subsets of hyperplanes with incremental
/// elimination; branches that become linearly dependent are cut.
struct Enumerator<'a> {
    all: &'a [Hyper],
    c: &'a [f64],
    n: usize,
    rows: Vec<(Vec<f64>, f64, usize)>,
    best: Option<(f64, Vec<f64>)>,
}

impl Enumerator<'_> {
    fn push(&mut self, h: usize) -> bool {
        let mut a = self.all[h].a.clone();
        let mut b = self.all[h].b;
        for (row, rb, p) in &self.rows {
            let f = a[*p] / row[*p];
            if f != 0.0 {
                for (x, r) in a.iter_mut().zip(row) {
                    *x -= f * r;
                }
                b -= f * rb;
            }
            a[*p] = 0.0;
        }
        let p = (0..self.n).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap();
        if a[p].abs() < 1e-10 {
            return false;
        }
        self.rows.push((a, b, p));
        true
    }

    fn leaf(&mut self) {
        let mut x = vec![0.0; self.n];
        for (row, b, p) in self.rows.iter().rev() {
            let s: f64 = (0..self.n).filter(|&c| c != *p).map(|c| row[c] * x[c]).sum();
            x[*p] = (b - s) / row[*p];
        }
        if !self.all.iter().all(|h| satisfied(h, &x, 1e-7)) {
            return;
        }
        let v: f64 = self.c.iter().zip(&x).map(|(c, x)| c * x).sum();
        if self.best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            self.best = Some((v, x));
        }
    }

    fn walk(&mut self, start: usize) {
        if self.rows.len() == self.n {
            self.leaf();
            return;
        }
        let need = self.n - self.rows.len();
        for h in start..self.all.len() {
            if self.all.len() - h < need {
                break;
            }
            if self.push(h) {
                self.walk(h + 1);
                self.rows.pop();
            }
        }
    }
}

/// Maximum of `c x` over the vertices of `{x >= 0, rows}`, or `None` if empty.
fn best_vertex(c: &[f64], rows: &[Hyper]) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    let mut all: Vec<Hyper> = rows
        .iter()
        .map(|h| Hyper {
            a: h.a.clone(),
            rel: h.rel,
            b: h.b,
        })
        .collect();
    for i in 0..n {
        let mut a = vec![0.0; n];
        a[i] = 1.0;
        all.push(Hyper {
            a,
            rel: Relation::Ge,
            b: 0.0,
        });
    }
    // Equalities are active at every feasible point, so when they are
    // independent every vertex has a basis that contains all of them.
    all.sort_by_key(|h| h.rel != Relation::Eq);
    let eqs = all.iter().filter(|h| h.rel == Relation::Eq).count();
    let mut e = Enumerator {
        all: &all,
        c,
        n,
        rows: Vec::new(),
        best: None,
    };
    if (0..eqs).all(|h| e.push(h)) {
        e.walk(eqs);
    } else {
        e.rows.clear();
        e.walk(0);
    }
    e.best
}

/// Exhaustive-basis oracle for programs whose variables are all `>= 0` with no
/// upper bounds. Returns the status and, when optimal, the objective value.
pub fn vertex_oracle(lp: &LinearProgram) -> (LpStatus, f64) {
    assert!(lp.bounds.iter().all(|b| b.lower == 0.0 && b.upper.is_none()));
    let sign = if lp.sense == Sense::Maximize { 1.0 } else { -1.0 };
    let c: Vec<f64> = lp.objective.iter().map(|x| sign * x).collect();
    let rows: Vec<Hyper> = lp
        .constraints
        .iter()
        .map(|k| Hyper {
            a: k.coefficients.clone(),
            rel: k.relation,
            b: k.rhs,
        })
        .collect();
    let Some((value, _)) = best_vertex(&c, &rows) else {
        return (LpStatus::Infeasible, f64::NAN);
    };
    // Unbounded iff some recession direction d >= 0, sum d = 1 improves c.
    let mut cone: Vec<Hyper> = rows
        .iter()
        .map(|h| Hyper {
            a: h.a.clone(),
            rel: h.rel,
            b: 0.0,
        })
        .collect();
    cone.push(Hyper {
        a: vec![1.0; c.len()],
        rel: Relation::Eq,
        b: 1.0,
    });
    if let Some((gain, _)) = best_vertex(&c, &cone) {
        if gain > 1e-9 {
            return (LpStatus::Unbounded, f64::NAN);
        }
    }
    (LpStatus::Optimal, sign * value)
}

/// Small integer-coefficient LP with `x >= 0`.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=8);
    let objective: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(-5..=5))).collect();
    let mut lp = if rng.gen_bool(0.5) {
        LinearProgram::maximize(objective)
    } else {
        LinearProgram::minimize(objective)
    };
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(-4..=6))).collect();
        let rel = match rng.gen_range(0..10) {
            0..=5 => Relation::Le,
            6..=8 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = f64::from(rng.gen_range(-3..=12));
        lp.add_constraint(row, rel, rhs);
    }
    lp
}

// ---------------------------------------------------------------- special functions

/// `I_x(a, b)` from its power series, `x^a (1-x)^b / (a B(a,b)) * sum t_n`,
/// using the reflection for `x > 1/2`.
pub fn beta_reg_series(a: f64, b: f64, x: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > 0.5 {
        return 1.0 - beta_reg_series(b, a, 1.0 - x);
    }
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta).exp() / a;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    while term > 1e-17 * sum {
        term *= (a + b + n) / (a + 1.0 + n) * x;
        sum += term;
        n += 1.0;
    }
    front * sum
}

/// Upper tail of F(df1, df2) through the series oracle.
pub fn f_tail_oracle(f: f64, df1: f64, df2: f64) -> f64 {
    beta_reg_series(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))
}

// ---------------------------------------------------------------- k-means

/// WCSS of a partition with a fixed evaluation order, so that equal
/// partitions always give bit-identical values.
pub fn canonical_wcss(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut members: Vec<Vec<usize>> = groups.into_values().collect();
    members.sort();
    let d = points[0].len();
    let mut total = 0.0;
    for g in members {
        let mean: Vec<f64> = (0..d)
            .map(|j| g.iter().map(|&i| points[i][j]).sum::<f64>() / g.len() as f64)
            .collect();
        for &i in &g {
            total += points[i].iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>();
        }
    }
    total
}

/// Minimum WCSS over every partition into exactly `k` non-empty groups.
pub fn brute_force_wcss(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    // restricted growth strings enumerate each set partition once
    fn rec(i: usize, used: usize, k: usize, labels: &mut Vec<usize>, points: &[Vec<f64>], best: &mut f64) {
        if i == labels.len() {
            if used == k {
                *best = best.min(canonical_wcss(points, labels));
            }
            return;
        }
        let remaining = labels.len() - i;
        if used + remaining < k {
            return;
        }
        for l in 0..=used.min(k - 1) {
            labels[i] = l;
            rec(i + 1, used.max(l + 1), k, labels, points, best);
        }
    }
    rec(0, 0, k, &mut labels, points, &mut best);
    best
}

// ---------------------------------------------------------------- PCA

/// Leading eigenpair by power iteration.
pub fn power_iteration(m: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = m.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (0.0, v);
        }
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        lambda = norm;
        if diff < 1e-15 {
            break;
        }
    }
    (lambda, v)
}

// ---------------------------------------------------------------- rank profiles

pub fn profile(expert_id: u32, expert_rank: u32, blocks: &[(&str, u32, Vec<String>)]) -> RankProfile {
    RankProfile {
        expert_id,
        expert_rank,
        criterion_ranks: blocks.iter().map(|(c, r, _)| (CriterionId::new(*c), *r)).collect(),
        item_ranks: blocks
            .iter()
            .map(|(c, _, order)| (CriterionId::new(*c), order.iter().map(ItemId::new).collect()))
            .collect(),
    }
}

/// A random valid panel: strict permutations everywhere.
pub fn random_panel(
    rng: &mut ChaCha8Rng,
    experts: usize,
    criteria: usize,
    items: usize,
    equal_expert_ranks: bool,
) -> Vec<RankProfile> {
    let item_ids: Vec<String> = (1..=items).map(|i| format!("F{i}")).collect();
    let crit_ids: Vec<String> = (1..=criteria).map(|c| format!("C{c}")).collect();
    (1..=experts as u32)
        .map(|e| {
            let mut crit_order: Vec<u32> = (1..=criteria as u32).collect();
            crit_order.shuffle(rng);
            let blocks: Vec<(&str, u32, Vec<String>)> = crit_ids
                .iter()
                .zip(&crit_order)
                .map(|(c, &r)| {
                    let mut order = item_ids.clone();
                    order.shuffle(rng);
                    (c.as_str(), r, order)
                })
                .collect();
            let rank = if equal_expert_ranks { 1 } else { rng.gen_range(1..=experts as u32) };
            profile(e, rank, &blocks)
        })
        .collect()
}
