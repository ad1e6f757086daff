//! Lloyd's K-means with seeded Forgy initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KMeansError {
    #[error("k ({k}) exceeds the number of distinct rows ({rows})")]
    KTooLarge { k: usize, rows: usize },
    #[error("k must be at least 1")]
    KZero,
    #[error("point has {found} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no centroids given")]
    NoCentroids,
    #[error("max_iter must be at least 1")]
    NoIterations,
}

pub type Result<T, E = KMeansError> = std::result::Result<T, E>;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSolution {
    pub k: usize,
    /// Zero-based cluster index per input row. Clusters are numbered by
    /// their lowest member row.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
    /// WCSS after each update step.
    pub wcss_trajectory: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Rows drawn as initial centroids, in draw order.
    pub initial_rows: Vec<usize>,
    pub initial_centroids: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ClusterSolution {
    /// Member row indices of each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (row, &c) in self.assignments.iter().enumerate() {
            out[c].push(row);
        }
        out
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Draws `k` distinct rows uniformly without replacement.
///
/// Returns row indices in draw order; duplicate rows are represented by
/// their first occurrence.
pub fn init_centroids(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(KMeansError::KZero);
    }
    let mut distinct: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !distinct.iter().any(|&d| points[d] == *p) {
            distinct.push(i);
        }
    }
    if k > distinct.len() {
        return Err(KMeansError::KTooLarge {
            k,
            rows: distinct.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher-Yates
    for i in 0..k {
        let j = rng.gen_range(i..distinct.len());
        distinct.swap(i, j);
    }
    distinct.truncate(k);
    Ok(distinct)
}

/// Labels each point with its nearest centroid; ties go to the lower index.
pub fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<Vec<usize>> {
    let first = centroids.first().ok_or(KMeansError::NoCentroids)?;
    let d = first.len();
    if let Some(bad) = centroids.iter().chain(points).find(|p| p.len() != d) {
        return Err(KMeansError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    Ok(points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = squared_distance(p, &centroids[0]);
            for (i, c) in centroids.iter().enumerate().skip(1) {
                let dist = squared_distance(p, c);
                if dist < best_d {
                    best = i;
                    best_d = dist;
                }
            }
            best
        })
        .collect())
}

fn cluster_mean(points: &[Vec<f64>], labels: &[usize], cluster: usize) -> Option<Vec<f64>> {
    let d = points.first()?.len();
    let mut sum = vec![0.0; d];
    let mut count = 0usize;
    for (p, _) in points.iter().zip(labels).filter(|(_, &l)| l == cluster) {
        for (s, x) in sum.iter_mut().zip(p) {
            *s += x;
        }
        count += 1;
    }
    (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
}

/// Recomputes centroids as cluster means.
///
/// An empty cluster takes over the point farthest from its own centroid
/// among clusters with at least two members; `labels` is updated to match.
pub fn update_centroids(points: &[Vec<f64>], labels: &mut [usize], k: usize) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Option<Vec<f64>>> =
        (0..k).map(|c| cluster_mean(points, labels, c)).collect();
    for empty in 0..k {
        if centroids[empty].is_some() {
            continue;
        }
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let l = labels[i];
            if sizes[l] < 2 {
                continue;
            }
            let c = centroids[l].as_ref().expect("non-empty cluster has a centroid");
            let dist = squared_distance(p, c);
            if far.map_or(true, |(_, d)| dist > d) {
                far = Some((i, dist));
            }
        }
        let Some((row, _)) = far else {
            // fewer points than clusters; nothing to donate
            centroids[empty] = Some(points[0].clone());
            continue;
        };
        let donor = labels[row];
        labels[row] = empty;
        centroids[empty] = Some(points[row].clone());
        centroids[donor] = cluster_mean(points, labels, donor);
    }
    centroids.into_iter().map(|c| c.expect("filled above")).collect()
}

/// Within-cluster sum of squared distances to the given centroids.
pub fn wcss(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, &centroids[l]))
        .sum()
}

/// Runs Lloyd's algorithm from a seeded Forgy draw.
pub fn lloyd(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<ClusterSolution> {
    let rows = init_centroids(points, k, seed)?;
    let initial: Vec<Vec<f64>> = rows.iter().map(|&r| points[r].clone()).collect();
    let mut solution = lloyd_from(points, initial, max_iter)?;
    solution.initial_rows = rows;
    solution.seed = seed;
    Ok(solution)
}

/// Runs Lloyd's algorithm from explicit starting centroids.
///
/// Stops when an update leaves every centroid bit-for-bit unchanged, or
/// after `max_iter` assign/update rounds.
pub fn lloyd_from(
    points: &[Vec<f64>],
    initial_centroids: Vec<Vec<f64>>,
    max_iter: usize,
) -> Result<ClusterSolution> {
    let k = initial_centroids.len();
    if k == 0 {
        return Err(KMeansError::KZero);
    }
    if max_iter == 0 {
        return Err(KMeansError::NoIterations);
    }
    if k > points.len() {
        return Err(KMeansError::KTooLarge {
            k,
            rows: points.len(),
        });
    }
    let mut centroids = initial_centroids.clone();
    let mut labels = Vec::new();
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        labels = assign(points, &centroids)?;
        let next = update_centroids(points, &mut labels, k);
        trajectory.push(wcss(points, &labels, &next));
        iterations += 1;
        let unchanged = next == centroids;
        centroids = next;
        if unchanged {
            converged = true;
            break;
        }
    }

    // number clusters by their lowest member row
    let mut order: Vec<usize> = (0..k).collect();
    let first_member = |c: usize| labels.iter().position(|&l| l == c).unwrap_or(usize::MAX);
    order.sort_by_key(|&c| first_member(c));
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let assignments: Vec<usize> = labels.iter().map(|&l| relabel[l]).collect();
    let centroids: Vec<Vec<f64>> = order.iter().map(|&old| centroids[old].clone()).collect();

    Ok(ClusterSolution {
        k,
        wcss: *trajectory.last().expect("at least one iteration"),
        assignments,
        centroids,
        wcss_trajectory: trajectory,
        iterations,
        converged,
        initial_rows: Vec::new(),
        initial_centroids,
        seed: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterDistanceMatrix {
    pub distances: Vec<Vec<f64>>,
    /// Smallest off-diagonal entry; `None` for a single centroid.
    pub min_off_diagonal: Option<f64>,
}

pub fn center_distances(centroids: &[Vec<f64>]) -> CenterDistanceMatrix {
    let k = centroids.len();
    let mut distances = vec![vec![0.0; k]; k];
    let mut min: Option<f64> = None;
    for i in 0..k {
        for j in i + 1..k {
            let d = squared_distance(&centroids[i], &centroids[j]).sqrt();
            distances[i][j] = d;
            distances[j][i] = d;
            min = Some(min.map_or(d, |m: f64| m.min(d)));
        }
    }
    CenterDistanceMatrix {
        distances,
        min_off_diagonal: min,
    }
}

/// `sum_i |S_i| Var(S_i)` with population variance around each cluster's
/// recomputed mean.
pub fn variance_form_wcss(points: &[Vec<f64>], solution: &ClusterSolution) -> f64 {
    solution
        .members()
        .iter()
        .filter(|m| !m.is_empty())
        .map(|members| {
            let size = members.len() as f64;
            let d = points[members[0]].len();
            let mean: Vec<f64> = (0..d)
                .map(|j| members.iter().map(|&r| points[r][j]).sum::<f64>() / size)
                .collect();
            let var = members
                .iter()
                .map(|&r| squared_distance(&points[r], &mean))
                .sum::<f64>()
                / size;
            size * var
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[[f64; 2]]) -> Vec<Vec<f64>> {
        raw.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn k_equal_to_n_draws_every_row() {
        let p = pts(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]);
        let mut rows = init_centroids(&p, 4, 7).unwrap();
        rows.sort();
        assert_eq!(rows, vec![0, 1, 2, 3]);
        assert_eq!(
            init_centroids(&p, 5, 7),
            Err(KMeansError::KTooLarge { k: 5, rows: 4 })
        );
    }

    #[test]
    fn duplicate_rows_count_once() {
        let p = pts(&[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]);
        assert!(init_centroids(&p, 3, 0).is_err());
        let mut rows = init_centroids(&p, 2, 0).unwrap();
        rows.sort();
        assert_eq!(rows, vec![0, 2]);
    }

    #[test]
    fn assignment_rules() {
        let c = pts(&[[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]);
        assert_eq!(assign(&pts(&[[5.0, 5.0]]), &c).unwrap(), vec![2]);
        assert_eq!(assign(&pts(&[[1.0, 0.0]]), &c).unwrap(), vec![0]);
        assert!(matches!(
            assign(&[vec![1.0]], &c),
            Err(KMeansError::DimensionMismatch { .. })
        ));
        assert_eq!(assign(&c, &[]), Err(KMeansError::NoCentroids));
    }

    #[test]
    fn update_takes_means() {
        let p = pts(&[[0.0, 0.0], [0.0, 1.0], [4.0, 4.0]]);
        let mut labels = vec![0, 0, 1];
        let c = update_centroids(&p, &mut labels, 2);
        assert_eq!(c, pts(&[[0.0, 0.5], [4.0, 4.0]]));
    }

    #[test]
    fn empty_cluster_takes_the_farthest_point() {
        let p = pts(&[[0.0, 0.0], [1.0, 0.0], [9.0, 0.0], [20.0, 0.0]]);
        let labels = vec![0, 0, 0, 1];
        let before = {
            let c: Vec<Vec<f64>> = (0..2).map(|c| cluster_mean(&p, &labels, c).unwrap()).collect();
            wcss(&p, &labels, &c)
        };
        let mut with_empty = vec![0, 0, 0, 1];
        let c = update_centroids(&p, &mut with_empty, 3);
        assert_eq!(with_empty, vec![0, 0, 2, 1]);
        assert_eq!(c[2], vec![9.0, 0.0]);
        assert!(wcss(&p, &with_empty, &c) <= before);
    }

    #[test]
    fn two_obvious_pairs() {
        let p = pts(&[[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]]);
        for seed in 0..20 {
            let s = lloyd(&p, 2, seed, 100).unwrap();
            assert_eq!(s.assignments, vec![0, 0, 1, 1]);
            assert_eq!(s.centroids, pts(&[[0.0, 0.5], [10.0, 10.5]]));
            assert_eq!(s.wcss, 1.0);
            assert!(s.converged);
        }
    }

    #[test]
    fn k_equal_to_n_has_zero_wcss() {
        let p = pts(&[[0.0, 0.0], [3.0, 1.0], [7.0, 2.0]]);
        let s = lloyd(&p, 3, 1, 100).unwrap();
        assert_eq!(s.wcss_trajectory[0], 0.0);
        assert_eq!(s.wcss, 0.0);
    }

    #[test]
    fn distances_between_centers() {
        let d = center_distances(&pts(&[[0.0, 0.0], [3.0, 4.0]]));
        assert_eq!(d.distances, vec![vec![0.0, 5.0], vec![5.0, 0.0]]);
        assert_eq!(d.min_off_diagonal, Some(5.0));
        let same = center_distances(&pts(&[[1.0, 1.0], [1.0, 1.0]]));
        assert_eq!(same.distances[0][1], 0.0);
        assert_eq!(center_distances(&pts(&[[1.0, 1.0]])).min_off_diagonal, None);
    }

    #[test]
    fn variance_form_hand_cases() {
        let p = vec![vec![0.0], vec![2.0]];
        let two = lloyd_from(&p, vec![vec![1.0]], 10).unwrap();
        assert_eq!(variance_form_wcss(&p, &two), 2.0);
        assert_eq!(two.wcss, 2.0);
        let singletons = lloyd_from(&p, p.clone(), 10).unwrap();
        assert_eq!(variance_form_wcss(&p, &singletons), 0.0);
    }
}
