use serde::{Deserialize, Serialize};

use super::{Result, StatsError};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[i]` pairs with `values[i]`; unit length, largest-magnitude entry positive.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `1e-12` (relative to the matrix norm once that exceeds 1).
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> Result<SymmetricEigen> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let norm = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let tol = OFF_DIAGONAL_TOL * norm.max(1.0);
    let off = |a: &[Vec<f64>]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&a) < tol;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&a) < tol;
    }
    if !converged {
        return Err(StatsError::NoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut vec: Vec<f64> = v.iter().map(|row| row[i]).collect();
            let lead = vec
                .iter()
                .enumerate()
                .fold(0, |best, (k, x)| if x.abs() > vec[best].abs() { k } else { best });
            if vec[lead] < 0.0 {
                vec.iter_mut().for_each(|x| *x = -*x);
            }
            vec
        })
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// Rows projected onto the leading principal axes of their sample covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub means: Vec<f64>,
    /// All covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// The `dims` leading eigenvectors.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: f64,
    /// Projected coordinates, one row per input row.
    pub scores: Vec<Vec<f64>>,
}

pub fn pca_project(rows: &[Vec<f64>], dims: usize) -> Result<Pca> {
    if rows.len() < 2 {
        return Err(StatsError::TooFewRows);
    }
    let cols = rows[0].len();
    if dims > cols || dims == 0 {
        return Err(StatsError::DimsTooLarge { dims, cols });
    }
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..cols)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&means).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; cols]; cols];
    for i in 0..cols {
        for j in i..cols {
            let s = centered.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1.0);
            cov[i][j] = s;
            cov[j][i] = s;
        }
    }
    let eigen = jacobi_eigen(&cov)?;
    let total: f64 = eigen.values.iter().sum();
    let kept: f64 = eigen.values[..dims].iter().sum();
    let components: Vec<Vec<f64>> = eigen.vectors[..dims].to_vec();
    let scores = centered
        .iter()
        .map(|r| {
            components
                .iter()
                .map(|c| c.iter().zip(r).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(Pca {
        means,
        eigenvalues: eigen.values,
        components,
        explained_variance_ratio: if total > 0.0 { kept / total } else { 1.0 },
        scores,
    })
}
