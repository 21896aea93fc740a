//! Rank-based Mahalanobis distance.

use alloc::vec;
use alloc::vec::Vec;

use crate::stats;

/// Squared Mahalanobis distance between rank vectors.
///
/// Each covariate is replaced by its average rank over all units. The rank
/// covariance matrix is rescaled so every diagonal entry equals the variance
/// of untied ranks, which keeps heavily tied covariates from dominating.
/// Covariates with no variation are dropped.
pub(crate) struct RankMahalanobis {
    ranks: Vec<Vec<f64>>,
    inverse: Vec<Vec<f64>>,
}

impl RankMahalanobis {
    /// `columns[k][i]` is covariate `k` for unit `i`.
    pub(crate) fn new(columns: &[Vec<f64>], n: usize) -> Self {
        let mut kept: Vec<Vec<f64>> = Vec::new();
        for col in columns {
            let r = stats::average_ranks(col);
            if stats::variance(&r) > 0.0 {
                kept.push(r);
            }
        }
        let p = kept.len();
        let ranks: Vec<Vec<f64>> = (0..n).map(|i| kept.iter().map(|c| c[i]).collect()).collect();
        if p == 0 {
            return RankMahalanobis {
                ranks,
                inverse: Vec::new(),
            };
        }
        let means: Vec<f64> = kept.iter().map(|c| stats::mean(c)).collect();
        let mut cov = vec![vec![0.0; p]; p];
        for a in 0..p {
            for b in a..p {
                let s: f64 = (0..n).map(|i| (kept[a][i] - means[a]) * (kept[b][i] - means[b])).sum();
                let v = s / (n as f64 - 1.0);
                cov[a][b] = v;
                cov[b][a] = v;
            }
        }
        let untied = stats::variance(&(1..=n).map(|i| i as f64).collect::<Vec<_>>());
        let ratio: Vec<f64> = (0..p).map(|a| libm::sqrt(untied / cov[a][a])).collect();
        for a in 0..p {
            for b in 0..p {
                cov[a][b] *= ratio[a] * ratio[b];
            }
        }
        RankMahalanobis {
            ranks,
            inverse: invert(cov),
        }
    }

    pub(crate) fn distance(&self, i: usize, j: usize) -> f64 {
        let p = self.inverse.len();
        if p == 0 {
            return 0.0;
        }
        let diff: Vec<f64> = (0..p).map(|k| self.ranks[i][k] - self.ranks[j][k]).collect();
        let mut total = 0.0;
        for a in 0..p {
            let row: f64 = (0..p).map(|b| self.inverse[a][b] * diff[b]).sum();
            total += diff[a] * row;
        }
        total.max(0.0)
    }
}

/// Gauss-Jordan inverse with partial pivoting. A near-singular matrix gets a
/// small ridge added to its diagonal and is inverted again.
fn invert(m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let p = m.len();
    let trace: f64 = (0..p).map(|i| m[i][i]).sum();
    let mut ridge = 0.0;
    loop {
        let mut a = m.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += ridge;
        }
        if let Some(inv) = try_invert(a, 1e-10 * trace / p as f64) {
            return inv;
        }
        ridge = if ridge == 0.0 { 1e-6 * trace / p as f64 } else { ridge * 10.0 };
    }
}

fn try_invert(mut a: Vec<Vec<f64>>, tiny: f64) -> Option<Vec<Vec<f64>>> {
    let p = a.len();
    let mut inv: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for col in 0..p {
        let pivot = (col..p).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() <= tiny {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for k in 0..p {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..p {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for k in 0..p {
                        a[r][k] -= f * a[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    Some(inv)
}
