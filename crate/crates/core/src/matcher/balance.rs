//! Standardized differences and permutation p-values, before and after
//! matching.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::CovariateValue;
use crate::stats;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const PERMUTATION_DRAWS: usize = 10_000;

/// One covariate row, in the order covariate, before std diff, before p,
/// after std diff, after p.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BalanceRow {
    pub covariate: String,
    /// Nominal rows report the category indicator with the largest absolute
    /// standardized difference.
    pub category: Option<String>,
    pub before_std_diff: f64,
    pub before_p: f64,
    pub after_std_diff: f64,
    pub after_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BalanceReport {
    pub stage: String,
    pub rows: Vec<BalanceRow>,
    pub diagnostics: Vec<String>,
}

impl BalanceReport {
    pub fn row(&self, covariate: &str) -> Option<&BalanceRow> {
        self.rows.iter().find(|r| r.covariate == covariate)
    }
}

/// `sqrt((var_a + var_b) / 2)` with `n - 1` variances.
pub fn pooled_sd(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(0.5 * (stats::variance(a) + stats::variance(b)))
}

/// `(mean_a - mean_b) / scale`. A zero scale gives 0 for equal means and
/// signed infinity otherwise.
pub fn standardized_difference(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let gap = stats::mean(a) - stats::mean(b);
    if scale > 0.0 {
        gap / scale
    } else if gap == 0.0 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    }
}

/// Two-sample permutation p-value for `statistic(first n_a of pooled)`.
/// Uses `(1 + hits) / (1 + draws)`.
fn permutation_p<F>(pooled: &[usize], n_a: usize, observed: f64, mut statistic: F, rng: &mut ChaCha8Rng) -> f64
where
    F: FnMut(&[usize]) -> f64,
{
    if n_a == 0 || n_a == pooled.len() {
        return 1.0;
    }
    let mut work = pooled.to_vec();
    let mut hits = 0usize;
    let cut = observed - 1e-12 * (1.0 + observed.abs());
    for _ in 0..PERMUTATION_DRAWS {
        for i in 0..n_a {
            let j = rng.random_range(i..work.len());
            work.swap(i, j);
        }
        if statistic(&work[..n_a]) >= cut {
            hits += 1;
        }
    }
    (1 + hits) as f64 / (1 + PERMUTATION_DRAWS) as f64
}

fn real_row(
    name: &str,
    before: (&[f64], &[f64]),
    after: (&[f64], &[f64]),
    rng: &mut ChaCha8Rng,
    diagnostics: &mut Vec<String>,
) -> BalanceRow {
    let scale = pooled_sd(before.0, before.1);
    let sd = |a: &[f64], b: &[f64]| standardized_difference(a, b, scale);
    let p = |a: &[f64], b: &[f64], rng: &mut ChaCha8Rng| {
        let values: Vec<f64> = a.iter().chain(b).copied().collect();
        let total: f64 = values.iter().sum();
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let gap = |idx: &[usize]| {
            let sa: f64 = idx.iter().map(|&i| values[i]).sum();
            (sa / na - (total - sa) / nb).abs()
        };
        let all: Vec<usize> = (0..values.len()).collect();
        let obs = gap(&all[..a.len()]);
        permutation_p(&all, a.len(), obs, gap, rng)
    };
    let row = BalanceRow {
        covariate: name.into(),
        category: None,
        before_std_diff: sd(before.0, before.1),
        before_p: p(before.0, before.1, rng),
        after_std_diff: sd(after.0, after.1),
        after_p: p(after.0, after.1, rng),
    };
    if scale == 0.0 && (row.before_std_diff.is_infinite() || row.after_std_diff.is_infinite()) {
        diagnostics.push(format!(
            "{name}: pooled standard deviation is zero but group means differ; standardized difference reported as infinite"
        ));
    }
    row
}

fn category_row(
    name: &str,
    before: (&[&str], &[&str]),
    after: (&[&str], &[&str]),
    rng: &mut ChaCha8Rng,
) -> BalanceRow {
    let cats: Vec<String> = before
        .0
        .iter()
        .chain(before.1)
        .chain(after.0)
        .chain(after.1)
        .map(|s| String::from(*s))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let indicator = |xs: &[&str], c: &str| xs.iter().map(|x| if *x == c { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let scales: Vec<f64> = cats
        .iter()
        .map(|c| pooled_sd(&indicator(before.0, c), &indicator(before.1, c)))
        .collect();

    // largest absolute indicator standardized difference, keeping its sign
    let widest = |a: &[&str], b: &[&str]| -> (f64, usize) {
        let mut best = (0.0f64, 0usize);
        for (k, c) in cats.iter().enumerate() {
            let v = standardized_difference(&indicator(a, c), &indicator(b, c), scales[k]);
            if v.abs() > best.0.abs() {
                best = (v, k);
            }
        }
        best
    };
    let p = |a: &[&str], b: &[&str], rng: &mut ChaCha8Rng| {
        let codes: Vec<usize> = a
            .iter()
            .chain(b)
            .map(|x| cats.iter().position(|c| c == x).unwrap_or(0))
            .collect();
        let totals = codes.iter().fold(alloc::vec![0usize; cats.len()], |mut acc, &c| {
            acc[c] += 1;
            acc
        });
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let stat = |idx: &[usize]| {
            let mut counts = alloc::vec![0usize; cats.len()];
            for &i in idx {
                counts[codes[i]] += 1;
            }
            let mut best = 0.0f64;
            for k in 0..cats.len() {
                let gap = counts[k] as f64 / na - (totals[k] - counts[k]) as f64 / nb;
                let v = if scales[k] > 0.0 {
                    (gap / scales[k]).abs()
                } else if gap != 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                best = best.max(v);
            }
            best
        };
        let all: Vec<usize> = (0..codes.len()).collect();
        let obs = stat(&all[..a.len()]);
        permutation_p(&all, a.len(), obs, stat, rng)
    };
    let (b_sd, b_k) = widest(before.0, before.1);
    let (a_sd, _) = widest(after.0, after.1);
    BalanceRow {
        covariate: name.into(),
        category: cats.get(b_k).cloned(),
        before_std_diff: b_sd,
        before_p: p(before.0, before.1, rng),
        after_std_diff: a_sd,
        after_p: p(after.0, after.1, rng),
    }
}

type Covariates = BTreeMap<String, CovariateValue>;

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// Builds a report over every covariate of the first before-group unit.
/// Pooled standard deviations come from the before groups.
pub(crate) fn build_report(
    stage: &str,
    before: (&[&Covariates], &[&Covariates]),
    after: (&[&Covariates], &[&Covariates]),
    seed: u64,
) -> BalanceReport {
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let schema: Vec<(String, bool)> = before
        .0
        .iter()
        .chain(before.1)
        .next()
        .map(|c| c.iter().map(|(k, v)| (k.clone(), matches!(v, CovariateValue::Real(_)))).collect())
        .unwrap_or_default();
    for (k, (name, is_real)) in schema.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        if is_real {
            let col = |g: &[&Covariates]| -> Vec<f64> {
                g.iter().filter_map(|c| c.get(&name).and_then(CovariateValue::as_real)).collect()
            };
            let (ba, bb, aa, ab) = (col(before.0), col(before.1), col(after.0), col(after.1));
            rows.push(real_row(&name, (&ba, &bb), (&aa, &ab), &mut rng, &mut diagnostics));
        } else {
            let col = |g: &[&Covariates]| -> Vec<String> {
                g.iter()
                    .filter_map(|c| c.get(&name).and_then(CovariateValue::as_category).map(String::from))
                    .collect()
            };
            let (ba, bb, aa, ab) = (col(before.0), col(before.1), col(after.0), col(after.1));
            rows.push(category_row(
                &name,
                (&refs(&ba), &refs(&bb)),
                (&refs(&aa), &refs(&ab)),
                &mut rng,
            ));
        }
    }
    BalanceReport {
        stage: stage.into(),
        rows,
        diagnostics,
    }
}
