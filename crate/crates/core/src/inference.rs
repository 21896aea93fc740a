//! Randomization inference on differences-in-differences contrasts.
//!
//! Statistics have the sign-score form `T = sum over positive signs of q_i`,
//! where `q_i = q(|d - tau0|)_i` is a nonnegative score that vanishes when the
//! adjusted contrast is zero. Under the null each nonzero sign is an
//! independent coin with success probability `p` (`1/2` in the absence of
//! hidden bias), so the null law of `T` is a weighted sum of Bernoulli
//! variables. It is computed exactly by dynamic programming when the scores
//! are integers after a small rescaling, by enumeration for up to twenty
//! informative quadruples, and otherwise by a normal approximation.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::model::{OutcomeKind, QuadrupleSet};
use crate::stats::{self, average_ranks};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Largest scaled integer score total handled by the dynamic program.
pub const DP_MAX_TOTAL: u64 = 1_000_000;
/// Largest number of informative quadruples handled by full enumeration.
pub const ENUMERATION_MAX: usize = 20;
const MAX_SCALE: u32 = 1000;

/// Maps magnitudes `|d_i - tau0|` to scores `q_i`.
#[derive(Clone)]
pub enum ScoreFunction {
    /// Wilcoxon signed-rank scores: average ranks of the nonzero magnitudes.
    WilcoxonRank,
    /// The magnitudes themselves (the permutational t statistic).
    AbsoluteValue,
    /// User scores; must be nonnegative. Scores at zero magnitudes are
    /// forced to zero.
    Custom(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

impl fmt::Debug for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ScoreFunction {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreFunction::WilcoxonRank => "wilcoxon signed rank",
            ScoreFunction::AbsoluteValue => "permutational t",
            ScoreFunction::Custom(_) => "custom scores",
        }
    }

    pub fn scores(&self, magnitudes: &[f64]) -> Result<Vec<f64>> {
        let mut q = match self {
            ScoreFunction::WilcoxonRank => {
                let nonzero: Vec<usize> = (0..magnitudes.len()).filter(|&i| magnitudes[i] > 0.0).collect();
                let vals: Vec<f64> = nonzero.iter().map(|&i| magnitudes[i]).collect();
                let ranks = average_ranks(&vals);
                let mut q = vec![0.0; magnitudes.len()];
                for (k, &i) in nonzero.iter().enumerate() {
                    q[i] = ranks[k];
                }
                q
            }
            ScoreFunction::AbsoluteValue => magnitudes.to_vec(),
            ScoreFunction::Custom(f) => {
                let q = f(magnitudes);
                if q.len() != magnitudes.len() {
                    return Err(Error::InvalidParameter(format!(
                        "custom score function returned {} scores for {} magnitudes",
                        q.len(),
                        magnitudes.len()
                    )));
                }
                if let Some(bad) = q.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "custom scores must be finite and nonnegative, got {bad}"
                    )));
                }
                q
            }
        };
        for (qi, &a) in q.iter_mut().zip(magnitudes) {
            if a == 0.0 {
                *qi = 0.0;
            }
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sided {
    Greater,
    Less,
    TwoSided,
}

impl Sided {
    pub fn label(self) -> &'static str {
        match self {
            Sided::Greater => "one-sided greater",
            Sided::Less => "one-sided less",
            Sided::TwoSided => "two-sided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PValue {
    Point(f64),
    Bounds { lower: f64, upper: f64 },
}

impl PValue {
    /// The point value, or the upper bound of an interval.
    pub fn upper(&self) -> f64 {
        match *self {
            PValue::Point(p) => p,
            PValue::Bounds { upper, .. } => upper,
        }
    }

    pub fn lower(&self) -> f64 {
        match *self {
            PValue::Point(p) => p,
            PValue::Bounds { lower, .. } => lower,
        }
    }
}

/// Which route produced a null distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NullMethod {
    DynamicProgram,
    Enumeration,
    Normal,
}

impl NullMethod {
    pub fn label(self) -> &'static str {
        match self {
            NullMethod::DynamicProgram => "exact (dynamic program)",
            NullMethod::Enumeration => "exact (enumeration)",
            NullMethod::Normal => "normal approximation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: PValue,
    pub method: String,
    pub sided: Sided,
    /// Quadruples with a positive score.
    pub n_effective: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EstimateResult {
    /// Point estimate; an interval when bounded under hidden bias.
    pub point: Interval,
    pub ci: Interval,
    pub method: String,
}

/// Discrete law of a sign-score sum: `(value, probability)` in increasing
/// order of value.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    pub support: Vec<(f64, f64)>,
}

impl NullDistribution {
    /// `P(T >= t)`, treating support points within a relative `1e-9` of `t`
    /// as equal to it.
    pub fn upper_tail(&self, t: f64) -> f64 {
        let cut = t - 1e-9 * (1.0 + t.abs());
        let p: f64 = self.support.iter().filter(|(v, _)| *v >= cut).map(|(_, p)| p).sum();
        p.min(1.0)
    }

    /// `P(T <= t)`.
    pub fn lower_tail(&self, t: f64) -> f64 {
        let cut = t + 1e-9 * (1.0 + t.abs());
        let p: f64 = self.support.iter().filter(|(v, _)| *v <= cut).map(|(_, p)| p).sum();
        p.min(1.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|(_, p)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|(v, p)| v * p).sum()
    }
}

/// Smallest factor that turns every score into an integer, with the scaled
/// total within the dynamic-programming budget.
fn integer_scale(scores: &[f64]) -> Option<(u32, Vec<u64>)> {
    let total: f64 = scores.iter().sum();
    'outer: for m in 1..=MAX_SCALE {
        if total * m as f64 > DP_MAX_TOTAL as f64 + 0.5 {
            return None;
        }
        let mut ints = Vec::with_capacity(scores.len());
        for &q in scores {
            let x = q * m as f64;
            let r = libm::round(x);
            if (x - r).abs() > 1e-9 * (1.0 + x.abs()) {
                continue 'outer;
            }
            ints.push(r as u64);
        }
        return Some((m, ints));
    }
    None
}

/// Exact law of `sum q_i * 1[sign_i = +]` for independent signs with
/// `P(+) = p_plus`, by dynamic programming over integer-scaled scores.
/// Returns `None` when the scores cannot be scaled within budget.
pub fn dp_null_distribution(scores: &[f64], p_plus: f64) -> Option<NullDistribution> {
    let (m, ints) = integer_scale(scores)?;
    let total: u64 = ints.iter().sum();
    let mut dist = vec![0.0f64; total as usize + 1];
    dist[0] = 1.0;
    let mut reach = 0usize;
    let q_minus = 1.0 - p_plus;
    for &k in &ints {
        let k = k as usize;
        if k == 0 {
            continue;
        }
        reach += k;
        for t in (0..=reach).rev() {
            let stay = dist[t] * q_minus;
            let moved = if t >= k { dist[t - k] * p_plus } else { 0.0 };
            dist[t] = stay + moved;
        }
    }
    let support = dist
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(t, p)| (t as f64 / m as f64, *p))
        .collect();
    Some(NullDistribution { support })
}

/// Exact law by listing all `2^n` sign vectors. `n` must not exceed
/// [`ENUMERATION_MAX`].
pub fn enumerate_null_distribution(scores: &[f64], p_plus: f64) -> Result<NullDistribution> {
    let n = scores.len();
    if n > ENUMERATION_MAX {
        return Err(Error::InvalidParameter(format!(
            "enumeration is limited to {ENUMERATION_MAX} scores, got {n}"
        )));
    }
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(1 << n);
    for mask in 0u32..(1u32 << n) {
        let mut value = 0.0;
        let mut prob = 1.0;
        for (i, &q) in scores.iter().enumerate() {
            if mask >> i & 1 == 1 {
                value += q;
                prob *= p_plus;
            } else {
                prob *= 1.0 - p_plus;
            }
        }
        points.push((value, prob));
    }
    Ok(NullDistribution {
        support: merge_support(points),
    })
}

pub(crate) fn merge_support(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (v, p) in points {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= 1e-9 * (1.0 + v.abs()) => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    out
}

/// Upper and lower tail probabilities of an observed sign-score sum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tails {
    pub greater: f64,
    pub less: f64,
    pub method: NullMethod,
}

fn tails_at(scores: &[f64], t_obs: f64, p_plus: f64) -> (f64, f64, NullMethod) {
    if let Some(dist) = dp_null_distribution(scores, p_plus) {
        return (dist.upper_tail(t_obs), dist.lower_tail(t_obs), NullMethod::DynamicProgram);
    }
    if scores.len() <= ENUMERATION_MAX {
        let dist = enumerate_null_distribution(scores, p_plus).expect("size checked");
        return (dist.upper_tail(t_obs), dist.lower_tail(t_obs), NullMethod::Enumeration);
    }
    let sum: f64 = scores.iter().sum();
    let sum_sq: f64 = scores.iter().map(|q| q * q).sum();
    let mean = p_plus * sum;
    let sd = libm::sqrt(p_plus * (1.0 - p_plus) * sum_sq);
    if sd == 0.0 {
        let g = if t_obs >= mean { 1.0 } else { 0.0 };
        let l = if t_obs <= mean { 1.0 } else { 0.0 };
        return (g, l, NullMethod::Normal);
    }
    let z = (t_obs - mean) / sd;
    (stats::normal_sf(z), stats::normal_cdf(z), NullMethod::Normal)
}

/// Tail probabilities with separate sign probabilities for the two tails:
/// the greater tail is evaluated at `p_greater`, the lower tail at `p_less`.
pub(crate) fn tails(scores: &[f64], t_obs: f64, p_greater: f64, p_less: f64) -> Tails {
    let informative: Vec<f64> = scores.iter().copied().filter(|q| *q > 0.0).collect();
    if p_greater == p_less {
        let (g, l, method) = tails_at(&informative, t_obs, p_greater);
        return Tails { greater: g, less: l, method };
    }
    let (g, _, method) = tails_at(&informative, t_obs, p_greater);
    let (_, l, _) = tails_at(&informative, t_obs, p_less);
    Tails { greater: g, less: l, method }
}

pub(crate) fn combine(t: &Tails, sided: Sided) -> f64 {
    match sided {
        Sided::Greater => t.greater,
        Sided::Less => t.less,
        Sided::TwoSided => (2.0 * t.greater.min(t.less)).min(1.0),
    }
}

/// Signs and scores of the adjusted contrasts `d_i - tau0`.
#[derive(Debug, Clone)]
pub(crate) struct Adjusted {
    pub positive: Vec<bool>,
    pub scores: Vec<f64>,
}

impl Adjusted {
    pub fn statistic(&self) -> f64 {
        self.scores
            .iter()
            .zip(&self.positive)
            .filter(|(_, p)| **p)
            .map(|(q, _)| q)
            .sum()
    }

    pub fn n_effective(&self) -> usize {
        self.scores.iter().filter(|q| **q > 0.0).count()
    }

    pub fn score_total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

pub(crate) fn require_continuous(quads: &QuadrupleSet) -> Result<()> {
    if quads.outcome_kind != OutcomeKind::Continuous {
        return Err(Error::OutcomeKind(
            "sign-score statistics need continuous outcomes; use the McNemar path for binary data".into(),
        ));
    }
    Ok(())
}

pub(crate) fn adjust_values(d: &[f64], tau0: f64, score: &ScoreFunction) -> Result<Adjusted> {
    let y: Vec<f64> = d.iter().map(|x| x - tau0).collect();
    let magnitudes: Vec<f64> = y.iter().map(|x| x.abs()).collect();
    let scores = score.scores(&magnitudes)?;
    Ok(Adjusted {
        positive: y.iter().map(|x| *x > 0.0).collect(),
        scores,
    })
}

pub(crate) fn adjust(quads: &QuadrupleSet, tau0: f64, score: &ScoreFunction) -> Result<Adjusted> {
    require_continuous(quads)?;
    let adj = adjust_values(&quads.contrasts(), tau0, score)?;
    if adj.n_effective() == 0 {
        return Err(Error::Degenerate(format!(
            "every adjusted contrast d - {tau0} is zero (or scores zero)"
        )));
    }
    Ok(adj)
}

/// Sum of the scores of the quadruples whose adjusted contrast is positive.
pub fn sign_score_statistic(quads: &QuadrupleSet, tau0: f64, score: &ScoreFunction) -> Result<f64> {
    Ok(adjust(quads, tau0, score)?.statistic())
}

/// Randomization p-value under independent fair sign flips.
pub fn randomization_pvalue(
    quads: &QuadrupleSet,
    tau0: f64,
    score: &ScoreFunction,
    sided: Sided,
) -> Result<TestResult> {
    pvalue_at(quads, tau0, score, sided, 0.5, 0.5, "randomization")
}

/// Shared by the no-bias test and the worst-case bounds: evaluates the greater
/// tail at sign probability `p_greater` and the lower tail at `p_less`.
pub(crate) fn pvalue_at(
    quads: &QuadrupleSet,
    tau0: f64,
    score: &ScoreFunction,
    sided: Sided,
    p_greater: f64,
    p_less: f64,
    label: &str,
) -> Result<TestResult> {
    let adj = adjust(quads, tau0, score)?;
    let statistic = adj.statistic();
    let t = tails(&adj.scores, statistic, p_greater, p_less);
    Ok(TestResult {
        statistic,
        p_value: PValue::Point(combine(&t, sided)),
        method: format!("{label}, {}, {}", score.name(), t.method.label()),
        sided,
        n_effective: adj.n_effective(),
    })
}

/// Median of the Walsh averages `(d_i + d_j) / 2`, `i <= j`.
pub fn hodges_lehmann(quads: &QuadrupleSet) -> Result<f64> {
    require_continuous(quads)?;
    hodges_lehmann_values(&quads.contrasts())
}

pub fn hodges_lehmann_values(d: &[f64]) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::Degenerate("no contrasts to estimate from".into()));
    }
    let mut walsh = Vec::with_capacity(d.len() * (d.len() + 1) / 2);
    for i in 0..d.len() {
        for j in i..d.len() {
            walsh.push(0.5 * (d[i] + d[j]));
        }
    }
    Ok(stats::median(&walsh))
}

/// Confidence set `{tau : two-sided p(tau) > alpha}` located by bisection on
/// each side of the Hodges-Lehmann estimate. An endpoint is infinite when
/// even the most extreme shift is not rejected.
pub fn invert_ci(quads: &QuadrupleSet, alpha: f64, score: &ScoreFunction) -> Result<Interval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    require_continuous(quads)?;
    let d = quads.contrasts();
    let center = hodges_lehmann_values(&d)?;
    let accept = |tau: f64| -> Result<bool> {
        match pvalue_at(quads, tau, score, Sided::TwoSided, 0.5, 0.5, "") {
            Ok(r) => Ok(r.p_value.upper() > alpha),
            // every contrast equals tau: the data cannot reject it
            Err(Error::Degenerate(_)) => Ok(true),
            Err(e) => Err(e),
        }
    };
    invert_with(&d, center, 1e-6, accept)
}

pub(crate) fn invert_with<F>(d: &[f64], center: f64, tol: f64, mut accept: F) -> Result<Interval>
where
    F: FnMut(f64) -> Result<bool>,
{
    let lo_d = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_d = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi_d - lo_d).max(1.0);
    let far_lo = lo_d - span;
    let far_hi = hi_d + span;

    let mut failure = None;
    let mut pred = |tau: f64| match accept(tau) {
        Ok(b) => b,
        Err(e) => {
            failure.get_or_insert(e);
            false
        }
    };
    let lower = if pred(far_lo) {
        f64::NEG_INFINITY
    } else {
        stats::bisect(center, far_lo, tol, &mut pred)
    };
    let upper = if pred(far_hi) {
        f64::INFINITY
    } else {
        stats::bisect(center, far_hi, tol, &mut pred)
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Interval {
        lower: lower.min(center),
        upper: upper.max(center),
    })
}

/// Hodges-Lehmann estimate with its inverted-test confidence interval.
pub fn estimate(quads: &QuadrupleSet, alpha: f64, score: &ScoreFunction) -> Result<EstimateResult> {
    let point = hodges_lehmann(quads)?;
    let ci = invert_ci(quads, alpha, score)?;
    Ok(EstimateResult {
        point: Interval { lower: point, upper: point },
        ci,
        method: format!("Hodges-Lehmann, {} inversion at level {}", score.name(), 1.0 - alpha),
    })
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::model::{build_quadruple, MatchedPair, Period, UnitRecord};
    use alloc::format;

    pub(crate) fn quads_from(d: &[f64]) -> QuadrupleSet {
        let quads = d
            .iter()
            .enumerate()
            .map(|(i, &di)| {
                let pre = MatchedPair::new(
                    Period::Pre,
                    UnitRecord::new(format!("t1-{i}"), Period::Pre, true, 0.0),
                    UnitRecord::new(format!("c1-{i}"), Period::Pre, false, 0.0),
                )
                .unwrap();
                let post = MatchedPair::new(
                    Period::Post,
                    UnitRecord::new(format!("t2-{i}"), Period::Post, true, di),
                    UnitRecord::new(format!("c2-{i}"), Period::Post, false, 0.0),
                )
                .unwrap();
                build_quadruple(pre, post).unwrap()
            })
            .collect();
        QuadrupleSet::new(quads, OutcomeKind::Continuous).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::tests_support::quads_from;
    use proptest::prelude::*;

    /// Independent oracle: count sign vectors by brute force.
    fn enumerate_pvalue(scores: &[f64], t_obs: f64) -> f64 {
        let n = scores.len();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let t: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| scores[i]).sum();
            if t >= t_obs - 1e-12 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn statistic_examples() {
        let w = ScoreFunction::WilcoxonRank;
        assert_eq!(sign_score_statistic(&quads_from(&[3.0, 1.0, 2.0]), 0.0, &w).unwrap(), 6.0);
        assert_eq!(sign_score_statistic(&quads_from(&[3.0, 1.0, 2.0]), 10.0, &w).unwrap(), 0.0);
        assert_eq!(sign_score_statistic(&quads_from(&[1.0, -1.0]), 0.0, &w).unwrap(), 1.5);
    }

    #[test]
    fn pvalue_examples() {
        let w = ScoreFunction::WilcoxonRank;
        let r = randomization_pvalue(&quads_from(&[3.0, 1.0, 2.0]), 0.0, &w, Sided::Greater).unwrap();
        assert_eq!(r.p_value, PValue::Point(0.125));
        assert_eq!(r.n_effective, 3);
        let r = randomization_pvalue(&quads_from(&[5.0]), 0.0, &w, Sided::Greater).unwrap();
        assert_eq!(r.p_value, PValue::Point(0.5));
        let err = randomization_pvalue(&quads_from(&[2.0, 2.0]), 2.0, &w, Sided::Greater).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn zero_contrasts_are_dropped() {
        let w = ScoreFunction::WilcoxonRank;
        let r = randomization_pvalue(&quads_from(&[0.0, 3.0, 1.0, 2.0]), 0.0, &w, Sided::Greater).unwrap();
        assert_eq!(r.n_effective, 3);
        assert_eq!(r.p_value.upper(), 0.125);
    }

    #[test]
    fn method_labels_follow_route() {
        let w = ScoreFunction::WilcoxonRank;
        let r = randomization_pvalue(&quads_from(&[3.0, 1.0, 2.0]), 0.0, &w, Sided::Greater).unwrap();
        assert!(r.method.contains("dynamic program"));
        let irrational: Vec<f64> = (1..=10).map(|i| libm::sqrt(i as f64 + 0.1)).collect();
        let t = ScoreFunction::AbsoluteValue;
        let r = randomization_pvalue(&quads_from(&irrational), 0.0, &t, Sided::Greater).unwrap();
        assert!(r.method.contains("enumeration"), "{}", r.method);
        let many: Vec<f64> = (1..=40).map(|i| libm::sqrt(i as f64 + 0.1)).collect();
        let r = randomization_pvalue(&quads_from(&many), 0.0, &t, Sided::Greater).unwrap();
        assert!(r.method.contains("normal"), "{}", r.method);
    }

    #[test]
    fn dp_matches_brute_force_counts() {
        let d = [1.5, -0.25, 3.0, 2.0, -4.0, 0.75, 5.5];
        for score in [ScoreFunction::WilcoxonRank, ScoreFunction::AbsoluteValue] {
            let adj = adjust(&quads_from(&d), 0.0, &score).unwrap();
            let t = adj.statistic();
            let p = randomization_pvalue(&quads_from(&d), 0.0, &score, Sided::Greater).unwrap();
            assert!((p.p_value.upper() - enumerate_pvalue(&adj.scores, t)).abs() < 1e-14);
        }
    }

    #[test]
    fn custom_scores_validated() {
        let neg = ScoreFunction::Custom(Arc::new(|a: &[f64]| a.iter().map(|x| -x).collect()));
        assert!(sign_score_statistic(&quads_from(&[1.0, 2.0]), 0.0, &neg).is_err());
        let sq = ScoreFunction::Custom(Arc::new(|a: &[f64]| a.iter().map(|x| x * x + 1.0).collect()));
        // zero magnitudes still get zero scores
        let adj = adjust(&quads_from(&[0.0, 2.0]), 0.0, &sq).unwrap();
        assert_eq!(adj.scores, vec![0.0, 5.0]);
    }

    #[test]
    fn hl_examples() {
        assert_eq!(hodges_lehmann(&quads_from(&[1.0, 2.0, 3.0])).unwrap(), 2.0);
        assert_eq!(hodges_lehmann(&quads_from(&[4.25])).unwrap(), 4.25);
        assert_eq!(hodges_lehmann(&quads_from(&[-3.0, -1.0, 1.0, 3.0])).unwrap(), 0.0);
        assert!(hodges_lehmann_values(&[]).is_err());
    }

    #[test]
    fn ci_constant_effect() {
        let q = quads_from(&[2.5; 10]);
        let ci = invert_ci(&q, 0.05, &ScoreFunction::WilcoxonRank).unwrap();
        assert!(ci.contains(2.5));
        assert!(ci.width() < 1e-5, "{ci:?}");
    }

    #[test]
    fn ci_symmetric_contains_zero() {
        let d: Vec<f64> = (1..=30).flat_map(|i| [i as f64 * 0.3, -(i as f64) * 0.3]).collect();
        let ci = invert_ci(&quads_from(&d), 0.05, &ScoreFunction::WilcoxonRank).unwrap();
        assert!(ci.contains(0.0) && ci.lower.is_finite() && ci.upper.is_finite());
    }

    #[test]
    fn ci_small_sample_is_unbounded() {
        // with three quadruples the smallest two-sided p is 1/4
        let ci = invert_ci(&quads_from(&[1.0, 2.0, 3.0]), 0.05, &ScoreFunction::WilcoxonRank).unwrap();
        assert!(ci.lower.is_infinite() && ci.upper.is_infinite());
    }

    #[test]
    fn binary_sets_are_refused() {
        let mut q = quads_from(&[1.0]);
        q.outcome_kind = OutcomeKind::Binary;
        assert!(matches!(
            randomization_pvalue(&q, 0.0, &ScoreFunction::WilcoxonRank, Sided::Greater),
            Err(Error::OutcomeKind(_))
        ));
    }

    proptest! {
        #[test]
        fn pvalue_reflection(d in proptest::collection::vec(-20i32..20, 1..12), tau in -3i32..3) {
            let d: Vec<f64> = d.into_iter().map(|x| x as f64 * 0.5).collect();
            let neg: Vec<f64> = d.iter().map(|x| -x).collect();
            let w = ScoreFunction::WilcoxonRank;
            let tau = tau as f64;
            let a = randomization_pvalue(&quads_from(&d), tau, &w, Sided::Greater);
            let b = randomization_pvalue(&quads_from(&neg), -tau, &w, Sided::Less);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!((a.p_value.upper() - b.p_value.upper()).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one side degenerate"),
            }
        }

        #[test]
        fn hl_translation(d in proptest::collection::vec(-100.0f64..100.0, 1..25), c in -50.0f64..50.0) {
            let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
            let a = hodges_lehmann_values(&d).unwrap();
            let b = hodges_lehmann_values(&shifted).unwrap();
            prop_assert!((a + c - b).abs() < 1e-9);
        }
    }
}
