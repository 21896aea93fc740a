//! Sensitivity analysis for hidden bias in matched differences-in-differences.
//!
//! Two bias sources are bounded separately: `Lambda` bounds the odds of
//! treatment assignment within each period's pair, and `Delta` bounds the
//! odds that the residual differences-in-differences is positive rather than
//! negative. Together they bound the probability that a quadruple's sign is
//! positive by
//!
//! ```text
//! (Delta^2 + Lambda^2) / ((1 + Lambda^2)(1 + Delta^2))
//!     <= P(S V = 1) <=
//! ((Lambda Delta)^2 + 1) / ((1 + Lambda^2)(1 + Delta^2))
//! ```
//!
//! A single parameter `Gamma` bounding assignment odds in both periods gives
//! `1/(1 + Gamma^2) <= P <= Gamma^2/(1 + Gamma^2)`, so a differences-in-
//! differences analysis at `Gamma` is a classical paired analysis at `Gamma^2`.
//! The two families coincide on the curve
//! `Gamma^2 = (Lambda^2 Delta^2 + 1) / (Lambda^2 + Delta^2)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::binary;
use crate::error::{Error, Result};
use crate::inference::{self, Interval, PValue, ScoreFunction, Sided, TestResult};
use crate::model::{OutcomeKind, QuadrupleSet};
use crate::stats;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Either a one-parameter `gamma` or a two-parameter `(lambda, delta)` bias
/// magnitude. All values are odds bounds and must be at least one.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SensitivityParams {
    Gamma(f64),
    TwoParam { lambda: f64, delta: f64 },
}

impl SensitivityParams {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SensitivityParams::Gamma(g) => check_ge_one("gamma", g),
            SensitivityParams::TwoParam { lambda, delta } => {
                check_ge_one("lambda", lambda)?;
                check_ge_one("delta", delta)
            }
        }
    }

    /// The one-parameter `gamma` with the same sign-probability bounds.
    pub fn gamma(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            SensitivityParams::Gamma(g) => g,
            SensitivityParams::TwoParam { lambda, delta } => did_gamma(lambda, delta)?,
        })
    }
}

fn check_ge_one(name: &str, x: f64) -> Result<()> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be a finite value >= 1, got {x}")));
    }
    Ok(())
}

/// Bounds on the probability that a quadruple's sign is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SignProbabilityBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Sharp bounds under assignment bias `lambda` and residual-asymmetry bias
/// `delta`.
pub fn two_param_bounds(lambda: f64, delta: f64) -> Result<SignProbabilityBounds> {
    check_ge_one("lambda", lambda)?;
    check_ge_one("delta", delta)?;
    let (l2, d2) = (lambda * lambda, delta * delta);
    let denom = (1.0 + l2) * (1.0 + d2);
    Ok(SignProbabilityBounds {
        lower: (d2 + l2) / denom,
        upper: (l2 * d2 + 1.0) / denom,
    })
}

/// Bounds when a single `gamma` bounds assignment odds in both periods.
pub fn one_param_bounds(gamma: f64) -> Result<SignProbabilityBounds> {
    check_ge_one("gamma", gamma)?;
    let g2 = gamma * gamma;
    Ok(SignProbabilityBounds {
        lower: 1.0 / (1.0 + g2),
        upper: g2 / (1.0 + g2),
    })
}

/// `gamma` on the differences-in-differences amplification curve through
/// `(lambda, delta)`.
pub fn did_gamma(lambda: f64, delta: f64) -> Result<f64> {
    check_ge_one("lambda", lambda)?;
    check_ge_one("delta", delta)?;
    let (l2, d2) = (lambda * lambda, delta * delta);
    Ok(libm::sqrt((l2 * d2 + 1.0) / (l2 + d2)))
}

/// `delta` paired with `lambda` on the differences-in-differences curve for
/// `gamma`, solving `gamma^2 (lambda^2 + delta^2) = lambda^2 delta^2 + 1`.
pub fn amplify_did(gamma: f64, lambda: f64) -> Result<f64> {
    check_ge_one("gamma", gamma)?;
    check_ge_one("lambda", lambda)?;
    if gamma == 1.0 {
        return Ok(1.0);
    }
    if lambda <= gamma {
        return Err(Error::OutOfDomain(format!(
            "lambda = {lambda} must exceed gamma = {gamma}: delta grows without bound as lambda falls to gamma"
        )));
    }
    let (g2, l2) = (gamma * gamma, lambda * lambda);
    Ok(libm::sqrt((g2 * l2 - 1.0) / (l2 - g2)))
}

/// `delta` paired with `lambda` on the classical paired-design curve
/// `gamma = (lambda delta + 1) / (lambda + delta)`.
pub fn amplify_paired(gamma: f64, lambda: f64) -> Result<f64> {
    check_ge_one("gamma", gamma)?;
    check_ge_one("lambda", lambda)?;
    if gamma == 1.0 {
        return Ok(1.0);
    }
    if lambda <= gamma {
        return Err(Error::OutOfDomain(format!(
            "lambda = {lambda} must exceed gamma = {gamma}: delta grows without bound as lambda falls to gamma"
        )));
    }
    Ok((gamma * lambda - 1.0) / (lambda - gamma))
}

/// One row of an amplification table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AmplificationRow {
    pub gamma: f64,
    pub lambda: f64,
    /// `None` when `lambda <= gamma`.
    pub delta_did: Option<f64>,
    pub delta_paired: Option<f64>,
}

pub fn amplification_table(gamma: f64, lambdas: &[f64]) -> Result<Vec<AmplificationRow>> {
    check_ge_one("gamma", gamma)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let did = match amplify_did(gamma, lambda) {
                Ok(d) => Some(d),
                Err(Error::OutOfDomain(_)) => None,
                Err(e) => return Err(e),
            };
            let paired = amplify_paired(gamma, lambda).ok();
            Ok(AmplificationRow {
                gamma,
                lambda,
                delta_did: did,
                delta_paired: paired,
            })
        })
        .collect()
}

/// Bounds under the extra restriction that the period-1 and period-2 biases
/// point the same way (`lambda_1 lambda_2 >= 0`, `delta_1 delta_2 >= 0`).
///
/// There is no closed form; the extremes are found by search over corner
/// confounder configurations and a grid of log-odds, so the result is a
/// numerical bound.
pub fn aligned_two_param_bounds(lambda: f64, delta: f64) -> Result<SignProbabilityBounds> {
    check_ge_one("lambda", lambda)?;
    check_ge_one("delta", delta)?;
    const STEPS: i32 = 20;
    let (ll, ld) = (libm::log(lambda), libm::log(delta));
    let grid = |m: f64| (-STEPS..=STEPS).map(move |k| m * k as f64 / STEPS as f64);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    // confounder differences u_1 - u_2 at the corners of [0, 1]^2
    let diffs = [-1.0, 0.0, 1.0];
    for l1 in grid(ll) {
        for l2 in grid(ll).filter(|l2| l1 * l2 >= 0.0) {
            for d1 in grid(ld) {
                for d2 in grid(ld).filter(|d2| d1 * d2 >= 0.0) {
                    for &x1 in &diffs {
                        for &x2 in &diffs {
                            for b in [-1.0, 1.0] {
                                let p = sign_probability(l1, l2, d1, d2, x1, x2, b);
                                lo = lo.min(p);
                                hi = hi.max(p);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(SignProbabilityBounds { lower: lo, upper: hi })
}

/// `P(S V = 1)` for given log-odds biases and confounder differences
/// `x_t = u_{1}^{(t)} - u_{2}^{(t)}`.
fn sign_probability(l1: f64, l2: f64, d1: f64, d2: f64, x1: f64, x2: f64, b: f64) -> f64 {
    let assign = l2 * x2 + b * l1 * x1;
    let resid = d2 * x2 - b * d1 * x1;
    let rho = 1.0 / (1.0 + libm::exp(-assign));
    let eta = 1.0 / (1.0 + libm::exp(-resid));
    rho * eta + (1.0 - rho) * (1.0 - eta)
}

/// Which end of the p-value interval to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    Upper,
    Lower,
}

/// Sign probabilities for the greater and lower tails that produce the
/// requested bound at classical paired parameter `gamma_pair`.
fn tail_probabilities(gamma_pair: f64, direction: Direction) -> (f64, f64) {
    let hi = gamma_pair / (1.0 + gamma_pair);
    let lo = 1.0 / (1.0 + gamma_pair);
    match direction {
        Direction::Upper => (hi, lo),
        Direction::Lower => (lo, hi),
    }
}

/// Classical worst-case p-value for matched pairs at parameter `gamma_pair`,
/// applied to the contrasts as if they were paired differences.
pub fn paired_worst_case_pvalue(
    quads: &QuadrupleSet,
    tau0: f64,
    score: &ScoreFunction,
    gamma_pair: f64,
    direction: Direction,
    sided: Sided,
) -> Result<TestResult> {
    check_ge_one("gamma", gamma_pair)?;
    let (pg, pl) = tail_probabilities(gamma_pair, direction);
    let label = format!("{:?} bound at paired parameter {}", direction, gamma_pair).to_lowercase();
    inference::pvalue_at(quads, tau0, score, sided, pg, pl, &label)
}

/// Worst-case p-value bound at differences-in-differences parameter `gamma`:
/// the classical paired bound evaluated at `gamma^2`.
pub fn worst_case_pvalue(
    quads: &QuadrupleSet,
    tau0: f64,
    score: &ScoreFunction,
    gamma: f64,
    direction: Direction,
    sided: Sided,
) -> Result<TestResult> {
    check_ge_one("gamma", gamma)?;
    let (pg, pl) = tail_probabilities(gamma * gamma, direction);
    let label = format!(
        "{} bound at gamma = {} (paired gamma^2 = {})",
        match direction {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
        },
        gamma,
        gamma * gamma
    );
    inference::pvalue_at(quads, tau0, score, sided, pg, pl, &label)
}

/// Both ends of the p-value interval at `gamma`.
pub fn pvalue_bounds(
    quads: &QuadrupleSet,
    tau0: f64,
    score: &ScoreFunction,
    gamma: f64,
    sided: Sided,
) -> Result<TestResult> {
    let up = worst_case_pvalue(quads, tau0, score, gamma, Direction::Upper, sided)?;
    let lo = worst_case_pvalue(quads, tau0, score, gamma, Direction::Lower, sided)?;
    Ok(TestResult {
        p_value: PValue::Bounds {
            lower: lo.p_value.upper(),
            upper: up.p_value.upper(),
        },
        method: format!("sensitivity interval at gamma = {gamma}, {}", score.name()),
        ..up
    })
}

/// A two-parameter request routed through the equivalent `gamma`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TwoParamResult {
    pub lambda: f64,
    pub delta: f64,
    pub gamma: f64,
    pub result: TestResult,
}

pub fn two_param_pvalue(
    quads: &QuadrupleSet,
    tau0: f64,
    score: &ScoreFunction,
    lambda: f64,
    delta: f64,
    direction: Direction,
    sided: Sided,
) -> Result<TwoParamResult> {
    let gamma = did_gamma(lambda, delta)?;
    let result = worst_case_pvalue(quads, tau0, score, gamma, direction, sided)?;
    Ok(TwoParamResult {
        lambda,
        delta,
        gamma,
        result,
    })
}

/// Outcome of a changepoint search.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Changepoint {
    /// The test does not reject even without hidden bias.
    NoneAtOne { p_at_one: f64 },
    /// Largest `gamma` (within tolerance) whose worst-case p-value is at most
    /// alpha. `gamma_squared` is the equivalent paired-design parameter.
    At { gamma: f64, gamma_squared: f64, p_value: f64 },
}

impl Changepoint {
    pub fn gamma(&self) -> Option<f64> {
        match self {
            Changepoint::NoneAtOne { .. } => None,
            Changepoint::At { gamma, .. } => Some(*gamma),
        }
    }
}

pub const CHANGEPOINT_TOL: f64 = 1e-4;
const GAMMA_CAP: f64 = 1e6;

/// Generic changepoint search over a nondecreasing upper-bound p-value curve.
pub fn changepoint_by<F>(alpha: f64, mut upper_p: F) -> Result<Changepoint>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let p1 = upper_p(1.0)?;
    if p1 > alpha {
        return Ok(Changepoint::NoneAtOne { p_at_one: p1 });
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    loop {
        if upper_p(hi)? > alpha {
            break;
        }
        lo = hi;
        if hi >= GAMMA_CAP {
            let p = upper_p(lo)?;
            return Ok(Changepoint::At { gamma: lo, gamma_squared: lo * lo, p_value: p });
        }
        hi *= 2.0;
    }
    while hi - lo > CHANGEPOINT_TOL {
        let mid = 0.5 * (lo + hi);
        if upper_p(mid)? <= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = upper_p(lo)?;
    Ok(Changepoint::At { gamma: lo, gamma_squared: lo * lo, p_value: p })
}

/// Largest `gamma` at which the worst-case test still rejects at `alpha`.
/// Binary quadruple sets are analysed with McNemar's test on the eligible
/// quadruples; `score` is then ignored.
pub fn changepoint_gamma(
    quads: &QuadrupleSet,
    tau0: f64,
    score: &ScoreFunction,
    alpha: f64,
    sided: Sided,
) -> Result<Changepoint> {
    match quads.outcome_kind {
        OutcomeKind::Continuous => changepoint_by(alpha, |g| {
            Ok(worst_case_pvalue(quads, tau0, score, g, Direction::Upper, sided)?.p_value.upper())
        }),
        OutcomeKind::Binary => {
            let filtered = binary::eligible_quadruples(quads)?;
            changepoint_by(alpha, |g| {
                Ok(binary::mcnemar_sensitivity_pvalue(&filtered.eligible, g, Direction::Upper, sided)?
                    .p_value
                    .upper())
            })
        }
    }
}

/// Range of Hodges-Lehmann-type estimates under bias up to `gamma`.
///
/// Each endpoint solves `T(tau) = p * sum(q(tau))` for the extreme sign
/// probabilities `p`, taking the midpoint of the supremum of `{T > p sum q}`
/// and the infimum of `{T < p sum q}`. With Wilcoxon scores at `gamma = 1`
/// both endpoints collapse to the median of the Walsh averages; with
/// absolute-value scores they collapse to the mean.
pub fn estimate_bounds(quads: &QuadrupleSet, gamma: f64, score: &ScoreFunction) -> Result<Interval> {
    check_ge_one("gamma", gamma)?;
    inference::require_continuous(quads)?;
    let d = quads.contrasts();
    if d.is_empty() {
        return Err(Error::Degenerate("no contrasts to estimate from".into()));
    }
    if gamma == 1.0 && matches!(score, ScoreFunction::WilcoxonRank) {
        // the signed-rank root at p = 1/2 is the Walsh-average median
        let hl = inference::hodges_lehmann_values(&d)?;
        return Ok(Interval { lower: hl, upper: hl });
    }
    let b = one_param_bounds(gamma)?;
    let lower = solve_estimate(&d, b.upper, score)?;
    let upper = solve_estimate(&d, b.lower, score)?;
    Ok(Interval { lower, upper })
}

fn solve_estimate(d: &[f64], p: f64, score: &ScoreFunction) -> Result<f64> {
    let lo_d = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_d = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi_d - lo_d).max(1.0);
    let (far_lo, far_hi) = (lo_d - span, hi_d + span);
    let tol = 1e-9 * (1.0 + span);

    let mut failure = None;
    let mut excess = |tau: f64| -> f64 {
        match inference::adjust_values(d, tau, score) {
            Ok(adj) => adj.statistic() - p * adj.score_total(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let sup_pos = stats::bisect(far_lo, far_hi, tol, |t| excess(t) > 0.0);
    let inf_neg = stats::bisect(far_lo, far_hi, tol, |t| excess(t) >= 0.0);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(0.5 * (sup_pos + inf_neg))
}

/// Studentized sensitivity analysis for the sample average of heterogeneous
/// effects, `H0: mean effect = tau0`, at differences-in-differences `gamma`.
///
/// With `y_i = d_i - tau0` and `k = (gamma^2 - 1)/(gamma^2 + 1)`, the upper
/// bound for the greater alternative studentizes `y_i - k |y_i|` and refers
/// the deviate to the standard normal; the lower bound uses `y_i + k |y_i|`.
/// The less alternative applies the same construction to `-y`.
pub fn sate_pvalue(
    quads: &QuadrupleSet,
    tau0: f64,
    gamma: f64,
    direction: Direction,
    sided: Sided,
) -> Result<TestResult> {
    check_ge_one("gamma", gamma)?;
    inference::require_continuous(quads)?;
    let n = quads.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "the sample-average test needs at least two quadruples, got {n}"
        )));
    }
    let y: Vec<f64> = quads.quads.iter().map(|q| q.d - tau0).collect();
    let g2 = gamma * gamma;
    let kappa = (g2 - 1.0) / (g2 + 1.0);

    let one_sided = |y: &[f64]| -> (f64, f64) {
        let shrink = match direction {
            Direction::Upper => -kappa,
            Direction::Lower => kappa,
        };
        let adjusted: Vec<f64> = y.iter().map(|v| v + shrink * v.abs()).collect();
        let m = stats::mean(&adjusted);
        let se = libm::sqrt(stats::variance(&adjusted) / n as f64);
        let z = if se > 0.0 {
            m / se
        } else if m > 0.0 {
            f64::INFINITY
        } else if m < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        (z, stats::normal_sf(z))
    };

    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    let (z_g, p_g) = one_sided(&y);
    let (_, p_l) = one_sided(&neg);
    let p = match sided {
        Sided::Greater => p_g,
        Sided::Less => p_l,
        Sided::TwoSided => (2.0 * p_g.min(p_l)).min(1.0),
    };
    Ok(TestResult {
        statistic: z_g,
        p_value: PValue::Point(p),
        method: format!(
            "studentized sample-average test, {} bound at gamma = {gamma} (paired gamma^2 = {g2}), normal reference",
            match direction {
                Direction::Upper => "upper",
                Direction::Lower => "lower",
            }
        ),
        sided,
        n_effective: y.iter().filter(|v| **v != 0.0).count(),
    })
}

/// Method label used when reporting a changepoint.
pub fn describe_changepoint(cp: &Changepoint) -> String {
    match cp {
        Changepoint::NoneAtOne { p_at_one } => {
            format!("none at gamma = 1 (p = {p_at_one:.4} already exceeds alpha)")
        }
        Changepoint::At { gamma, gamma_squared, p_value } => format!(
            "gamma* = {gamma:.4} (paired-design gamma^2 = {gamma_squared:.4}), worst-case p = {p_value:.4}"
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::tests_support::quads_from;
    use proptest::prelude::*;

    #[test]
    fn two_param_examples() {
        let b = two_param_bounds(1.0, 1.0).unwrap();
        assert_eq!((b.lower, b.upper), (0.5, 0.5));
        let b = two_param_bounds(2.0, 2.0).unwrap();
        assert!((b.lower - 0.32).abs() < 1e-15 && (b.upper - 0.68).abs() < 1e-15);
        let b = two_param_bounds(3.0, 1.0).unwrap();
        assert!((b.lower - 0.5).abs() < 1e-15 && (b.upper - 0.5).abs() < 1e-15);
        assert!(two_param_bounds(0.9, 1.0).is_err());
    }

    #[test]
    fn one_param_examples() {
        assert_eq!(one_param_bounds(1.0).unwrap(), SignProbabilityBounds { lower: 0.5, upper: 0.5 });
        let b = one_param_bounds(libm::sqrt(2.0)).unwrap();
        assert!((b.lower - 1.0 / 3.0).abs() < 1e-15 && (b.upper - 2.0 / 3.0).abs() < 1e-15);
        let b = one_param_bounds(libm::sqrt(2.125)).unwrap();
        assert!((b.lower - 0.32).abs() < 1e-15 && (b.upper - 0.68).abs() < 1e-15);
        assert!(one_param_bounds(0.5).is_err());
    }

    #[test]
    fn amplification_examples() {
        assert!((amplify_did(2.0, 3.0).unwrap() - libm::sqrt(7.0)).abs() < 1e-12);
        assert_eq!(amplify_paired(2.0, 3.0).unwrap(), 5.0);
        assert_eq!(amplify_did(1.0, 4.0).unwrap(), 1.0);
        assert_eq!(amplify_paired(1.0, 4.0).unwrap(), 1.0);
        assert!(matches!(amplify_did(2.0, 2.0), Err(Error::OutOfDomain(_))));
        assert!(matches!(amplify_paired(2.0, 1.5), Err(Error::OutOfDomain(_))));
        let delta = amplify_did(2.0, 3.0).unwrap();
        assert!(delta < amplify_paired(2.0, 3.0).unwrap());
        let (g2, l2, d2) = (4.0, 9.0, delta * delta);
        assert!((g2 * (l2 + d2) - (l2 * d2 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn amplification_table_marks_asymptote() {
        let rows = amplification_table(2.0, &[1.5, 3.0]).unwrap();
        assert_eq!(rows[0].delta_did, None);
        assert!((rows[1].delta_did.unwrap() - 2.6457513110645907).abs() < 1e-12);
        assert_eq!(rows[1].delta_paired, Some(5.0));
    }

    #[test]
    fn aligned_bounds_are_tighter() {
        for (l, d) in [(2.0, 2.0), (1.5, 3.0), (4.0, 1.2)] {
            let free = two_param_bounds(l, d).unwrap();
            let aligned = aligned_two_param_bounds(l, d).unwrap();
            assert!(aligned.upper <= free.upper + 1e-12);
            assert!(aligned.lower >= free.lower - 1e-12);
            assert!(aligned.upper < free.upper);
        }
        let a = aligned_two_param_bounds(1.0, 1.0).unwrap();
        assert!((a.upper - 0.5).abs() < 1e-15);
    }

    #[test]
    fn worst_case_examples() {
        let q = quads_from(&[3.0, 1.0, 2.0]);
        let w = ScoreFunction::WilcoxonRank;
        let r = worst_case_pvalue(&q, 0.0, &w, 1.0, Direction::Upper, Sided::Greater).unwrap();
        assert_eq!(r.p_value.upper(), 0.125);
        let r = worst_case_pvalue(&q, 0.0, &w, libm::sqrt(2.0), Direction::Upper, Sided::Greater).unwrap();
        assert!((r.p_value.upper() - 8.0 / 27.0).abs() < 1e-12);
        let r = worst_case_pvalue(&q, 0.0, &w, 1e4, Direction::Upper, Sided::Greater).unwrap();
        assert!(r.p_value.upper() > 0.9999);
    }

    #[test]
    fn gamma_one_collapse() {
        let q = quads_from(&[2.0, -0.5, 1.25, 3.0, 0.75, -1.5, 2.5]);
        let w = ScoreFunction::WilcoxonRank;
        for sided in [Sided::Greater, Sided::Less, Sided::TwoSided] {
            let a = inference::randomization_pvalue(&q, 0.0, &w, sided).unwrap();
            for dir in [Direction::Upper, Direction::Lower] {
                let b = worst_case_pvalue(&q, 0.0, &w, 1.0, dir, sided).unwrap();
                assert_eq!(a.p_value.upper().to_bits(), b.p_value.upper().to_bits());
                assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
            }
        }
        let hl = inference::hodges_lehmann(&q).unwrap();
        let eb = estimate_bounds(&q, 1.0, &w).unwrap();
        assert!((eb.lower - hl).abs() < 1e-6 && (eb.upper - hl).abs() < 1e-6);
    }

    #[test]
    fn changepoint_none_at_one() {
        let q = quads_from(&[1.0, -2.0, 0.5, -0.25, 3.0]);
        let cp = changepoint_gamma(&q, 0.0, &ScoreFunction::WilcoxonRank, 0.05, Sided::Greater).unwrap();
        assert!(matches!(cp, Changepoint::NoneAtOne { .. }));
    }

    #[test]
    fn changepoint_brackets_crossing() {
        let q = quads_from(&[1.0; 100]);
        let w = ScoreFunction::WilcoxonRank;
        let cp = changepoint_gamma(&q, 0.0, &w, 0.05, Sided::Greater).unwrap();
        let g = cp.gamma().unwrap();
        assert!(g > 1.0);
        let p = |g: f64| worst_case_pvalue(&q, 0.0, &w, g, Direction::Upper, Sided::Greater).unwrap().p_value.upper();
        assert!(p(g) <= 0.05);
        assert!(p(g + CHANGEPOINT_TOL) > 0.05);
        // a grid sweep brackets the same crossing
        let grid: Vec<f64> = (0..=400).map(|k| 1.0 + k as f64 * 0.05).collect();
        let last_ok = grid.iter().copied().filter(|&x| p(x) <= 0.05).fold(1.0, f64::max);
        assert!(last_ok <= g + 1e-9 && g < last_ok + 0.05);
    }

    #[test]
    fn estimate_bounds_widen() {
        let q = quads_from(&[0.5, 2.0, 1.5, 3.5, -0.5, 2.25, 1.0, 4.0, 0.0, 2.75]);
        let w = ScoreFunction::WilcoxonRank;
        let mut prev = estimate_bounds(&q, 1.0, &w).unwrap();
        for g in [1.1, 1.3, 1.6, 2.0, 3.0] {
            let cur = estimate_bounds(&q, g, &w).unwrap();
            assert!(cur.lower <= prev.lower + 1e-9 && cur.upper >= prev.upper - 1e-9);
            prev = cur;
        }
    }

    #[test]
    fn sate_examples() {
        let d: Vec<f64> = (1..=200).flat_map(|i| [i as f64 * 0.1, -(i as f64) * 0.1]).collect();
        let q = quads_from(&d);
        let r = sate_pvalue(&q, 0.0, 1.0, Direction::Upper, Sided::Greater).unwrap();
        assert!((r.p_value.upper() - 0.5).abs() < 1e-9);
        assert!(matches!(
            sate_pvalue(&quads_from(&[1.0]), 0.0, 1.0, Direction::Upper, Sided::Greater),
            Err(Error::InvalidParameter(_))
        ));
        let q = quads_from(&[1.0, 2.5, -0.5, 3.0, 0.5, 1.5, 2.0, -1.0]);
        let p1 = sate_pvalue(&q, 0.0, 1.0, Direction::Upper, Sided::Greater).unwrap().p_value.upper();
        let p2 = sate_pvalue(&q, 0.0, 1.01, Direction::Upper, Sided::Greater).unwrap().p_value.upper();
        let p3 = sate_pvalue(&q, 0.0, 1.01, Direction::Lower, Sided::Greater).unwrap().p_value.upper();
        assert!(p2 > p1 && p3 < p1);
    }

    proptest! {
        #[test]
        fn bounds_identity(l in 1.0f64..6.0, d in 1.0f64..6.0) {
            let two = two_param_bounds(l, d).unwrap();
            let one = one_param_bounds(did_gamma(l, d).unwrap()).unwrap();
            prop_assert!((two.upper - one.upper).abs() < 1e-12);
            prop_assert!((two.lower - one.lower).abs() < 1e-12);
            prop_assert!((two.lower + two.upper - 1.0).abs() < 1e-12);
        }

        #[test]
        fn amplify_round_trip(g in 1.0f64..4.0, extra in 0.01f64..5.0) {
            let l = g + extra;
            let d = amplify_did(g, l).unwrap();
            prop_assert!((did_gamma(l, d).unwrap() - g).abs() < 1e-9);
            let dp = amplify_paired(g, l).unwrap();
            prop_assert!(((l * dp + 1.0) / (l + dp) - g).abs() < 1e-9);
        }

        #[test]
        fn upper_bound_monotone(d in proptest::collection::vec(-10i32..10, 2..10)) {
            let d: Vec<f64> = d.into_iter().map(f64::from).collect();
            let q = quads_from(&d);
            let w = ScoreFunction::WilcoxonRank;
            let mut prev_up = 0.0;
            let mut prev_lo = 1.0;
            for g in [1.0, 1.2, 1.5, 2.0, 3.0] {
                match pvalue_bounds(&q, 0.0, &w, g, Sided::Greater) {
                    Ok(r) => {
                        let (lo, up) = (r.p_value.lower(), r.p_value.upper());
                        prop_assert!(up >= prev_up - 1e-12 && lo <= prev_lo + 1e-12 && lo <= up + 1e-12);
                        prev_up = up;
                        prev_lo = lo;
                    }
                    Err(_) => break,
                }
            }
        }
    }
}
