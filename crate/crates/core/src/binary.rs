//! Binary outcomes: eligibility filtering and McNemar-type sensitivity.
//!
//! With 0/1 outcomes, only quadruples whose pre and post pairs are both
//! discordant, and discordant in opposite directions for the treated member,
//! carry information about the treatment. Their contrast is `+2` or `-2`, and
//! the count of `+2` contrasts is McNemar's statistic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::inference::{PValue, Sided, TestResult};
use crate::model::{OutcomeKind, Quadruple, QuadrupleSet};
use crate::sensitivity::{self, Direction, SignProbabilityBounds};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// A quadruple that passed the eligibility filter.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EligibleQuadruple {
    /// Position in the input set.
    pub index: usize,
    pub quad: Quadruple,
    /// `d / 2`, so `+1` when the treated member has the event after treatment.
    pub s: i8,
}

/// Why a quadruple was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Ineligibility {
    PreConcordant,
    PostConcordant,
    BothConcordant,
    /// Both treated members have the event.
    TreatedEventTwice,
    /// Neither treated member has the event.
    TreatedEventNever,
}

impl Ineligibility {
    pub fn label(self) -> &'static str {
        match self {
            Ineligibility::PreConcordant => "pre pair concordant",
            Ineligibility::PostConcordant => "post pair concordant",
            Ineligibility::BothConcordant => "both pairs concordant",
            Ineligibility::TreatedEventTwice => "treated event in both periods",
            Ineligibility::TreatedEventNever => "treated event in neither period",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EligibilityReport {
    pub eligible: Vec<EligibleQuadruple>,
    pub ineligible: usize,
    /// Reason label to count.
    pub reasons: BTreeMap<String, usize>,
}

/// Classifies one quadruple; `Ok(s)` when eligible.
pub fn classify(q: &Quadruple) -> core::result::Result<i8, Ineligibility> {
    let event = |x: f64| x == 1.0;
    let pre_disc = event(q.pre.treated.outcome) != event(q.pre.control.outcome);
    let post_disc = event(q.post.treated.outcome) != event(q.post.control.outcome);
    match (pre_disc, post_disc) {
        (false, false) => return Err(Ineligibility::BothConcordant),
        (false, true) => return Err(Ineligibility::PreConcordant),
        (true, false) => return Err(Ineligibility::PostConcordant),
        _ => {}
    }
    match (event(q.pre.treated.outcome), event(q.post.treated.outcome)) {
        (true, true) => Err(Ineligibility::TreatedEventTwice),
        (false, false) => Err(Ineligibility::TreatedEventNever),
        (false, true) => Ok(1),
        (true, false) => Ok(-1),
    }
}

/// Keeps exactly the informative quadruples, in input order.
pub fn eligible_quadruples(quads: &QuadrupleSet) -> Result<EligibilityReport> {
    if quads.outcome_kind != OutcomeKind::Binary {
        return Err(Error::OutcomeKind(
            "eligibility filtering applies to binary outcomes only".into(),
        ));
    }
    let mut eligible = Vec::new();
    let mut reasons = BTreeMap::new();
    for (index, q) in quads.quads.iter().enumerate() {
        for x in [q.pre.treated.outcome, q.pre.control.outcome, q.post.treated.outcome, q.post.control.outcome] {
            if x != 0.0 && x != 1.0 {
                return Err(Error::OutcomeKind(format!(
                    "quadruple {index} has outcome {x}; binary outcomes must be 0 or 1"
                )));
            }
        }
        match classify(q) {
            Ok(s) => eligible.push(EligibleQuadruple {
                index,
                quad: q.clone(),
                s,
            }),
            Err(why) => *reasons.entry(why.label().to_string()).or_insert(0) += 1,
        }
    }
    let ineligible = quads.len() - eligible.len();
    Ok(EligibilityReport {
        eligible,
        ineligible,
        reasons,
    })
}

pub fn mcnemar_statistic(eligible: &[EligibleQuadruple]) -> usize {
    eligible.iter().filter(|e| e.s == 1).count()
}

fn ln_choose(n: usize, k: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Largest `n` summed by direct products; binomial coefficients stay finite.
const DIRECT_TAIL_MAX: usize = 1000;

/// `P(Binomial(n, p) >= k)`.
pub fn binomial_upper_tail(n: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if n <= DIRECT_TAIL_MAX {
        // plain products: exact whenever p is dyadic and n is small
        let q = 1.0 - p;
        let mut choose = 1.0;
        let mut sum = 0.0;
        for j in 0..=n {
            if j >= k {
                sum += choose * libm::pow(p, j as f64) * libm::pow(q, (n - j) as f64);
            }
            choose = choose * (n - j) as f64 / (j + 1) as f64;
        }
        return sum.min(1.0);
    }
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    let mut sum = 0.0;
    for j in k..=n {
        sum += libm::exp(ln_choose(n, j) + j as f64 * lp + (n - j) as f64 * lq);
    }
    sum.min(1.0)
}

/// `P(Binomial(n, p) <= k)`.
pub fn binomial_lower_tail(n: usize, k: usize, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    binomial_upper_tail(n, n - k, 1.0 - p)
}

/// Exact McNemar p-value bound at differences-in-differences parameter
/// `gamma`; `gamma = 1` gives the classical exact McNemar test.
pub fn mcnemar_sensitivity_pvalue(
    eligible: &[EligibleQuadruple],
    gamma: f64,
    direction: Direction,
    sided: Sided,
) -> Result<TestResult> {
    let bounds = sensitivity::one_param_bounds(gamma)?;
    let j = eligible.len();
    if j == 0 {
        return Err(Error::NoInformation(
            "no eligible quadruples: every pair is concordant or the treated member's change is uninformative".into(),
        ));
    }
    let t = mcnemar_statistic(eligible);
    let (p_greater, p_less) = match direction {
        Direction::Upper => (bounds.upper, bounds.lower),
        Direction::Lower => (bounds.lower, bounds.upper),
    };
    let greater = binomial_upper_tail(j, t, p_greater);
    let less = binomial_lower_tail(j, t, p_less);
    let p = match sided {
        Sided::Greater => greater,
        Sided::Less => less,
        Sided::TwoSided => (2.0 * greater.min(less)).min(1.0),
    };
    Ok(TestResult {
        statistic: t as f64,
        p_value: PValue::Point(p),
        method: format!(
            "exact McNemar, {} bound at gamma = {gamma} (paired gamma^2 = {})",
            match direction {
                Direction::Upper => "upper",
                Direction::Lower => "lower",
            },
            gamma * gamma
        ),
        sided,
        n_effective: j,
    })
}

/// The two-parameter sign-probability bounds for binary outcomes; the formula
/// is shared with the continuous path.
pub fn binary_two_param_bounds(lambda: f64, delta: f64) -> Result<SignProbabilityBounds> {
    sensitivity::two_param_bounds(lambda, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_quadruple, MatchedPair, Period, UnitRecord};

    fn quad(i: usize, pre: (u8, u8), post: (u8, u8)) -> Quadruple {
        let unit = |tag: &str, p: Period, z: bool, y: u8| UnitRecord::new(format!("{tag}{i}"), p, z, y as f64);
        build_quadruple(
            MatchedPair::new(Period::Pre, unit("a", Period::Pre, true, pre.0), unit("b", Period::Pre, false, pre.1)).unwrap(),
            MatchedPair::new(Period::Post, unit("c", Period::Post, true, post.0), unit("d", Period::Post, false, post.1))
                .unwrap(),
        )
        .unwrap()
    }

    fn eligible_with(signs: &[i8]) -> Vec<EligibleQuadruple> {
        signs
            .iter()
            .enumerate()
            .map(|(index, &s)| {
                let q = if s == 1 { quad(index, (0, 1), (1, 0)) } else { quad(index, (1, 0), (0, 1)) };
                EligibleQuadruple { index, quad: q, s }
            })
            .collect()
    }

    #[test]
    fn eligibility_examples() {
        let set = QuadrupleSet::new(
            vec![quad(0, (1, 0), (0, 1)), quad(1, (1, 1), (1, 0)), quad(2, (1, 0), (1, 0))],
            OutcomeKind::Binary,
        )
        .unwrap();
        let r = eligible_quadruples(&set).unwrap();
        assert_eq!(r.eligible.len(), 1);
        assert_eq!(r.eligible[0].s, -1);
        assert_eq!(r.eligible[0].quad.d, -2.0);
        assert_eq!(r.ineligible, 2);
        assert_eq!(r.reasons["pre pair concordant"], 1);
        assert_eq!(r.reasons["treated event in both periods"], 1);
    }

    #[test]
    fn continuous_set_refused() {
        let set = QuadrupleSet::new(vec![quad(0, (1, 0), (0, 1))], OutcomeKind::Continuous).unwrap();
        assert!(matches!(eligible_quadruples(&set), Err(Error::OutcomeKind(_))));
    }

    /// All 16 configurations: eligibility holds exactly when swapping units
    /// within both pairs yields a different contrast, i.e. the conditional
    /// set of outcome configurations has more than one element.
    #[test]
    fn filter_matches_enumeration() {
        for mask in 0u8..16 {
            let bit = |k: u8| (mask >> k) & 1;
            let q = quad(0, (bit(0), bit(1)), (bit(2), bit(3)));
            let pre_disc = bit(0) != bit(1);
            let post_disc = bit(2) != bit(3);
            let one_treated_event = bit(0) + bit(2) == 1;
            let expect = pre_disc && post_disc && one_treated_event;
            let got = classify(&q);
            assert_eq!(got.is_ok(), expect, "mask {mask:04b}");
            if let Ok(s) = got {
                assert_eq!(q.d, 2.0 * s as f64);
            }
            let swapped = (bit(3) as f64 - bit(2) as f64) - (bit(1) as f64 - bit(0) as f64);
            let informative = pre_disc && post_disc && swapped != q.d;
            assert_eq!(informative, expect, "mask {mask:04b}");
        }
    }

    #[test]
    fn statistic_examples() {
        assert_eq!(mcnemar_statistic(&eligible_with(&[1, 1, -1])), 2);
        assert_eq!(mcnemar_statistic(&[]), 0);
        assert_eq!(mcnemar_statistic(&eligible_with(&[-1; 5])), 0);
    }

    #[test]
    fn pvalue_examples() {
        let e = eligible_with(&[1, 1, 1, 1, 1, 1, 1, 1, -1, -1]);
        let p = |g: f64| mcnemar_sensitivity_pvalue(&e, g, Direction::Upper, Sided::Greater).unwrap().p_value.upper();
        assert!((p(1.0) - 56.0 / 1024.0).abs() < 1e-15);
        assert!((p(libm::sqrt(2.0)) - 17664.0 / 59049.0).abs() < 1e-14);
        let one = eligible_with(&[1]);
        let r = mcnemar_sensitivity_pvalue(&one, 1.0, Direction::Upper, Sided::Greater).unwrap();
        assert_eq!(r.p_value.upper(), 0.5);
        assert!(matches!(
            mcnemar_sensitivity_pvalue(&[], 1.0, Direction::Upper, Sided::Greater),
            Err(Error::NoInformation(_))
        ));
    }

    #[test]
    fn two_sided_is_capped() {
        let e = eligible_with(&[1, -1]);
        let r = mcnemar_sensitivity_pvalue(&e, 1.0, Direction::Upper, Sided::TwoSided).unwrap();
        assert_eq!(r.p_value.upper(), 1.0);
    }

    #[test]
    fn upper_monotone_in_gamma() {
        let e = eligible_with(&[1, 1, 1, -1, 1, 1, -1, 1]);
        let mut prev = 0.0;
        for g in [1.0, 1.1, 1.5, 2.0, 4.0] {
            let p = mcnemar_sensitivity_pvalue(&e, g, Direction::Upper, Sided::Greater).unwrap().p_value.upper();
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn shares_continuous_bounds() {
        for l in [1.0, 2.0, 3.0, 4.0, 5.0] {
            for d in [1.0, 2.0, 3.0, 4.0, 5.0] {
                assert_eq!(binary_two_param_bounds(l, d).unwrap(), sensitivity::two_param_bounds(l, d).unwrap());
            }
        }
        let b = binary_two_param_bounds(2.0, 2.0).unwrap();
        assert!((b.upper - 0.68).abs() < 1e-15);
    }
}
