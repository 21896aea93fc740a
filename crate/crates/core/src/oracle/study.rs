//! Monte Carlo level and power studies.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binary;
use crate::error::{Error, Result};
use crate::inference::{self, ScoreFunction, Sided};
use crate::model::OutcomeKind;
use crate::sensitivity::{self, Direction};

use super::generate::{assemble_quadruples, generate_binary_with, generate_continuous_with, BinaryWorld, LatentWorld};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StudyGenerator {
    Continuous(LatentWorld),
    Binary(BinaryWorld),
}

impl StudyGenerator {
    /// True effect under the null being tested, when one is defined.
    pub fn true_effect(&self) -> Option<f64> {
        match self {
            StudyGenerator::Continuous(w) => Some(w.effect.average()),
            StudyGenerator::Binary(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StudyTest {
    SignedRank,
    PermutationalT,
    Sate,
    McNemar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StudyAnalysis {
    pub test: StudyTest,
    pub alpha: f64,
    pub gamma: f64,
    pub tau0: f64,
    pub sided: Sided,
    /// Also compute the Hodges-Lehmann estimate and estimate bounds at this
    /// gamma (continuous rank and t tests only).
    pub estimate_gamma: Option<f64>,
    /// Also search for the changepoint gamma.
    pub changepoint: bool,
}

impl Default for StudyAnalysis {
    fn default() -> Self {
        StudyAnalysis {
            test: StudyTest::SignedRank,
            alpha: 0.05,
            gamma: 1.0,
            tau0: 0.0,
            sided: Sided::Greater,
            estimate_gamma: None,
            changepoint: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ReplicationRow {
    pub replication: usize,
    pub n_effective: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub estimate: Option<f64>,
    pub bound_lower: Option<f64>,
    pub bound_upper: Option<f64>,
    pub changepoint: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StudySummary {
    pub rows: Vec<ReplicationRow>,
    pub rejection_rate: f64,
    /// Binomial standard error of the rejection rate.
    pub standard_error: f64,
    pub mean_estimate: Option<f64>,
    /// Share of replications whose estimate bounds contain the true effect.
    pub bound_coverage: Option<f64>,
    /// Median changepoint over replications that rejected at gamma = 1.
    pub median_changepoint: Option<f64>,
}

fn score_for(test: StudyTest) -> ScoreFunction {
    match test {
        StudyTest::PermutationalT => ScoreFunction::AbsoluteValue,
        _ => ScoreFunction::WilcoxonRank,
    }
}

fn replicate(
    generator: &StudyGenerator,
    analysis: &StudyAnalysis,
    quads: usize,
    seed: u64,
    rep: usize,
) -> Result<ReplicationRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    let set = match generator {
        StudyGenerator::Continuous(w) => {
            assemble_quadruples(&generate_continuous_with(w, quads, &mut rng)?, OutcomeKind::Continuous)?
        }
        StudyGenerator::Binary(w) => assemble_quadruples(&generate_binary_with(w, quads, &mut rng)?, OutcomeKind::Binary)?,
    };
    let mut row = ReplicationRow {
        replication: rep,
        n_effective: 0,
        statistic: 0.0,
        p_value: 1.0,
        reject: false,
        estimate: None,
        bound_lower: None,
        bound_upper: None,
        changepoint: None,
    };
    let score = score_for(analysis.test);
    let result = match analysis.test {
        StudyTest::SignedRank | StudyTest::PermutationalT => sensitivity::worst_case_pvalue(
            &set,
            analysis.tau0,
            &score,
            analysis.gamma,
            Direction::Upper,
            analysis.sided,
        ),
        StudyTest::Sate => sensitivity::sate_pvalue(&set, analysis.tau0, analysis.gamma, Direction::Upper, analysis.sided),
        StudyTest::McNemar => {
            let e = binary::eligible_quadruples(&set)?;
            binary::mcnemar_sensitivity_pvalue(&e.eligible, analysis.gamma, Direction::Upper, analysis.sided)
        }
    };
    match result {
        Ok(r) => {
            row.n_effective = r.n_effective;
            row.statistic = r.statistic;
            row.p_value = r.p_value.upper();
            row.reject = row.p_value <= analysis.alpha;
        }
        // nothing to test: count as a non-rejection
        Err(Error::Degenerate(_)) | Err(Error::NoInformation(_)) => {}
        Err(e) => return Err(e),
    }
    if let (Some(g), OutcomeKind::Continuous, StudyTest::SignedRank | StudyTest::PermutationalT) =
        (analysis.estimate_gamma, set.outcome_kind, analysis.test)
    {
        row.estimate = Some(match analysis.test {
            StudyTest::SignedRank => inference::hodges_lehmann(&set)?,
            _ => crate::stats::mean(&set.contrasts()),
        });
        let b = sensitivity::estimate_bounds(&set, g, &score)?;
        row.bound_lower = Some(b.lower);
        row.bound_upper = Some(b.upper);
    }
    if analysis.changepoint {
        match sensitivity::changepoint_gamma(&set, analysis.tau0, &score, analysis.alpha, analysis.sided) {
            Ok(cp) => row.changepoint = cp.gamma(),
            Err(Error::Degenerate(_)) | Err(Error::NoInformation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(row)
}

/// Runs `reps` independent replications. Replication `k` draws from stream
/// `k` of a generator seeded with `seed`, so results do not depend on
/// evaluation order.
pub fn level_power_study(
    generator: &StudyGenerator,
    analysis: &StudyAnalysis,
    quads: usize,
    reps: usize,
    seed: u64,
) -> Result<StudySummary> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    if !(analysis.alpha > 0.0 && analysis.alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", analysis.alpha)));
    }
    let kind_ok = matches!(
        (generator, analysis.test),
        (StudyGenerator::Binary(_), StudyTest::McNemar)
            | (StudyGenerator::Continuous(_), StudyTest::SignedRank | StudyTest::PermutationalT | StudyTest::Sate)
    );
    if !kind_ok {
        return Err(Error::OutcomeKind(format!(
            "test {:?} does not apply to this generator's outcome kind",
            analysis.test
        )));
    }
    let rows = (0..reps)
        .map(|rep| replicate(generator, analysis, quads, seed, rep))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let rate = rows.iter().filter(|r| r.reject).count() as f64 / n;
    let estimates: Vec<f64> = rows.iter().filter_map(|r| r.estimate).collect();
    let mean_estimate = (!estimates.is_empty()).then(|| crate::stats::mean(&estimates));
    let bound_coverage = match generator.true_effect() {
        Some(t) if analysis.estimate_gamma.is_some() => {
            let hits = rows
                .iter()
                .filter(|r| matches!((r.bound_lower, r.bound_upper), (Some(lo), Some(hi)) if lo <= t && t <= hi))
                .count();
            Some(hits as f64 / n)
        }
        _ => None,
    };
    let cps: Vec<f64> = rows.iter().filter_map(|r| r.changepoint).collect();
    let median_changepoint = (!cps.is_empty()).then(|| crate::stats::median(&cps));
    Ok(StudySummary {
        rows,
        rejection_rate: rate,
        standard_error: libm::sqrt(rate * (1.0 - rate) / n),
        mean_estimate,
        bound_coverage,
        median_changepoint,
    })
}
