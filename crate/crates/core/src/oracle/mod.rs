//! Independent verification engines and simulation.
//!
//! Nothing here is used by the analysis path; these routines exist to check
//! it. [`brute_force_bound`] optimizes the sign probability directly over
//! confounder configurations, [`exact_null_distribution`] enumerates sign
//! vectors, and the generators in [`generate`] draw data from the latent
//! outcome model for Monte Carlo studies in [`study`].

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::inference::NullDistribution;

pub mod generate;
pub mod study;

pub use generate::{
    assemble_quadruples, generate_binary, generate_continuous, BinaryWorld, ConfounderDist, EffectModel,
    LatentWorld, ResidualDist,
};
pub use study::{level_power_study, ReplicationRow, StudyAnalysis, StudyGenerator, StudySummary, StudyTest};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Objective {
    Max,
    Min,
}

/// An extremum of the sign probability and where it was attained.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BruteForceResult {
    pub value: f64,
    /// Assignment log-odds biases for periods 1 and 2.
    pub lambda: [f64; 2],
    /// Residual-asymmetry log-odds biases for periods 1 and 2.
    pub delta: [f64; 2],
    /// Confounders `u[period][member]`.
    pub u: [[f64; 2]; 2],
    pub b: i8,
}

impl BruteForceResult {
    /// True when every confounder value is 0 or 1.
    pub fn at_corner(&self) -> bool {
        self.u.iter().flatten().all(|&x| x == 0.0 || x == 1.0)
    }
}

/// `P(S V = 1)` given the period biases, confounders and `b`.
pub fn sign_probability(lambda: [f64; 2], delta: [f64; 2], u: [[f64; 2]; 2], b: f64) -> f64 {
    let x1 = u[0][0] - u[0][1];
    let x2 = u[1][0] - u[1][1];
    let a = lambda[1] * x2 + b * lambda[0] * x1;
    let c = delta[1] * x2 - b * delta[0] * x1;
    (libm::exp(a + c) + 1.0) / ((1.0 + libm::exp(a)) * (1.0 + libm::exp(c)))
}

/// Optimizes the sign probability over biases bounded by `lambda` and
/// `delta`, confounders in `[0, 1]` and `b = +-1`.
///
/// Biases range over a five-point grid of each interval; confounders over the
/// corners of the unit hypercube. A 0.1-step interior confounder grid is
/// searched with the biases at their interval endpoints.
pub fn brute_force_bound(lambda: f64, delta: f64, objective: Objective) -> Result<BruteForceResult> {
    if !(lambda >= 1.0 && delta >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda and delta must be >= 1, got ({lambda}, {delta})"
        )));
    }
    let (ll, ld) = (libm::log(lambda), libm::log(delta));
    let five = |m: f64| [-m, -0.5 * m, 0.0, 0.5 * m, m];
    let ends = |m: f64| [-m, m];

    let better = |v: f64, best: f64| match objective {
        Objective::Max => v > best,
        Objective::Min => v < best,
    };
    let mut best = BruteForceResult {
        value: match objective {
            Objective::Max => f64::NEG_INFINITY,
            Objective::Min => f64::INFINITY,
        },
        lambda: [0.0; 2],
        delta: [0.0; 2],
        u: [[0.0; 2]; 2],
        b: 1,
    };
    let visit = |lam: [f64; 2], del: [f64; 2], u: [[f64; 2]; 2], b: i8, best: &mut BruteForceResult| {
        let v = sign_probability(lam, del, u, b as f64);
        if better(v, best.value) {
            *best = BruteForceResult {
                value: v,
                lambda: lam,
                delta: del,
                u,
                b,
            };
        }
    };

    let corners: Vec<[[f64; 2]; 2]> = (0..16u8)
        .map(|m| {
            let bit = |k: u8| ((m >> k) & 1) as f64;
            [[bit(0), bit(1)], [bit(2), bit(3)]]
        })
        .collect();
    for l1 in five(ll) {
        for l2 in five(ll) {
            for d1 in five(ld) {
                for d2 in five(ld) {
                    for u in &corners {
                        for b in [-1, 1] {
                            visit([l1, l2], [d1, d2], *u, b, &mut best);
                        }
                    }
                }
            }
        }
    }

    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    for l1 in ends(ll) {
        for l2 in ends(ll) {
            for d1 in ends(ld) {
                for d2 in ends(ld) {
                    for &a in &grid {
                        for &bb in &grid {
                            for &c in &grid {
                                for &d in &grid {
                                    for b in [-1, 1] {
                                        visit([l1, l2], [d1, d2], [[a, bb], [c, d]], b, &mut best);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(best)
}

pub const ENUMERATION_LIMIT: usize = 20;

/// Distribution of the positive-sign score sum under independent
/// `Bernoulli(p_plus)` signs, by listing all `2^n` sign vectors.
pub fn exact_null_distribution(scores: &[f64], p_plus: f64) -> Result<NullDistribution> {
    if scores.len() > ENUMERATION_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "enumeration is limited to {ENUMERATION_LIMIT} scores, got {}",
            scores.len()
        )));
    }
    if !(0.0..=1.0).contains(&p_plus) {
        return Err(Error::InvalidParameter(format!("p_plus must lie in [0, 1], got {p_plus}")));
    }
    let n = scores.len();
    let mut table: Vec<(f64, f64)> = Vec::with_capacity(1 << n);
    for mask in 0u32..(1u32 << n) {
        let mut t = 0.0;
        let mut prob = 1.0;
        for (i, &q) in scores.iter().enumerate() {
            if mask >> i & 1 == 1 {
                t += q;
                prob *= p_plus;
            } else {
                prob *= 1.0 - p_plus;
            }
        }
        table.push((t, prob));
    }
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut support: Vec<(f64, f64)> = Vec::new();
    for (t, p) in table {
        match support.last_mut() {
            Some(last) if (last.0 - t).abs() <= 1e-9 * (1.0 + t.abs()) => last.1 += p,
            _ => support.push((t, p)),
        }
    }
    Ok(NullDistribution { support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensitivity::two_param_bounds;

    #[test]
    fn brute_force_examples() {
        let mx = brute_force_bound(1.0, 1.0, Objective::Max).unwrap();
        let mn = brute_force_bound(1.0, 1.0, Objective::Min).unwrap();
        assert_eq!((mx.value, mn.value), (0.5, 0.5));
        let mx = brute_force_bound(2.0, 2.0, Objective::Max).unwrap();
        let mn = brute_force_bound(2.0, 2.0, Objective::Min).unwrap();
        assert!((mx.value - 0.68).abs() < 1e-12 && (mn.value - 0.32).abs() < 1e-12);
        assert!(mx.at_corner() && mn.at_corner());
        let mx = brute_force_bound(3.0, 1.0, Objective::Max).unwrap();
        assert!((mx.value - 0.5).abs() < 1e-12);
        assert!(brute_force_bound(0.5, 1.0, Objective::Max).is_err());
    }

    #[test]
    fn brute_force_agrees_with_closed_form() {
        for l in [1.0, 2.0, 3.0, 4.0, 5.0] {
            for d in [1.0, 2.0, 3.0, 4.0, 5.0] {
                let cf = two_param_bounds(l, d).unwrap();
                let mx = brute_force_bound(l, d, Objective::Max).unwrap();
                let mn = brute_force_bound(l, d, Objective::Min).unwrap();
                assert!((mx.value - cf.upper).abs() < 1e-12, "({l}, {d})");
                assert!((mn.value - cf.lower).abs() < 1e-12, "({l}, {d})");
            }
        }
    }

    #[test]
    fn enumeration_examples() {
        let d = exact_null_distribution(&[1.0], 0.5).unwrap();
        assert_eq!(d.support, vec![(0.0, 0.5), (1.0, 0.5)]);
        let d = exact_null_distribution(&[1.0, 2.0], 0.5).unwrap();
        assert_eq!(d.support, vec![(0.0, 0.25), (1.0, 0.25), (2.0, 0.25), (3.0, 0.25)]);
        let d = exact_null_distribution(&[1.0, 2.0, 3.0], 2.0 / 3.0).unwrap();
        assert!((d.upper_tail(6.0) - 8.0 / 27.0).abs() < 1e-15);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!(exact_null_distribution(&[1.0; 21], 0.5).is_err());
    }
}
