//! Synthetic data from the latent outcome model.
//!
//! Each quadruple `i` has a unit effect `mu`, a group difference `beta` and a
//! time trend `alpha`. Member `j` of period `t` has outcome under control
//!
//! ```text
//! r = mu + beta * Z + alpha * 1{t = 2} + eps
//! ```
//!
//! and treated period-2 members add the treatment effect. Hidden bias enters
//! through confounders `u` in `[0, 1]`: assignment within period `t` favours
//! the member with larger `lambda_t * u`, and the sign of the residual
//! differences-in-differences is tilted by `delta_t * u`.
//!
//! The records expose only observables. Quadruple membership is carried in the
//! category covariate `block`, plus a real covariate `x`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::model::{build_quadruple, CovariateValue, MatchedPair, OutcomeKind, Period, QuadrupleSet, UnitRecord};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const BLOCK: &str = "block";
pub const COVARIATE: &str = "x";

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ResidualDist {
    Normal { sd: f64 },
    /// Centred lognormal: `exp(sigma * N(0,1)) - exp(sigma^2 / 2)`.
    LogNormal { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EffectModel {
    Constant(f64),
    /// Per-quadruple effects drawn from `N(mean, sd)` and recentred so their
    /// sample average is exactly `mean`.
    Heterogeneous { mean: f64, sd: f64 },
}

impl EffectModel {
    /// The true sample-average effect.
    pub fn average(&self) -> f64 {
        match *self {
            EffectModel::Constant(t) => t,
            EffectModel::Heterogeneous { mean, .. } => mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConfounderDist {
    Uniform,
    /// Each `u` is 0 or 1 with equal probability.
    Corners,
}

/// Distributions of the latent quantities for continuous outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LatentWorld {
    pub mu_mean: f64,
    pub mu_sd: f64,
    pub alpha_mean: f64,
    pub alpha_sd: f64,
    pub beta_mean: f64,
    pub beta_sd: f64,
    pub effect: EffectModel,
    pub residual: ResidualDist,
    /// Assignment log-odds biases for periods 1 and 2.
    pub lambda: [f64; 2],
    /// Residual-sign log-odds biases for periods 1 and 2.
    pub delta: [f64; 2],
    pub confounder: ConfounderDist,
}

impl Default for LatentWorld {
    fn default() -> Self {
        LatentWorld {
            mu_mean: 0.0,
            mu_sd: 1.0,
            alpha_mean: 0.0,
            alpha_sd: 0.0,
            beta_mean: 0.0,
            beta_sd: 0.0,
            effect: EffectModel::Constant(0.0),
            residual: ResidualDist::Normal { sd: 1.0 },
            lambda: [0.0; 2],
            delta: [0.0; 2],
            confounder: ConfounderDist::Uniform,
        }
    }
}

fn check_sd(name: &str, sd: f64) -> Result<()> {
    if !(sd >= 0.0) || !sd.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {sd}")));
    }
    Ok(())
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {x}")));
    }
    Ok(())
}

impl LatentWorld {
    pub fn validate(&self) -> Result<()> {
        check_sd("mu_sd", self.mu_sd)?;
        check_sd("alpha_sd", self.alpha_sd)?;
        check_sd("beta_sd", self.beta_sd)?;
        for (n, v) in [("mu_mean", self.mu_mean), ("alpha_mean", self.alpha_mean), ("beta_mean", self.beta_mean)] {
            check_finite(n, v)?;
        }
        match self.effect {
            EffectModel::Constant(t) => check_finite("effect", t)?,
            EffectModel::Heterogeneous { mean, sd } => {
                check_finite("effect mean", mean)?;
                check_sd("effect sd", sd)?;
            }
        }
        match self.residual {
            ResidualDist::Normal { sd } => check_sd("residual sd", sd)?,
            ResidualDist::LogNormal { sigma } => check_sd("residual sigma", sigma)?,
        }
        for v in self.lambda.iter().chain(&self.delta) {
            check_finite("bias", *v)?;
        }
        Ok(())
    }
}

fn normal(mean: f64, sd: f64, rng: &mut impl Rng) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).map(|n| n.sample(rng)).unwrap_or(mean)
}

fn residual(dist: ResidualDist, rng: &mut impl Rng) -> f64 {
    match dist {
        ResidualDist::Normal { sd } => normal(0.0, sd, rng),
        ResidualDist::LogNormal { sigma } => {
            let draw = LogNormal::new(0.0, sigma).map(|d| d.sample(rng)).unwrap_or(1.0);
            draw - libm::exp(0.5 * sigma * sigma)
        }
    }
}

fn confounder(dist: ConfounderDist, rng: &mut impl Rng) -> f64 {
    match dist {
        ConfounderDist::Uniform => rng.random::<f64>(),
        ConfounderDist::Corners => {
            if rng.random::<bool>() {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Member index (0 or 1) that is treated in a period with assignment bias
/// `lambda` and confounders `u`.
fn assign(lambda: f64, u: [f64; 2], rng: &mut impl Rng) -> usize {
    let p_first = logistic(lambda * (u[0] - u[1]));
    if rng.random::<f64>() < p_first {
        0
    } else {
        1
    }
}

fn record(i: usize, period: Period, member: usize, treated: bool, outcome: f64, x: f64) -> UnitRecord {
    UnitRecord::new(format!("q{i}-t{}-m{}", period.index(), member + 1), period, treated, outcome)
        .with_category(BLOCK, &format!("{i}"))
        .with_real(COVARIATE, x)
}

fn heterogeneous_effects(model: EffectModel, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    match model {
        EffectModel::Constant(t) => alloc::vec![t; n],
        EffectModel::Heterogeneous { mean, sd } => {
            let raw: Vec<f64> = (0..n).map(|_| normal(mean, sd, rng)).collect();
            let shift = mean - raw.iter().sum::<f64>() / n as f64;
            raw.into_iter().map(|t| t + shift).collect()
        }
    }
}

/// Draws `quads` quadruples into an existing stream.
pub fn generate_continuous_with(world: &LatentWorld, quads: usize, rng: &mut impl Rng) -> Result<Vec<UnitRecord>> {
    world.validate()?;
    if quads == 0 {
        return Err(Error::InvalidParameter("at least one quadruple is required".into()));
    }
    let effects = heterogeneous_effects(world.effect, quads, rng);
    let mut out = Vec::with_capacity(4 * quads);
    for (i, &tau) in effects.iter().enumerate() {
        let mu = normal(world.mu_mean, world.mu_sd, rng);
        let alpha = normal(world.alpha_mean, world.alpha_sd, rng);
        let beta = normal(world.beta_mean, world.beta_sd, rng);
        let mut u = [[0.0; 2]; 2];
        let mut treated = [0usize; 2];
        for t in 0..2 {
            u[t] = [confounder(world.confounder, rng), confounder(world.confounder, rng)];
            treated[t] = assign(world.lambda[t], u[t], rng);
        }
        // v = +1 when member 1 is treated in period 2; b = v1 * v2
        let v_of = |k: usize| if k == 0 { 1.0 } else { -1.0 };
        let b = v_of(treated[0]) * v_of(treated[1]);
        let mut eps = [[0.0; 2]; 2];
        for row in eps.iter_mut() {
            *row = [residual(world.residual, rng), residual(world.residual, rng)];
        }
        let y0 = (eps[1][0] - eps[1][1]) - b * (eps[0][0] - eps[0][1]);
        let x1 = u[0][0] - u[0][1];
        let x2 = u[1][0] - u[1][1];
        let tilt = world.delta[1] * x2 - b * world.delta[0] * x1;
        let want_positive = rng.random::<f64>() < logistic(tilt);
        if y0 != 0.0 && (y0 > 0.0) != want_positive {
            for row in eps.iter_mut() {
                row.swap(0, 1);
            }
        }
        let x = mu + normal(0.0, 0.5, rng);
        for (t, period) in [Period::Pre, Period::Post].into_iter().enumerate() {
            for m in 0..2 {
                let z = treated[t] == m;
                let mut y = mu + eps[t][m];
                if z {
                    y += beta;
                }
                if period == Period::Post {
                    y += alpha;
                    if z {
                        y += tau;
                    }
                }
                out.push(record(i, period, m, z, y, x));
            }
        }
    }
    Ok(out)
}

/// `4 * quads` records; identical for identical seeds.
pub fn generate_continuous(world: &LatentWorld, quads: usize, seed: u64) -> Result<Vec<UnitRecord>> {
    generate_continuous_with(world, quads, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Latent logit model for 0/1 outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BinaryWorld {
    pub mu_mean: f64,
    pub mu_sd: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Confounder coefficients on the logit for periods 1 and 2.
    pub delta: [f64; 2],
    pub lambda: [f64; 2],
    /// Treatment effect on the logit scale for treated period-2 members.
    pub tau_logit: f64,
    pub confounder: ConfounderDist,
}

impl Default for BinaryWorld {
    fn default() -> Self {
        BinaryWorld {
            mu_mean: 0.0,
            mu_sd: 0.0,
            alpha: 0.0,
            beta: 0.0,
            delta: [0.0; 2],
            lambda: [0.0; 2],
            tau_logit: 0.0,
            confounder: ConfounderDist::Uniform,
        }
    }
}

impl BinaryWorld {
    pub fn validate(&self) -> Result<()> {
        check_sd("mu_sd", self.mu_sd)?;
        for (n, v) in [
            ("mu_mean", self.mu_mean),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("tau_logit", self.tau_logit),
        ] {
            check_finite(n, v)?;
        }
        for v in self.lambda.iter().chain(&self.delta) {
            check_finite("bias", *v)?;
        }
        Ok(())
    }
}

pub fn generate_binary_with(world: &BinaryWorld, quads: usize, rng: &mut impl Rng) -> Result<Vec<UnitRecord>> {
    world.validate()?;
    if quads == 0 {
        return Err(Error::InvalidParameter("at least one quadruple is required".into()));
    }
    let mut out = Vec::with_capacity(4 * quads);
    for i in 0..quads {
        let mu = normal(world.mu_mean, world.mu_sd, rng);
        let x = mu + normal(0.0, 0.5, rng);
        for (t, period) in [Period::Pre, Period::Post].into_iter().enumerate() {
            let u = [confounder(world.confounder, rng), confounder(world.confounder, rng)];
            let treated = assign(world.lambda[t], u, rng);
            for m in 0..2 {
                let z = treated == m;
                let mut logit = mu + world.delta[t] * u[m];
                if z {
                    logit += world.beta;
                }
                if period == Period::Post {
                    logit += world.alpha;
                    if z {
                        logit += world.tau_logit;
                    }
                }
                let y = if rng.random::<f64>() < logistic(logit) { 1.0 } else { 0.0 };
                out.push(record(i, period, m, z, y, x));
            }
        }
    }
    Ok(out)
}

pub fn generate_binary(world: &BinaryWorld, quads: usize, seed: u64) -> Result<Vec<UnitRecord>> {
    generate_binary_with(world, quads, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Groups generated records into quadruples by their `block` covariate, in
/// order of first appearance.
pub fn assemble_quadruples(records: &[UnitRecord], kind: OutcomeKind) -> Result<QuadrupleSet> {
    let mut order: Vec<String> = Vec::new();
    let mut blocks: BTreeMap<String, [[Option<&UnitRecord>; 2]; 2]> = BTreeMap::new();
    for r in records {
        let block = match r.covariates.get(BLOCK) {
            Some(CovariateValue::Category(b)) => b.clone(),
            _ => return Err(Error::Structural(format!("record {} has no '{BLOCK}' label", r.id))),
        };
        let period = r
            .period()
            .ok_or_else(|| Error::Structural(format!("record {} has period {}", r.id, r.period)))?;
        let slot = blocks.entry(block.clone()).or_insert_with(|| {
            order.push(block.clone());
            [[None; 2]; 2]
        });
        let cell = &mut slot[period.index() as usize - 1][usize::from(!r.is_treated())];
        if cell.is_some() {
            return Err(Error::Structural(format!(
                "block {block} has two {} units in period {}",
                if r.is_treated() { "treated" } else { "control" },
                period.index()
            )));
        }
        *cell = Some(r);
    }
    let mut quads = Vec::with_capacity(order.len());
    for block in order {
        let slot = &blocks[&block];
        let get = |t: usize, k: usize| {
            slot[t][k]
                .cloned()
                .ok_or_else(|| Error::Structural(format!("block {block} is missing a unit")))
        };
        let pre = MatchedPair::new(Period::Pre, get(0, 0)?, get(0, 1)?)?;
        let post = MatchedPair::new(Period::Post, get(1, 0)?, get(1, 1)?)?;
        quads.push(build_quadruple(pre, post)?);
    }
    QuadrupleSet::new(quads, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binary;
    use crate::stats;

    fn contrasts(world: &LatentWorld, n: usize, seed: u64) -> Vec<f64> {
        let recs = generate_continuous(world, n, seed).unwrap();
        assemble_quadruples(&recs, OutcomeKind::Continuous).unwrap().contrasts()
    }

    fn within_three_se(d: &[f64], target: f64) -> bool {
        let se = libm::sqrt(stats::variance(d) / d.len() as f64);
        (stats::mean(d) - target).abs() <= 3.0 * se
    }

    #[test]
    fn record_count_and_determinism() {
        let w = LatentWorld::default();
        let a = generate_continuous(&w, 7, 11).unwrap();
        assert_eq!(a.len(), 28);
        assert_eq!(a, generate_continuous(&w, 7, 11).unwrap());
        assert_ne!(a, generate_continuous(&w, 7, 12).unwrap());
        assert!(generate_continuous(&w, 0, 1).is_err());
        let bad = LatentWorld { mu_sd: -1.0, ..w };
        assert!(generate_continuous(&bad, 3, 1).is_err());
    }

    #[test]
    fn null_and_shift_means() {
        let w = LatentWorld::default();
        assert!(within_three_se(&contrasts(&w, 5000, 1), 0.0));
        let w = LatentWorld { effect: EffectModel::Constant(2.0), ..w };
        assert!(within_three_se(&contrasts(&w, 5000, 2), 2.0));
    }

    #[test]
    fn additive_terms_cancel() {
        let w = LatentWorld {
            alpha_mean: 3.0,
            alpha_sd: 2.0,
            beta_mean: -4.0,
            beta_sd: 1.5,
            mu_sd: 5.0,
            ..LatentWorld::default()
        };
        let d = contrasts(&w, 10_000, 3);
        assert!(within_three_se(&d, 0.0));
        // symmetry about zero: positive-sign count is Binomial(n, 1/2)
        let pos = d.iter().filter(|x| **x > 0.0).count() as f64;
        assert!((pos - 5000.0).abs() <= 3.0 * 50.0);
    }

    #[test]
    fn heterogeneous_effects_average_exactly() {
        let w = LatentWorld {
            effect: EffectModel::Heterogeneous { mean: 1.5, sd: 2.0 },
            residual: ResidualDist::Normal { sd: 0.0 },
            ..LatentWorld::default()
        };
        let d = contrasts(&w, 50, 4);
        assert!((stats::mean(&d) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn residual_tilt_skews_signs() {
        // residual tilt alone leaves signs balanced; opposing assignment bias
        // across periods is what skews them
        let w = LatentWorld {
            delta: [2.0, 2.0],
            confounder: ConfounderDist::Corners,
            ..LatentWorld::default()
        };
        let d = contrasts(&w, 4000, 5);
        let pos = d.iter().filter(|x| **x > 0.0).count() as f64 / d.len() as f64;
        assert!((pos - 0.5).abs() < 0.03);
        let w = LatentWorld {
            lambda: [-2.0, 2.0],
            delta: [2.0, 2.0],
            confounder: ConfounderDist::Corners,
            ..LatentWorld::default()
        };
        let d = contrasts(&w, 4000, 5);
        let pos = d.iter().filter(|x| **x > 0.0).count() as f64 / d.len() as f64;
        assert!(pos > 0.55);
    }

    #[test]
    fn assembles_in_block_order() {
        let recs = generate_continuous(&LatentWorld::default(), 3, 9).unwrap();
        let q = assemble_quadruples(&recs, OutcomeKind::Continuous).unwrap();
        assert_eq!(q.len(), 3);
        assert!(q.quads[0].pre.treated.id.starts_with("q0-"));
        assert!(assemble_quadruples(&recs[..3], OutcomeKind::Continuous).is_err());
    }

    #[test]
    fn binary_examples() {
        let recs = generate_binary(&BinaryWorld::default(), 4000, 6).unwrap();
        let rate = recs.iter().map(|r| r.outcome).sum::<f64>() / recs.len() as f64;
        assert!((rate - 0.5).abs() < 0.02);

        let rare = BinaryWorld { mu_mean: -12.0, ..BinaryWorld::default() };
        let q = assemble_quadruples(&generate_binary(&rare, 500, 7).unwrap(), OutcomeKind::Binary).unwrap();
        assert!(binary::eligible_quadruples(&q).unwrap().eligible.len() <= 1);

        let effect = BinaryWorld { tau_logit: 1.5, ..BinaryWorld::default() };
        let q = assemble_quadruples(&generate_binary(&effect, 2000, 8).unwrap(), OutcomeKind::Binary).unwrap();
        let e = binary::eligible_quadruples(&q).unwrap().eligible;
        assert!(binary::mcnemar_statistic(&e) as f64 > e.len() as f64 / 2.0);
    }
}
