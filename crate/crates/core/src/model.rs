//! Observational units, matched pairs and matched quadruples.
//!
//! Every pair stores its treated member first. With that positional
//! convention the assignment sign `V_i` and the cross-period product `B_i`
//! are both `+1`, the randomization distribution is carried entirely by flips
//! of the sign `S_i`, and the contrast reduces to
//! `(post treated - post control) - (pre treated - pre control)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::stats::sign;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Pre-treatment (`1`) or post-treatment (`2`) period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Period {
    Pre,
    Post,
}

impl Period {
    pub fn index(self) -> u8 {
        match self {
            Period::Pre => 1,
            Period::Post => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Period> {
        match i {
            1 => Some(Period::Pre),
            2 => Some(Period::Post),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum CovariateValue {
    Real(f64),
    Category(String),
}

impl CovariateValue {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            CovariateValue::Real(x) => Some(*x),
            CovariateValue::Category(_) => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            CovariateValue::Real(_) => None,
            CovariateValue::Category(c) => Some(c),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            CovariateValue::Real(_) => "continuous",
            CovariateValue::Category(_) => "nominal",
        }
    }
}

/// One observation.
///
/// `period` and `z` are kept as raw integers so that ingestion can hand
/// malformed rows to [`validate_dataset`] instead of failing early.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct UnitRecord {
    pub id: String,
    pub period: u8,
    pub z: u8,
    pub outcome: f64,
    pub covariates: BTreeMap<String, CovariateValue>,
}

impl UnitRecord {
    pub fn new(id: impl Into<String>, period: Period, treated: bool, outcome: f64) -> Self {
        UnitRecord {
            id: id.into(),
            period: period.index(),
            z: treated as u8,
            outcome,
            covariates: BTreeMap::new(),
        }
    }

    pub fn with_real(mut self, name: &str, value: f64) -> Self {
        self.covariates
            .insert(name.to_string(), CovariateValue::Real(value));
        self
    }

    pub fn with_category(mut self, name: &str, label: &str) -> Self {
        self.covariates
            .insert(name.to_string(), CovariateValue::Category(label.to_string()));
        self
    }

    pub fn is_treated(&self) -> bool {
        self.z == 1
    }

    pub fn period(&self) -> Option<Period> {
        Period::from_index(self.period)
    }
}

/// A treated unit and a control unit from the same period, treated first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MatchedPair {
    pub period: Period,
    pub treated: UnitRecord,
    pub control: UnitRecord,
}

impl MatchedPair {
    pub fn new(period: Period, treated: UnitRecord, control: UnitRecord) -> Result<Self> {
        if treated.z != 1 || control.z != 0 {
            return Err(Error::Structural(format!(
                "pair ({}, {}) must list a treated unit then a control unit",
                treated.id, control.id
            )));
        }
        if treated.period != period.index() || control.period != period.index() {
            return Err(Error::Structural(format!(
                "pair ({}, {}) mixes periods {} and {} but was declared period {}",
                treated.id,
                control.id,
                treated.period,
                control.period,
                period.index()
            )));
        }
        Ok(MatchedPair {
            period,
            treated,
            control,
        })
    }

    /// Treated-minus-control outcome difference.
    pub fn difference(&self) -> f64 {
        self.treated.outcome - self.control.outcome
    }

    pub fn label(&self) -> String {
        format!("({}, {})", self.treated.id, self.control.id)
    }
}

/// One pre-period pair joined to one post-period pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Quadruple {
    pub pre: MatchedPair,
    pub post: MatchedPair,
    /// Differences-in-differences contrast.
    pub d: f64,
    /// Period-2 assignment sign; `+1` under the treated-first convention.
    pub v: i8,
    /// Product of the period-1 and period-2 assignment signs; `+1` as above.
    pub b: i8,
    /// Sign of the contrast.
    pub s: i8,
    /// Magnitude of the contrast.
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct QuadrupleSet {
    pub quads: Vec<Quadruple>,
    pub outcome_kind: OutcomeKind,
}

impl QuadrupleSet {
    /// Builds a set, rejecting any unit that appears in two quadruples.
    pub fn new(quads: Vec<Quadruple>, outcome_kind: OutcomeKind) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for (i, q) in quads.iter().enumerate() {
            for unit in [&q.pre.treated, &q.pre.control, &q.post.treated, &q.post.control] {
                let key = (unit.period, unit.id.clone());
                if let Some(prev) = seen.insert(key, i) {
                    return Err(Error::Structural(format!(
                        "unit {} (period {}) appears in quadruples {} and {}",
                        unit.id, unit.period, prev, i
                    )));
                }
            }
        }
        Ok(QuadrupleSet {
            quads,
            outcome_kind,
        })
    }

    /// Contrasts in stored order.
    pub fn contrasts(&self) -> Vec<f64> {
        self.quads.iter().map(|q| q.d).collect()
    }

    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }
}

fn check_periods(pre: &MatchedPair, post: &MatchedPair) -> Result<()> {
    if pre.period != Period::Pre {
        return Err(Error::Structural(format!(
            "pre pair {} is from period {}, expected 1",
            pre.label(),
            pre.period.index()
        )));
    }
    if post.period != Period::Post {
        return Err(Error::Structural(format!(
            "post pair {} is from period {}, expected 2",
            post.label(),
            post.period.index()
        )));
    }
    Ok(())
}

/// `(post treated - post control) - (pre treated - pre control)`.
pub fn did_contrast(pre: &MatchedPair, post: &MatchedPair) -> Result<f64> {
    check_periods(pre, post)?;
    Ok(post.difference() - pre.difference())
}

pub fn build_quadruple(pre: MatchedPair, post: MatchedPair) -> Result<Quadruple> {
    let d = did_contrast(&pre, &post)?;
    let (v, b) = (1i8, 1i8);
    // d = v * post_diff - v * b * pre_diff, which is the contrast above when v = b = 1.
    Ok(Quadruple {
        pre,
        post,
        d,
        v,
        b,
        s: sign(d),
        a: d.abs(),
    })
}

/// One problem found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Diagnostic {
    /// Position of the record in the input.
    pub index: usize,
    pub record_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ValidationReport {
    pub passed: bool,
    pub diagnostics: Vec<Diagnostic>,
}

/// Checks domains and covariate-schema consistency. Never fails; problems
/// are returned as per-record diagnostics.
pub fn validate_dataset(records: &[UnitRecord], kind: OutcomeKind) -> ValidationReport {
    let mut diagnostics = Vec::new();
    let mut push = |index: usize, rec: &UnitRecord, message: String| {
        diagnostics.push(Diagnostic {
            index,
            record_id: rec.id.clone(),
            message,
        })
    };

    let schema: Option<BTreeMap<&str, &'static str>> = records.first().map(|r| {
        r.covariates
            .iter()
            .map(|(k, v)| (k.as_str(), v.kind_name()))
            .collect()
    });

    for (i, rec) in records.iter().enumerate() {
        if Period::from_index(rec.period).is_none() {
            push(i, rec, format!("period {} is not 1 or 2", rec.period));
        }
        if rec.z > 1 {
            push(i, rec, format!("treatment indicator {} is not 0 or 1", rec.z));
        }
        if !rec.outcome.is_finite() {
            push(i, rec, format!("outcome {} is not finite", rec.outcome));
        } else if kind == OutcomeKind::Binary && rec.outcome != 0.0 && rec.outcome != 1.0 {
            push(i, rec, format!("binary outcome {} is not 0 or 1", rec.outcome));
        }
        if let Some(schema) = &schema {
            for (name, value) in &rec.covariates {
                match schema.get(name.as_str()) {
                    None => push(i, rec, format!("covariate '{}' is not in the schema", name)),
                    Some(&k) if k != value.kind_name() => push(
                        i,
                        rec,
                        format!("covariate '{}' is {} but the schema says {}", name, value.kind_name(), k),
                    ),
                    Some(_) => {}
                }
                if let CovariateValue::Real(x) = value {
                    if !x.is_finite() {
                        push(i, rec, format!("covariate '{}' is not finite", name));
                    }
                }
            }
            for name in schema.keys() {
                if !rec.covariates.contains_key(*name) {
                    push(i, rec, format!("covariate '{}' is missing", name));
                }
            }
        }
    }

    ValidationReport {
        passed: diagnostics.is_empty(),
        diagnostics,
    }
}
