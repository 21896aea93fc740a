//! Matched differences-in-differences.
//!
//! The crate builds a three-stage match (treated to control within each of
//! two periods, then pre-period pairs to post-period pairs), forms matched
//! quadruples and their differences-in-differences contrasts, and runs
//! randomization inference and sensitivity analysis for hidden bias on them.
//!
//! The core is `no_std` (with `alloc`) and performs no IO. File formats and
//! the command-line front end live in the `matched-did-cli` crate.
//!
//! Module map:
//!
//! - [`model`]: unit records, matched pairs, quadruples and the contrast.
//! - [`matcher`]: within-period and cross-period matching, balance reports.
//! - [`inference`]: sign-score tests, exact null distributions, Hodges-Lehmann
//!   estimation and confidence intervals at no hidden bias.
//! - [`sensitivity`]: two- and one-parameter bounds, amplification, worst-case
//!   p-values, changepoints, estimate bounds and the sample-average test.
//! - [`binary`]: eligibility filtering and McNemar sensitivity for 0/1 outcomes.
//! - [`oracle`]: brute-force optimizers, enumeration oracles, data generators
//!   and the level/power study harness.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod binary;
pub mod error;
pub mod inference;
pub mod matcher;
pub mod model;
pub mod oracle;
pub mod sensitivity;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    CovariateValue, MatchedPair, OutcomeKind, Period, Quadruple, QuadrupleSet, UnitRecord,
};
