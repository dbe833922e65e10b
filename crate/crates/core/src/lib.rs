//! Blackbox differential-privacy auditing.
//!
//! The crate is organised around the audit pipeline:
//!
//! * [`mechanisms`]: benchmark and adapted DP mechanisms as seeded samplers, plus
//!   exact density oracles that only ground-truth code may touch.
//! * [`ground_truth`]: true privacy levels, optimal witnesses, tradeoff and
//!   privacy-profile curves.
//! * [`estimators`]: likelihood-ratio classifier, KDE and confidence intervals.
//! * [`auditors`]: DP-Sniper, MPL, Delta-Siege and DPSGD-Audit. They see a
//!   [`mechanisms::Sampler`] and nothing else.
//! * [`fp_analyzer`]: verdicts, closed-form false-positive regions and curator
//!   attack construction.
//! * [`harness`]: configuration, caches, reports and figure reproduction.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod auditors;
pub mod error;
pub mod estimators;
pub mod fp_analyzer;
pub mod ground_truth;
pub mod harness;
pub mod mechanisms;
pub mod numeric;
pub mod rng;
pub mod serde_ext;

pub use error::{Error, Result};
