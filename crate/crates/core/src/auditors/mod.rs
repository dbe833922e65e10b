//! The four blackbox auditors.
//!
//! Each auditor receives a `&dyn Sampler` and an [`AdjacentPair`] and nothing
//! else; none of them can reach a mechanism's density.

mod deltasiege;
mod dpsgd;
mod dpsniper;
mod mpl;
mod surrogate;
mod witness;

use serde::{Deserialize, Serialize};

pub use deltasiege::{deltasiege_audit, DeltaSiegeConfig};
pub use dpsgd::{dpsgd_audit, DpsgdAuditConfig};
pub use dpsniper::{dpsniper_audit, dpsniper_witness, DpSniperConfig};
pub use mpl::{mpl_audit, MplConfig};
pub use surrogate::SurrogateFn;
pub use witness::{Orientation, Region, WitnessSet};

use crate::error::{Error, Result};
use crate::estimators::PowerEstimate;
use crate::mechanisms::{AdjacentPair, SampleBatch, Sampler};
use crate::rng;

/// Draws `n` outputs on `input` under a seed derived from `seed` and `label`.
fn draw(
    sampler: &dyn Sampler,
    input: &[f64],
    seed: u64,
    label: &str,
    n: usize,
) -> Result<SampleBatch> {
    sampler.sample_batch(input, rng::derive(seed, label), n)
}

/// Auditing tool names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    DpSniper,
    Mpl,
    DeltaSiege,
    DpsgdAudit,
}

impl Tool {
    pub fn name(self) -> &'static str {
        match self {
            Tool::DpSniper => "dp_sniper",
            Tool::Mpl => "mpl",
            Tool::DeltaSiege => "delta_siege",
            Tool::DpsgdAudit => "dpsgd_audit",
        }
    }
}

impl std::fmt::Display for Tool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Tool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "dpsniper" | "sniper" => Tool::DpSniper,
            "mpl" => Tool::Mpl,
            "deltasiege" | "siege" => Tool::DeltaSiege,
            "dpsgdaudit" | "dpsgd" => Tool::DpsgdAudit,
            _ => {
                return Err(Error::Unknown {
                    kind: "auditor",
                    name: s.into(),
                })
            }
        })
    }
}

/// An auditor together with its settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tool", rename_all = "snake_case")]
pub enum AuditorConfig {
    DpSniper(DpSniperConfig),
    Mpl(MplConfig),
    DeltaSiege(DeltaSiegeConfig),
    DpsgdAudit(DpsgdAuditConfig),
}

impl AuditorConfig {
    pub fn tool(&self) -> Tool {
        match self {
            AuditorConfig::DpSniper(_) => Tool::DpSniper,
            AuditorConfig::Mpl(_) => Tool::Mpl,
            AuditorConfig::DeltaSiege(_) => Tool::DeltaSiege,
            AuditorConfig::DpsgdAudit(_) => Tool::DpsgdAudit,
        }
    }

    /// The delta at which the auditor's power is measured.
    pub fn delta_c(&self) -> f64 {
        match self {
            AuditorConfig::DeltaSiege(c) => c.delta_c,
            AuditorConfig::DpsgdAudit(c) => c.delta_c,
            _ => 0.0,
        }
    }

    /// Multiplies every sample budget by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            AuditorConfig::DpSniper(c) => AuditorConfig::DpSniper(c.scaled(factor)),
            AuditorConfig::Mpl(c) => AuditorConfig::Mpl(c.scaled(factor)),
            AuditorConfig::DeltaSiege(c) => AuditorConfig::DeltaSiege(c.scaled(factor)),
            AuditorConfig::DpsgdAudit(c) => AuditorConfig::DpsgdAudit(c.scaled(factor)),
        }
    }

    /// Replaces the per-input sample budget.
    pub fn with_samples(&self, n: usize) -> Self {
        match self {
            AuditorConfig::DpSniper(c) => AuditorConfig::DpSniper(DpSniperConfig {
                confidence: c.confidence,
                ..DpSniperConfig::with_budget(c.c, n)
            }),
            AuditorConfig::Mpl(c) => AuditorConfig::Mpl(MplConfig {
                samples: n,
                ..c.clone()
            }),
            AuditorConfig::DeltaSiege(c) => AuditorConfig::DeltaSiege(DeltaSiegeConfig {
                samples: n,
                ..c.clone()
            }),
            AuditorConfig::DpsgdAudit(c) => AuditorConfig::DpsgdAudit(DpsgdAuditConfig {
                samples: n,
                ..c.clone()
            }),
        }
    }

    pub fn run(
        &self,
        sampler: &dyn Sampler,
        pair: &AdjacentPair,
        seed: u64,
    ) -> Result<PowerEstimate> {
        match self {
            AuditorConfig::DpSniper(c) => dpsniper_audit(sampler, pair, c, seed),
            AuditorConfig::Mpl(c) => mpl_audit(sampler, pair, c, seed),
            AuditorConfig::DeltaSiege(c) => deltasiege_audit(sampler, pair, c, seed),
            AuditorConfig::DpsgdAudit(c) => dpsgd_audit(sampler, pair, c, seed),
        }
    }
}
