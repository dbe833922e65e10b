//! Estimation primitives shared by the auditors.

mod intervals;
mod kde;
mod ratio;

use serde::{Deserialize, Serialize};

pub use intervals::{
    bayesian_interval, beta_credible, binomial_lower_bound, binomial_upper_bound, two_branch_power,
};
pub use kde::{binned_kde, kde_fit, BandwidthRule, BinnedDensity, DensityModel};
pub use ratio::{fit_ratio_model, FeatureMap, RatioModel};

use crate::auditors::WitnessSet;

/// max(p, tau): density floor.
pub fn truncate_density(p: f64, tau: f64) -> f64 {
    p.max(tau)
}

/// max(p, c): probability floor.
pub fn truncate_probability(p: f64, c: f64) -> f64 {
    p.max(c)
}

/// An auditor's power estimate with its confidence interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    #[serde(with = "crate::serde_ext")]
    pub xi_star: f64,
    #[serde(with = "crate::serde_ext")]
    pub ci_low: f64,
    #[serde(with = "crate::serde_ext")]
    pub ci_high: f64,
    pub confidence: f64,
    pub witness: WitnessSet,
    /// Total mechanism draws consumed.
    pub sample_count: u64,
    /// Estimated Pr[M(a') in S] at the chosen witness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Estimated Pr[M(a) not in S] at the chosen witness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl PowerEstimate {
    /// Enforces ci_low <= xi_star <= ci_high.
    pub(crate) fn ordered(mut self) -> Self {
        if self.ci_low > self.xi_star {
            self.ci_low = self.xi_star;
        }
        if self.ci_high < self.xi_star {
            self.ci_high = self.xi_star;
        }
        self
    }
}
