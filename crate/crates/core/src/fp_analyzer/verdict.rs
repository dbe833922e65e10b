use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ground_truth::{Epsilon, EpsilonKind};

/// Outcome of comparing a claim with the true level and the auditor's power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "TP")]
    TruePositive,
    #[serde(rename = "TN")]
    TrueNegative,
    #[serde(rename = "FP")]
    FalsePositive,
    #[serde(rename = "FN")]
    FalseNegative,
}

impl Verdict {
    pub fn code(self) -> &'static str {
        match self {
            Verdict::TruePositive => "TP",
            Verdict::TrueNegative => "TN",
            Verdict::FalsePositive => "FP",
            Verdict::FalseNegative => "FN",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A verdict with the triple that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub verdict: Verdict,
    pub eps_c: f64,
    pub eps_star: Epsilon,
    #[serde(with = "crate::serde_ext")]
    pub xi: f64,
    /// The auditor claims more power than the mechanism has (epsilon* < xi*).
    pub infeasible: bool,
    /// epsilon* is only a lower bound and the claim does not fall below it, so
    /// whether the claim is violated is unknown.
    pub indeterminate: bool,
}

/// Classifies a claim. The audit passes when xi <= eps_c; the claim is
/// violated when eps_c < eps*.
pub fn classify(eps_c: f64, eps_star: Epsilon, xi: f64) -> AuditVerdict {
    let passes = xi <= eps_c;
    let violated = eps_c < eps_star.value;
    let verdict = match (passes, violated) {
        (true, true) => Verdict::FalsePositive,
        (true, false) => Verdict::TruePositive,
        (false, true) => Verdict::TrueNegative,
        (false, false) => Verdict::FalseNegative,
    };
    AuditVerdict {
        verdict,
        eps_c,
        eps_star,
        xi,
        infeasible: eps_star.kind == EpsilonKind::Exact && eps_star.value < xi,
        indeterminate: eps_star.kind == EpsilonKind::LowerBound && !violated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrants() {
        let e = Epsilon::exact;
        assert_eq!(classify(1.0, e(2.0), 0.8).verdict, Verdict::FalsePositive);
        assert_eq!(classify(1.0, e(0.5), 1.3).verdict, Verdict::FalseNegative);
        assert_eq!(classify(2.0, e(2.0), 2.0).verdict, Verdict::TruePositive);
        assert_eq!(classify(1.0, e(2.0), 1.5).verdict, Verdict::TrueNegative);
        assert_eq!(
            classify(1.0, e(f64::INFINITY), 0.5).verdict,
            Verdict::FalsePositive
        );
    }

    #[test]
    fn flags() {
        assert!(classify(1.0, Epsilon::exact(0.5), 0.7).infeasible);
        let v = classify(1.0, Epsilon::lower_bound(0.5), 0.7);
        assert!(v.indeterminate && !v.infeasible);
        assert!(!classify(1.0, Epsilon::lower_bound(1.5), 0.7).indeterminate);
    }
}
