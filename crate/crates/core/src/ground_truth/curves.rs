use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{bisect, phi, phi_inv};

/// Tradeoff function beta(alpha) of testing M(a') against M(a).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TradeoffCurve {
    /// Laplace noise; `theta_eff` is the privacy-loss bound of the pair.
    Laplace { theta_eff: f64 },
    /// Gaussian noise; `mu` is the mean shift in noise standard deviations.
    Gaussian { mu: f64 },
}

impl TradeoffCurve {
    pub fn gaussian(sensitivity: f64, sigma: f64) -> Self {
        TradeoffCurve::Gaussian {
            mu: sensitivity / sigma,
        }
    }

    /// beta(alpha); rejects alpha outside the open unit interval.
    pub fn beta(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::OutOfRange(format!(
                "type-I error {alpha} is not in (0, 1)"
            )));
        }
        Ok(self.beta_unchecked(alpha))
    }

    pub(crate) fn beta_unchecked(&self, alpha: f64) -> f64 {
        match *self {
            TradeoffCurve::Laplace { theta_eff: t } => {
                let knee = 0.5 * (-t).exp();
                if alpha < knee {
                    1.0 - t.exp() * alpha
                } else if alpha < 0.5 {
                    (-t).exp() / (4.0 * alpha)
                } else {
                    (-t).exp() * (1.0 - alpha)
                }
            }
            TradeoffCurve::Gaussian { mu } => phi(-phi_inv(alpha) - mu),
        }
    }

    /// 1 - beta(alpha), computed without cancellation.
    pub fn power(&self, alpha: f64) -> f64 {
        match *self {
            TradeoffCurve::Laplace { theta_eff: t } if alpha < 0.5 * (-t).exp() => t.exp() * alpha,
            TradeoffCurve::Gaussian { mu } => phi(phi_inv(alpha) + mu),
            _ => 1.0 - self.beta_unchecked(alpha),
        }
    }

    /// Samples `(alpha, beta)` on a uniform alpha grid of `n` interior points.
    pub fn grid(&self, n: usize) -> Vec<(f64, f64)> {
        (1..=n)
            .map(|i| {
                let a = i as f64 / (n + 1) as f64;
                (a, self.beta_unchecked(a))
            })
            .collect()
    }
}

/// beta(alpha) for a given curve.
pub fn tradeoff(curve: &TradeoffCurve, alpha: f64) -> Result<f64> {
    curve.beta(alpha)
}

/// The region an (epsilon, delta)-DP claim allows:
/// beta >= max(0, 1 - delta - e^eps alpha, e^-eps (1 - delta - alpha)).
pub fn claimed_tradeoff(epsilon: f64, delta: f64, alpha: f64) -> f64 {
    let e = epsilon.exp();
    (1.0 - delta - e * alpha)
        .max((1.0 - delta - alpha) / e)
        .max(0.0)
}

/// The curve an auditor with probability floor `c` effectively enforces when the
/// claim is `epsilon`: sets with alpha below `c` are judged as if alpha were `c`.
pub fn pseudo_tradeoff(epsilon: f64, c: f64, alpha: f64) -> f64 {
    (1.0 - epsilon.exp() * alpha.max(c)).max(0.0)
}

/// Privacy profile of a Gaussian mechanism with shift `mu` (in standard deviations).
pub fn gaussian_delta(mu: f64, epsilon: f64) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    let a = phi(-epsilon / mu + mu / 2.0);
    let lb = phi(-epsilon / mu - mu / 2.0);
    let b = if lb > 0.0 {
        (epsilon + lb.ln()).exp()
    } else {
        0.0
    };
    (a - b).max(0.0)
}

/// Smallest epsilon with `gaussian_delta(mu, epsilon) <= delta`, on [0, 50].
pub fn gaussian_inverse_delta(mu: f64, delta: f64) -> Result<f64> {
    inverse_by_bisection(|e| gaussian_delta(mu, e), delta, 50.0)
}

/// Privacy profile of a Laplace mechanism whose privacy loss is bounded by `mu`.
pub fn laplace_delta(mu: f64, epsilon: f64) -> f64 {
    if epsilon >= mu {
        0.0
    } else {
        -((epsilon - mu) / 2.0).exp_m1()
    }
}

pub fn laplace_inverse_delta(mu: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if delta >= laplace_delta(mu, 0.0) {
        return Ok(0.0);
    }
    Ok((mu + 2.0 * (-delta).ln_1p()).max(0.0))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid(format!("delta {delta} is not in [0, 1)")));
    }
    Ok(())
}

/// Inverts a non-increasing profile on [0, `cap`] to 1e-9 in epsilon.
pub(crate) fn inverse_by_bisection<F: Fn(f64) -> f64>(
    profile: F,
    delta: f64,
    cap: f64,
) -> Result<f64> {
    check_delta(delta)?;
    if delta >= profile(0.0) {
        return Ok(0.0);
    }
    if profile(cap) > delta {
        return Err(Error::OutOfRange(format!(
            "delta {delta} needs epsilon beyond {cap}"
        )));
    }
    bisect(|e| profile(e) - delta, 0.0, cap, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn laplace_knee_is_continuous() {
        let c = TradeoffCurve::Laplace { theta_eff: 1.0 };
        let knee = (-1f64).exp() / 2.0;
        assert_abs_diff_eq!(c.beta(knee).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.beta(knee - 1e-12).unwrap(), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(
            c.beta(0.5).unwrap(),
            c.beta(0.5 - 1e-12).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn rejects_alpha_outside_unit_interval() {
        let c = TradeoffCurve::Gaussian { mu: 1.0 };
        assert!(c.beta(0.0).is_err());
        assert!(c.beta(1.0).is_err());
    }

    #[test]
    fn laplace_profile_inverts() {
        let e = laplace_inverse_delta(2.0, laplace_delta(2.0, 0.7)).unwrap();
        assert_abs_diff_eq!(e, 0.7, epsilon = 1e-12);
    }
}
