//! Theoretical quantities: true privacy level, privacy profiles, tradeoff
//! curves and optimal witnesses.
//!
//! Everything here is computed from [`DensityOracle`]; the values are relative
//! to an adjacent pair (the family's canonical pair unless one is given).

mod curves;
mod witness;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use curves::{
    claimed_tradeoff, gaussian_delta, gaussian_inverse_delta, laplace_delta, laplace_inverse_delta,
    pseudo_tradeoff, tradeoff, TradeoffCurve,
};
pub use witness::{optimal_witness, witness_power, witness_probabilities};

use crate::error::{invalid, Error, Result};
use crate::mechanisms::{canonical_pair, AdjacentPair, DensityOracle, Family, MechanismSpec};

/// A claimed (epsilon, delta)-DP guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyClaim {
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
}

impl PrivacyClaim {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(invalid("claimed epsilon must be nonnegative"));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid("claimed delta must lie in [0, 1)"));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonKind {
    Exact,
    /// A proven lower bound; the true level may be larger.
    LowerBound,
}

/// Extended-real privacy level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Epsilon {
    #[serde(with = "crate::serde_ext")]
    pub value: f64,
    pub kind: EpsilonKind,
}

impl Epsilon {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            kind: EpsilonKind::Exact,
        }
    }

    pub fn lower_bound(value: f64) -> Self {
        Self {
            value,
            kind: EpsilonKind::LowerBound,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }

    pub fn is_exact(&self) -> bool {
        self.kind == EpsilonKind::Exact
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = crate::serde_ext::fmt(self.value);
        match self.kind {
            EpsilonKind::Exact => write!(f, "{v}"),
            EpsilonKind::LowerBound => write!(f, ">= {v}"),
        }
    }
}

/// Output distributions of a mechanism on the two inputs of a pair, reduced to
/// what the privacy computations need.
#[derive(Clone, Debug)]
pub(crate) enum Profile {
    /// Scalar Laplace noise with privacy loss bounded by `mu`.
    Laplace {
        mu: f64,
        scale: f64,
        loc_a: f64,
        loc_b: f64,
    },
    /// Scalar Gaussian noise with shift `mu = |loc_a - loc_b| / sigma`.
    Gaussian {
        mu: f64,
        sigma: f64,
        loc_a: f64,
        loc_b: f64,
    },
    /// Bounded-support adapted Laplace noise.
    Bounded { loc_a: f64, loc_b: f64 },
    /// Finitely many outputs with (mass under a, mass under a').
    Atoms(Vec<(f64, f64)>),
}

impl Profile {
    pub(crate) fn new(oracle: &DensityOracle, pair: &AdjacentPair) -> Result<Self> {
        let spec = oracle.spec();
        let (qa, qb) = (&pair.q_a, &pair.q_a_prime);
        match spec.family {
            Family::Laplace => {
                let (la, lb) = (oracle.location(qa)?, oracle.location(qb)?);
                let scale = spec.sensitivity / spec.theta();
                Ok(Profile::Laplace {
                    mu: (la - lb).abs() / scale,
                    scale,
                    loc_a: la,
                    loc_b: lb,
                })
            }
            Family::Gaussian | Family::DpsgdOneStep => {
                let (la, lb) = (oracle.location(qa)?, oracle.location(qb)?);
                let sigma = spec.theta();
                Ok(Profile::Gaussian {
                    mu: (la - lb).abs() / sigma,
                    sigma,
                    loc_a: la,
                    loc_b: lb,
                })
            }
            Family::AdaptedLaplace => Ok(Profile::Bounded {
                loc_a: oracle.location(qa)?,
                loc_b: oracle.location(qb)?,
            }),
            Family::Svt | Family::AdaptedSvt => {
                let outs = oracle.svt_outputs()?;
                let mut atoms = Vec::with_capacity(outs.len());
                for o in &outs {
                    atoms.push((oracle.svt_mass(qa, o)?, oracle.svt_mass(qb, o)?));
                }
                Ok(Profile::Atoms(atoms))
            }
            Family::RapporOneTime => {
                let (pa, _, theta) = oracle.rappor_filter(qa[0])?;
                let (pb, _, _) = oracle.rappor_filter(qb[0])?;
                let m = pa.iter().filter(|p| !pb.contains(p)).count()
                    + pb.iter().filter(|p| !pa.contains(p)).count();
                Ok(Profile::Atoms(rappor_classes(m, theta)))
            }
        }
    }

    /// max |ln ratio| over outputs.
    pub(crate) fn epsilon0(&self) -> f64 {
        match self {
            Profile::Laplace { mu, .. } => *mu,
            Profile::Gaussian { mu, .. } => {
                if *mu > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Profile::Bounded { loc_a, loc_b } => {
                if loc_a == loc_b {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Profile::Atoms(atoms) => atoms
                .iter()
                .filter(|(a, b)| *a > 0.0 || *b > 0.0)
                .map(|(a, b)| (a.ln() - b.ln()).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Hockey-stick divergence, maximised over both orders of the pair.
    pub(crate) fn delta(&self, epsilon: f64) -> Result<f64> {
        match self {
            Profile::Laplace { mu, .. } => Ok(laplace_delta(*mu, epsilon)),
            Profile::Gaussian { mu, .. } => Ok(gaussian_delta(*mu, epsilon)),
            Profile::Bounded { .. } => Err(Error::Unsupported(
                "privacy profile of the adapted Laplace mechanism".into(),
            )),
            Profile::Atoms(atoms) => {
                let e = epsilon.exp();
                let (mut fwd, mut back) = (0.0, 0.0);
                for &(a, b) in atoms {
                    fwd += (a - e * b).max(0.0);
                    back += (b - e * a).max(0.0);
                }
                Ok(f64::max(fwd, back).min(1.0))
            }
        }
    }

    pub(crate) fn inverse_delta(&self, delta: f64) -> Result<f64> {
        match self {
            Profile::Laplace { mu, .. } => laplace_inverse_delta(*mu, delta),
            Profile::Gaussian { mu, .. } => gaussian_inverse_delta(*mu, delta),
            Profile::Bounded { .. } => self.delta(0.0),
            Profile::Atoms(_) => {
                let e0 = self.epsilon0();
                let cap = if e0.is_finite() { e0 } else { 50.0 };
                curves::inverse_by_bisection(|e| self.delta(e).unwrap_or(1.0), delta, cap)
            }
        }
    }
}

/// Outcome classes of one-time RAPPOR on a pair whose Bloom filters differ in
/// `m` bits: class j holds the outputs where exactly j of those bits show a's
/// value. Shared bits have the same law under both inputs and drop out.
fn rappor_classes(m: usize, theta: f64) -> Vec<(f64, f64)> {
    let (keep, flip) = (1.0 - theta / 2.0, theta / 2.0);
    let mut binom = 1.0;
    (0..=m)
        .map(|j| {
            if j > 0 {
                binom = binom * (m - j + 1) as f64 / j as f64;
            }
            let ma = binom * keep.powi(j as i32) * flip.powi((m - j) as i32);
            let mb = binom * flip.powi(j as i32) * keep.powi((m - j) as i32);
            (ma, mb)
        })
        .collect()
}

fn profile(spec: &MechanismSpec, pair: &AdjacentPair) -> Result<Profile> {
    Profile::new(&DensityOracle::new(spec)?, pair)
}

/// True privacy level at `delta_c` on the family's canonical pair.
pub fn true_epsilon(spec: &MechanismSpec, delta_c: f64) -> Result<Epsilon> {
    true_epsilon_for(spec, &canonical_pair(spec), delta_c)
}

/// True privacy level at `delta_c`, relative to the given pair.
///
/// Adapted SVT reports a lower bound: the pair exposes the ratio e^theta2 of
/// the all-bottom output, but other pairs may do worse.
pub fn true_epsilon_for(
    spec: &MechanismSpec,
    pair: &AdjacentPair,
    delta_c: f64,
) -> Result<Epsilon> {
    if !(0.0..1.0).contains(&delta_c) {
        return Err(invalid("delta must lie in [0, 1)"));
    }
    let p = profile(spec, pair)?;
    let value = match (&p, delta_c == 0.0) {
        (_, true) => p.epsilon0(),
        (Profile::Bounded { .. }, false) => {
            return Err(Error::Unsupported(
                "approximate DP level of the adapted Laplace mechanism".into(),
            ))
        }
        (_, false) => p.inverse_delta(delta_c)?,
    };
    Ok(match spec.family {
        Family::AdaptedSvt => Epsilon::lower_bound(value),
        _ => Epsilon::exact(value),
    })
}

/// Privacy profile delta(epsilon) on the canonical pair.
pub fn delta_curve(spec: &MechanismSpec, epsilon: f64) -> Result<f64> {
    delta_curve_for(spec, &canonical_pair(spec), epsilon)
}

pub fn delta_curve_for(spec: &MechanismSpec, pair: &AdjacentPair, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(invalid("epsilon must be nonnegative"));
    }
    profile(spec, pair)?.delta(epsilon)
}

/// Smallest epsilon whose profile value is at most `delta_c` (canonical pair).
pub fn inverse_delta_curve(spec: &MechanismSpec, delta_c: f64) -> Result<f64> {
    inverse_delta_curve_for(spec, &canonical_pair(spec), delta_c)
}

pub fn inverse_delta_curve_for(
    spec: &MechanismSpec,
    pair: &AdjacentPair,
    delta_c: f64,
) -> Result<f64> {
    if !(delta_c > 0.0 && delta_c < 1.0) {
        return Err(Error::OutOfRange(format!(
            "delta {delta_c} is not in (0, 1)"
        )));
    }
    profile(spec, pair)?.inverse_delta(delta_c)
}

/// Tradeoff curve of a Laplace or Gaussian-type spec on its canonical pair.
pub fn tradeoff_curve(spec: &MechanismSpec) -> Result<TradeoffCurve> {
    match profile(spec, &canonical_pair(spec))? {
        Profile::Laplace { mu, .. } => Ok(TradeoffCurve::Laplace { theta_eff: mu }),
        Profile::Gaussian { mu, .. } => Ok(TradeoffCurve::Gaussian { mu }),
        _ => Err(Error::Unsupported(format!(
            "closed-form tradeoff curve for {}",
            spec.family
        ))),
    }
}

/// Writes `alpha,beta` rows for `n` interior grid points.
pub fn write_tradeoff_csv<W: Write>(curve: &TradeoffCurve, n: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "beta"])?;
    for (a, b) in curve.grid(n) {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `epsilon,delta` rows of the privacy profile over `epsilons`.
pub fn write_delta_csv<W: Write>(spec: &MechanismSpec, epsilons: &[f64], out: W) -> Result<()> {
    let p = profile(spec, &canonical_pair(spec))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "delta"])?;
    for &e in epsilons {
        w.write_record([e.to_string(), p.delta(e)?.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rappor_classes_sum_to_one() {
        let c = rappor_classes(4, 0.3);
        let (sa, sb) = c.iter().fold((0.0, 0.0), |(x, y), (a, b)| (x + a, y + b));
        assert_abs_diff_eq!(sa, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sb, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn epsilon_display_marks_bounds() {
        assert_eq!(Epsilon::lower_bound(1.5).to_string(), ">= 1.5");
        assert_eq!(Epsilon::exact(f64::INFINITY).to_string(), "inf");
    }
}
