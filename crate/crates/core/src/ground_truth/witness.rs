use super::{Profile, TradeoffCurve};
use crate::auditors::{Orientation, Region, WitnessSet};
use crate::error::{Error, Result};
use crate::mechanisms::{AdjacentPair, DensityOracle, Family, MechanismSpec};
use crate::numeric::{golden_max, phi_inv};

/// The outcome set that maximises the power of distinguishing `pair` at `delta_c`.
///
/// At `delta_c = 0` this is the set of outputs with the largest likelihood
/// ratio. For `delta_c > 0` it is the ratio-threshold set maximising
/// max(ln((1 - beta - delta)/alpha), ln((1 - alpha - delta)/beta)).
pub fn optimal_witness(
    spec: &MechanismSpec,
    pair: &AdjacentPair,
    delta_c: f64,
) -> Result<WitnessSet> {
    if !(0.0..1.0).contains(&delta_c) {
        return Err(crate::error::invalid("delta must lie in [0, 1)"));
    }
    let oracle = DensityOracle::new(spec)?;
    match Profile::new(&oracle, pair)? {
        Profile::Laplace {
            mu, loc_a, loc_b, ..
        } if delta_c == 0.0 => {
            let region = if loc_a <= loc_b {
                Region::Interval {
                    lo: f64::NEG_INFINITY,
                    hi: loc_a,
                }
            } else {
                Region::Interval {
                    lo: loc_a,
                    hi: f64::INFINITY,
                }
            };
            Ok(WitnessSet::threshold(mu, 1.0, Orientation::Above).with_region(region))
        }
        Profile::Laplace {
            mu,
            scale,
            loc_a,
            loc_b,
        } => Ok(scalar_sweep(
            &Scalar::Laplace { scale },
            TradeoffCurve::Laplace { theta_eff: mu },
            loc_a,
            loc_b,
            delta_c,
        )),
        Profile::Gaussian { .. } if delta_c == 0.0 => Err(Error::NoSolution(
            "Gaussian likelihood ratio is unbounded; no set attains the supremum".into(),
        )),
        Profile::Gaussian {
            mu,
            sigma,
            loc_a,
            loc_b,
        } => Ok(scalar_sweep(
            &Scalar::Gaussian { sigma },
            TradeoffCurve::Gaussian { mu },
            loc_a,
            loc_b,
            delta_c,
        )),
        Profile::Bounded { loc_a, loc_b } => {
            if delta_c > 0.0 {
                return Err(Error::Unsupported(
                    "adapted Laplace witness with delta > 0".into(),
                ));
            }
            let reach = oracle.noise_reach();
            let region = if loc_a <= loc_b {
                Region::Interval {
                    lo: loc_a - reach,
                    hi: loc_b - reach,
                }
            } else {
                Region::Interval {
                    lo: loc_b + reach,
                    hi: loc_a + reach,
                }
            };
            Ok(WitnessSet::threshold(f64::INFINITY, 1.0, Orientation::Above).with_region(region))
        }
        Profile::Atoms(atoms) => discrete_witness(&oracle, spec, pair, &atoms, delta_c),
    }
}

enum Scalar {
    Laplace { scale: f64 },
    Gaussian { sigma: f64 },
}

impl Scalar {
    fn quantile(&self, p: f64) -> f64 {
        match *self {
            Scalar::Laplace { scale } => {
                if p < 0.5 {
                    scale * (2.0 * p).ln()
                } else {
                    -scale * (2.0 * (1.0 - p)).ln()
                }
            }
            Scalar::Gaussian { sigma } => sigma * phi_inv(p),
        }
    }

    fn log_ratio(&self, x: f64, la: f64, lb: f64) -> f64 {
        match *self {
            Scalar::Laplace { scale } => ((x - lb).abs() - (x - la).abs()) / scale,
            Scalar::Gaussian { sigma } => {
                ((x - lb).powi(2) - (x - la).powi(2)) / (2.0 * sigma * sigma)
            }
        }
    }
}

/// The two-branch power at type-I error `alpha`, and which branch attains it.
fn branches(curve: &TradeoffCurve, alpha: f64, delta: f64) -> (f64, bool) {
    let power = curve.power(alpha);
    let beta = curve.beta_unchecked(alpha);
    let first = if power > delta {
        (power - delta).ln() - alpha.ln()
    } else {
        f64::NEG_INFINITY
    };
    let second = if 1.0 - alpha > delta && beta > 0.0 {
        (1.0 - alpha - delta).ln() - beta.ln()
    } else {
        f64::NEG_INFINITY
    };
    if first >= second {
        (first, true)
    } else {
        (second, false)
    }
}

fn scalar_sweep(
    noise: &Scalar,
    curve: TradeoffCurve,
    loc_a: f64,
    loc_b: f64,
    delta: f64,
) -> WitnessSet {
    let (lo, hi) = (1e-300f64.ln(), (1.0 - 1e-12f64).ln());
    let n = 10_000;
    let objective = |u: f64| branches(&curve, u.exp(), delta).0;
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..n {
        let u = lo + step * i as f64;
        let v = objective(u);
        if v > best.1 {
            best = (u, v);
        }
    }
    let (u, _) = golden_max(
        objective,
        (best.0 - step).max(lo),
        (best.0 + step).min(hi),
        1e-12,
    );
    let alpha = u.exp();
    let forward = branches(&curve, alpha, delta).1;
    // The set {b <= x} on the side of a's location has Pr_{a'} = alpha.
    let lower = loc_a <= loc_b;
    let x = if lower {
        loc_b + noise.quantile(alpha)
    } else {
        loc_b - noise.quantile(alpha)
    };
    let region = match (lower, forward) {
        (true, true) | (false, false) => Region::Interval {
            lo: f64::NEG_INFINITY,
            hi: x,
        },
        _ => Region::Interval {
            lo: x,
            hi: f64::INFINITY,
        },
    };
    let orientation = if forward {
        Orientation::Above
    } else {
        Orientation::Below
    };
    WitnessSet::threshold(noise.log_ratio(x, loc_a, loc_b), 1.0, orientation).with_region(region)
}

/// Best union of equal-ratio atom groups, taken in ratio order from either end.
fn discrete_witness(
    oracle: &DensityOracle,
    spec: &MechanismSpec,
    pair: &AdjacentPair,
    atoms: &[(f64, f64)],
    delta: f64,
) -> Result<WitnessSet> {
    let ratio = |&(a, b): &(f64, f64)| a.ln() - b.ln();
    let mut order: Vec<usize> = (0..atoms.len())
        .filter(|&i| atoms[i].0 > 0.0 || atoms[i].1 > 0.0)
        .collect();
    order.sort_by(|&i, &j| ratio(&atoms[j]).total_cmp(&ratio(&atoms[i])));

    let same = |x: f64, y: f64| x == y || (x - y).abs() <= 1e-12 * x.abs().max(1.0);
    // (power, number of atoms taken, forward?)
    let mut best = (f64::NEG_INFINITY, 0usize, true);
    for forward in [true, false] {
        let seq: Vec<usize> = if forward {
            order.clone()
        } else {
            order.iter().rev().copied().collect()
        };
        let (mut num, mut den) = (0.0, 0.0);
        let mut k = 0;
        while k < seq.len() {
            let r = ratio(&atoms[seq[k]]);
            while k < seq.len() && same(ratio(&atoms[seq[k]]), r) {
                let (a, b) = atoms[seq[k]];
                if forward {
                    num += a;
                    den += b;
                } else {
                    num += b;
                    den += a;
                }
                k += 1;
            }
            if num > delta {
                let v = (num - delta).ln() - den.ln();
                if v > best.0 + 1e-12 {
                    best = (v, k, forward);
                }
            }
        }
    }
    if best.1 == 0 {
        return Err(Error::NoSolution(
            "no outcome set has mass above delta".into(),
        ));
    }
    let (_, k, forward) = best;
    let chosen: Vec<usize> = if forward {
        order[..k].to_vec()
    } else {
        order.iter().rev().take(k).copied().collect()
    };
    let threshold = ratio(&atoms[*chosen.last().expect("nonempty")]);
    let orientation = if forward {
        Orientation::Above
    } else {
        Orientation::Below
    };
    let witness = WitnessSet::threshold(threshold, 1.0, orientation);

    let region = match spec.family {
        Family::Svt | Family::AdaptedSvt => {
            let outs = oracle.svt_outputs()?;
            Region::Symbols {
                outputs: chosen.iter().map(|&i| outs[i]).collect(),
            }
        }
        Family::RapporOneTime
            if chosen.len() == 1 && (chosen[0] == 0 || chosen[0] == atoms.len() - 1) =>
        {
            // The extreme class: every differing bit shows one input's value.
            let (pa, _, _) = oracle.rappor_filter(pair.q_a[0])?;
            let (pb, _, _) = oracle.rappor_filter(pair.q_a_prime[0])?;
            let mut positions: Vec<usize> = pa.iter().chain(pb.iter()).copied().collect();
            positions.sort_unstable();
            positions.dedup();
            positions.retain(|p| pa.contains(p) != pb.contains(p));
            let source = if chosen[0] == atoms.len() - 1 {
                &pa
            } else {
                &pb
            };
            let values = positions.iter().map(|p| source.contains(p)).collect();
            Region::BitPattern { positions, values }
        }
        _ => Region::Score,
    };
    Ok(witness.with_region(region))
}

/// Oracle probabilities (Pr[M(a) in S], Pr[M(a') in S]) of an explicit witness.
pub fn witness_probabilities(
    spec: &MechanismSpec,
    pair: &AdjacentPair,
    w: &WitnessSet,
) -> Result<(f64, f64)> {
    let oracle = DensityOracle::new(spec)?;
    let (qa, qb) = (&pair.q_a, &pair.q_a_prime);
    match &w.region {
        Region::Interval { lo, hi } => Ok((
            oracle.interval_probability(qa, *lo, *hi)?,
            oracle.interval_probability(qb, *lo, *hi)?,
        )),
        Region::Symbols { outputs } => {
            let (mut pa, mut pb) = (0.0, 0.0);
            for o in outputs {
                pa += oracle.svt_mass(qa, o)?;
                pb += oracle.svt_mass(qb, o)?;
            }
            Ok((pa, pb))
        }
        Region::BitPattern { positions, values } => {
            let prob = |item: f64| -> Result<f64> {
                let (filter, _, theta) = oracle.rappor_filter(item)?;
                Ok(positions
                    .iter()
                    .zip(values)
                    .map(|(p, v)| {
                        if filter.contains(p) == *v {
                            1.0 - theta / 2.0
                        } else {
                            theta / 2.0
                        }
                    })
                    .product())
            };
            Ok((prob(qa[0])?, prob(qb[0])?))
        }
        Region::Point { .. } | Region::Score => Err(Error::Unsupported(
            "witness without an explicit outcome set".into(),
        )),
    }
}

/// Power of an explicit witness at `delta`, in the direction its orientation names.
pub fn witness_power(
    spec: &MechanismSpec,
    pair: &AdjacentPair,
    w: &WitnessSet,
    delta: f64,
) -> Result<f64> {
    let (pa, pb) = witness_probabilities(spec, pair, w)?;
    let (num, den) = match w.orientation {
        Orientation::Above => (pa, pb),
        Orientation::Below => (pb, pa),
    };
    if num <= delta {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((num - delta).ln() - den.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::canonical_pair;

    #[test]
    fn laplace_witness_is_lower_half_line() {
        let spec = MechanismSpec::laplace(1.0);
        let pair = AdjacentPair::new(vec![0.0], vec![1.0]).unwrap();
        let w = optimal_witness(&spec, &pair, 0.0).unwrap();
        assert_eq!(
            w.region,
            Region::Interval {
                lo: f64::NEG_INFINITY,
                hi: 0.0
            }
        );
    }

    #[test]
    fn gaussian_pure_witness_does_not_exist() {
        let spec = MechanismSpec::gaussian(1.0);
        assert!(matches!(
            optimal_witness(&spec, &canonical_pair(&spec), 0.0),
            Err(Error::NoSolution(_))
        ));
    }
}
