use serde::{Deserialize, Serialize};

use super::{draw, Orientation, Region, WitnessSet};
use crate::error::{invalid, Error, Result};
use crate::estimators::{bayesian_interval, two_branch_power, PowerEstimate};
use crate::mechanisms::{AdjacentPair, SampleBatch, Sampler};

/// DPSGD-Audit settings. `samples` per input, half for threshold selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpsgdAuditConfig {
    pub delta_c: f64,
    /// Smallest estimated tail probability a threshold may cut off.
    #[serde(default)]
    pub min_probability: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_significance")]
    pub significance: f64,
}

fn default_samples() -> usize {
    1000
}

fn default_significance() -> f64 {
    0.03
}

impl DpsgdAuditConfig {
    pub fn new(delta_c: f64) -> Self {
        Self {
            delta_c,
            min_probability: 0.0,
            samples: default_samples(),
            significance: default_significance(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: ((self.samples as f64 * factor).round() as usize).max(100),
            ..self.clone()
        }
    }
}

fn reals(batch: SampleBatch) -> Result<Vec<f64>> {
    match batch {
        SampleBatch::Real(v) => Ok(v),
        _ => Err(Error::Unsupported(
            "DPSGD-Audit needs a scalar statistic".into(),
        )),
    }
}

/// Members of {x >= t} (Above) or {x <= t} (Below) in a sorted slice.
fn tail_count(sorted: &[f64], t: f64, orientation: Orientation) -> usize {
    match orientation {
        Orientation::Above => sorted.len() - sorted.partition_point(|x| *x < t),
        Orientation::Below => sorted.partition_point(|x| *x <= t),
    }
}

/// DPSGD-Audit: choose the threshold and direction on the scalar statistic that
/// maximise max{ln((P_a - delta)/P_a'), ln((1 - P_a' - delta)/(1 - P_a))} on one
/// half of the samples, then estimate it with a two-sided Bayesian interval on
/// the other half.
pub fn dpsgd_audit(
    sampler: &dyn Sampler,
    pair: &AdjacentPair,
    config: &DpsgdAuditConfig,
    seed: u64,
) -> Result<PowerEstimate> {
    if !(0.0..1.0).contains(&config.delta_c) {
        return Err(invalid("delta_c must lie in [0, 1)"));
    }
    if config.samples < 4 {
        return Err(invalid("DPSGD-Audit needs at least four samples per input"));
    }
    let n_sel = config.samples / 2;
    let n_est = config.samples - n_sel;
    let mut sa = reals(draw(sampler, &pair.q_a, seed, "dpsgd/select/a", n_sel)?)?;
    let mut sb = reals(draw(
        sampler,
        &pair.q_a_prime,
        seed,
        "dpsgd/select/b",
        n_sel,
    )?)?;
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);

    let n = n_sel as f64;
    let floor = config.min_probability.max(1.0 / n);
    let mut best: Option<(f64, f64, Orientation)> = None;
    for &t in sa.iter().chain(&sb) {
        for o in [Orientation::Above, Orientation::Below] {
            let pa = tail_count(&sa, t, o) as f64 / n;
            let pb = tail_count(&sb, t, o) as f64 / n;
            // Both branches divide by a probability that must clear the floor.
            if pb < floor || 1.0 - pa < floor {
                continue;
            }
            let v = two_branch_power(pa, pb, config.delta_c);
            if v.is_finite() && best.is_none_or(|b| v > b.0) {
                best = Some((v, t, o));
            }
        }
    }
    let (_, t, orientation) =
        best.ok_or_else(|| Error::NoSolution("no threshold leaves mass above delta_c".into()))?;

    let mut ea = reals(draw(sampler, &pair.q_a, seed, "dpsgd/est/a", n_est)?)?;
    let mut eb = reals(draw(sampler, &pair.q_a_prime, seed, "dpsgd/est/b", n_est)?)?;
    ea.sort_by(f64::total_cmp);
    eb.sort_by(f64::total_cmp);
    let ka = tail_count(&ea, t, orientation) as u64;
    let kb = tail_count(&eb, t, orientation) as u64;
    let m = n_est as f64;
    let xi = two_branch_power(ka as f64 / m, kb as f64 / m, config.delta_c);
    let (lo, hi) = bayesian_interval(ka, kb, n_est as u64, config.significance, config.delta_c)?;
    let region = match orientation {
        Orientation::Above => Region::Interval {
            lo: t,
            hi: f64::INFINITY,
        },
        Orientation::Below => Region::Interval {
            lo: f64::NEG_INFINITY,
            hi: t,
        },
    };
    Ok(PowerEstimate {
        xi_star: xi,
        ci_low: lo,
        ci_high: hi,
        confidence: 1.0 - config.significance,
        witness: WitnessSet::threshold(t, 1.0, Orientation::Above).with_region(region),
        sample_count: 2 * config.samples as u64,
        alpha: Some(kb as f64 / m),
        beta: Some(1.0 - ka as f64 / m),
    }
    .ordered())
}
