use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::Hash;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{draw, Orientation, Region, WitnessSet};
use crate::error::{invalid, Error, Result};
use crate::estimators::{binned_kde, kde_fit, BandwidthRule, DensityModel, PowerEstimate};
use crate::mechanisms::{AdjacentPair, SampleBatch, Sampler};
use crate::numeric::phi_inv;
use crate::rng;

/// Family-wise error rate of the selection penalty.
const SELECTION_LEVEL: f64 = 0.05;

/// Normal quantile penalising noisy candidates, Bonferroni-corrected over
/// `candidates` roughly independent ones.
fn selection_z(candidates: f64) -> f64 {
    phi_inv(1.0 - SELECTION_LEVEL / candidates.max(1.0))
}

/// MPL settings. `samples` per input, half for choosing the output, half for
/// estimating its ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MplConfig {
    /// Density floor tau.
    pub tau: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_rule")]
    pub bandwidth: BandwidthRule,
}

fn default_samples() -> usize {
    3_000_000
}

fn default_confidence() -> f64 {
    0.95
}

fn default_bootstrap() -> usize {
    200
}

fn default_rule() -> BandwidthRule {
    BandwidthRule::NonSmooth
}

impl MplConfig {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            samples: default_samples(),
            confidence: default_confidence(),
            bootstrap: default_bootstrap(),
            bandwidth: default_rule(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: ((self.samples as f64 * factor).round() as usize).max(400),
            ..self.clone()
        }
    }
}

fn log_ratio(pa: f64, pb: f64, tau: f64) -> f64 {
    (pa.max(tau).ln() - pb.max(tau).ln()).abs()
}

/// Lower bound on quantile `p` of `values` (sorted in place).
fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let i = ((p * values.len() as f64).floor() as usize).min(values.len() - 1);
    values[i]
}

/// MPL: estimate both output densities, pick the output maximising
/// |ln max(p(b|a), tau) - ln max(p(b|a'), tau)| and report that log-ratio.
///
/// Selection uses a binned KDE on the first half and ranks candidates by a
/// lower confidence bound on the log-ratio; the reported value is a fresh
/// exact-KDE estimate on the second half, with a bootstrap lower bound.
pub fn mpl_audit(
    sampler: &dyn Sampler,
    pair: &AdjacentPair,
    config: &MplConfig,
    seed: u64,
) -> Result<PowerEstimate> {
    if !(config.tau > 0.0) {
        return Err(invalid("density floor tau must be positive"));
    }
    if config.samples < 4 {
        return Err(invalid("MPL needs at least four samples per input"));
    }
    let n_sel = config.samples / 2;
    let n_est = config.samples - n_sel;
    let sel_a = draw(sampler, &pair.q_a, seed, "mpl/select/a", n_sel)?;
    let sel_b = draw(sampler, &pair.q_a_prime, seed, "mpl/select/b", n_sel)?;
    let est_a = draw(sampler, &pair.q_a, seed, "mpl/est/a", n_est)?;
    let est_b = draw(sampler, &pair.q_a_prime, seed, "mpl/est/b", n_est)?;
    let mut boot = rng::stream(rng::derive(seed, "mpl/bootstrap"), 0);
    let est = match (sel_a, sel_b, est_a, est_b) {
        (
            SampleBatch::Real(sa),
            SampleBatch::Real(sb),
            SampleBatch::Real(ea),
            SampleBatch::Real(eb),
        ) => scalar(&sa, &sb, &ea, &eb, config, &mut boot)?,
        (
            SampleBatch::Symbols(sa),
            SampleBatch::Symbols(sb),
            SampleBatch::Symbols(ea),
            SampleBatch::Symbols(eb),
        ) => {
            let (key, xi, low, forward) = discrete(&sa, &sb, &ea, &eb, config, &mut boot)?;
            finish(
                xi,
                low,
                forward,
                Region::Symbols { outputs: vec![key] },
                config,
            )
        }
        (sa @ SampleBatch::Bits { k, .. }, sb, ea, eb) => {
            let rows = |b: &SampleBatch| {
                (0..b.len())
                    .map(|i| b.bit_words(i).to_vec())
                    .collect::<Vec<_>>()
            };
            let (key, xi, low, forward) = discrete(
                &rows(&sa),
                &rows(&sb),
                &rows(&ea),
                &rows(&eb),
                config,
                &mut boot,
            )?;
            let region = Region::BitPattern {
                positions: (0..k).collect(),
                values: (0..k).map(|j| key[j / 64] >> (j % 64) & 1 == 1).collect(),
            };
            finish(xi, low, forward, region, config)
        }
        _ => return Err(Error::Unsupported("mixed output types".into())),
    };
    Ok(PowerEstimate {
        sample_count: 2 * config.samples as u64,
        ..est
    })
}

fn finish(xi: f64, low: f64, forward: bool, region: Region, config: &MplConfig) -> PowerEstimate {
    let orientation = if forward {
        Orientation::Above
    } else {
        Orientation::Below
    };
    PowerEstimate {
        xi_star: xi,
        ci_low: low,
        ci_high: f64::INFINITY,
        confidence: config.confidence,
        witness: WitnessSet::threshold(xi, 1.0, orientation).with_region(region),
        sample_count: 0,
        alpha: None,
        beta: None,
    }
    .ordered()
}

fn scalar<R: Rng>(
    sa: &[f64],
    sb: &[f64],
    ea: &[f64],
    eb: &[f64],
    config: &MplConfig,
    boot: &mut R,
) -> Result<PowerEstimate> {
    let tau = config.tau;
    let ka = kde_fit(sa, config.bandwidth)?;
    let kb = kde_fit(sb, config.bandwidth)?;
    let (ha, hb) = (ka.bandwidth, kb.bandwidth);
    let lo = ka.support.0.min(kb.support.0) - 8.0 * ha.max(hb);
    let hi = ka.support.1.max(kb.support.1) + 8.0 * ha.max(hb);
    let width = ha.min(hb) / 16.0;
    let ga = binned_kde(sa, ha, lo, hi, width);
    let gb = binned_kde(sb, hb, lo, hi, width);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let r = 1.0 / (2.0 * PI.sqrt());
    let z = selection_z((hi - lo) / (2.0 * ha.max(hb)));
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for i in 0..ga.values.len() {
        if ga.counts[i] == 0 && gb.counts[i] == 0 {
            continue;
        }
        let (pa, pb) = (ga.values[i].max(tau), gb.values[i].max(tau));
        let se = (r / (na * ha * pa) + r / (nb * hb * pb)).sqrt();
        let lcb = log_ratio(pa, pb, tau) - z * se;
        if lcb > best.0 {
            best = (lcb, ga.centre(i));
        }
    }
    let at = best.1;
    if !at.is_finite() {
        return Err(Error::Degenerate("no candidate output".into()));
    }
    let fa = kde_fit(ea, config.bandwidth)?;
    let fb = kde_fit(eb, config.bandwidth)?;
    let (pa, pb) = (fa.density(at), fb.density(at));
    let xi = log_ratio(pa, pb, tau);
    let forward = pa.max(tau) >= pb.max(tau);

    let (ca, cb) = (fa.local_contributions(at), fb.local_contributions(at));
    let mut draws: Vec<f64> = (0..config.bootstrap)
        .map(|_| log_ratio(resample(&fa, &ca, boot), resample(&fb, &cb, boot), tau))
        .collect();
    let low = if draws.is_empty() {
        xi
    } else {
        percentile(&mut draws, 1.0 - config.confidence)
    };
    Ok(finish(xi, low, forward, Region::Point { at }, config))
}

/// Bootstrap replicate of a KDE value at one point: a full resample of the n
/// samples hits the local neighbourhood Binomial(n, m/n) times.
fn resample<R: Rng>(model: &DensityModel, local: &[f64], rng: &mut R) -> f64 {
    let n = model.sample_count() as u64;
    if local.is_empty() {
        return 0.0;
    }
    let hits = Binomial::new(n, local.len() as f64 / n as f64)
        .map(|b| b.sample(rng))
        .unwrap_or(0);
    let s: f64 = (0..hits)
        .map(|_| local[rng.random_range(0..local.len())])
        .sum();
    s * model.norm()
}

fn counts<K: Hash + Eq + Clone>(xs: &[K]) -> HashMap<K, u64> {
    let mut m = HashMap::new();
    for x in xs {
        *m.entry(x.clone()).or_insert(0) += 1;
    }
    m
}

/// Discrete outputs: empirical masses with the tau floor play the density role.
fn discrete<K: Hash + Eq + Clone + Ord, R: Rng>(
    sa: &[K],
    sb: &[K],
    ea: &[K],
    eb: &[K],
    config: &MplConfig,
    boot: &mut R,
) -> Result<(K, f64, f64, bool)> {
    let tau = config.tau;
    let (ca, cb) = (counts(sa), counts(sb));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let mut keys: Vec<&K> = ca.keys().chain(cb.keys()).collect();
    keys.sort();
    keys.dedup();
    let z = selection_z(keys.len() as f64);
    let mut best: Option<(f64, &K)> = None;
    for k in keys {
        let pa = (*ca.get(k).unwrap_or(&0) as f64 / na).max(tau);
        let pb = (*cb.get(k).unwrap_or(&0) as f64 / nb).max(tau);
        let se = (1.0 / (na * pa) + 1.0 / (nb * pb)).sqrt();
        let lcb = log_ratio(pa, pb, tau) - z * se;
        if best.is_none_or(|b| lcb > b.0) {
            best = Some((lcb, k));
        }
    }
    let key = best
        .ok_or_else(|| Error::Degenerate("no candidate output".into()))?
        .1
        .clone();
    let ka = ea.iter().filter(|x| **x == key).count() as u64;
    let kb = eb.iter().filter(|x| **x == key).count() as u64;
    let (ma, mb) = (ea.len() as u64, eb.len() as u64);
    let (pa, pb) = (ka as f64 / ma as f64, kb as f64 / mb as f64);
    let xi = log_ratio(pa, pb, tau);
    let mut draws: Vec<f64> = (0..config.bootstrap)
        .map(|_| {
            let ra = Binomial::new(ma, pa).map(|b| b.sample(boot)).unwrap_or(0) as f64 / ma as f64;
            let rb = Binomial::new(mb, pb).map(|b| b.sample(boot)).unwrap_or(0) as f64 / mb as f64;
            log_ratio(ra, rb, tau)
        })
        .collect();
    let low = if draws.is_empty() {
        xi
    } else {
        percentile(&mut draws, 1.0 - config.confidence)
    };
    Ok((key, xi, low, pa.max(tau) >= pb.max(tau)))
}
