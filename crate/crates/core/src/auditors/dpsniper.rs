use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{draw, Orientation, WitnessSet};
use crate::error::{invalid, Result};
use crate::estimators::{
    binomial_lower_bound, binomial_upper_bound, fit_ratio_model, PowerEstimate, RatioModel,
};
use crate::mechanisms::{AdjacentPair, Sampler};
use crate::rng;

/// DP-Sniper settings. Sample counts are per input; missing counts take the
/// reference budget for `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PartialConfig")]
pub struct DpSniperConfig {
    /// Probability floor c.
    pub c: f64,
    pub n_train: usize,
    /// Used for the threshold selection on M(a') and again for each estimate.
    pub n_est: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Deserialize)]
struct PartialConfig {
    c: f64,
    n_train: Option<usize>,
    n_est: Option<usize>,
    #[serde(default = "default_confidence")]
    confidence: f64,
}

impl From<PartialConfig> for DpSniperConfig {
    fn from(p: PartialConfig) -> Self {
        let reference = Self::new(p.c);
        Self {
            c: p.c,
            n_train: p.n_train.unwrap_or(reference.n_train),
            n_est: p.n_est.unwrap_or(reference.n_est),
            confidence: p.confidence,
        }
    }
}

impl DpSniperConfig {
    /// Splits `budget` draws per input evenly between training and estimation.
    pub fn with_budget(c: f64, budget: usize) -> Self {
        Self {
            c,
            n_train: budget / 2,
            n_est: budget - budget / 2,
            confidence: default_confidence(),
        }
    }

    /// The budgets used in the reference experiments: 10.7 million draws at
    /// c = 0.01 and 2.05 million at c = 0.05.
    pub fn new(c: f64) -> Self {
        let budget = if c < 0.03 { 10_700_000 } else { 2_050_000 };
        Self::with_budget(c, budget)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = |n: usize| ((n as f64 * factor).round() as usize).max(200);
        Self {
            n_train: s(self.n_train),
            n_est: s(self.n_est),
            ..self.clone()
        }
    }
}

/// Picks (t, q) such that the share of `scores` above t, plus q times the share
/// equal to t, is exactly c.
pub(crate) fn calibrate(scores: &mut [f64], c: f64) -> (f64, f64) {
    scores.sort_by(|a, b| b.total_cmp(a));
    let n = scores.len();
    let target = c * n as f64;
    let j = (target.ceil() as usize).clamp(1, n) - 1;
    let t = scores[j];
    let above = scores.partition_point(|s| *s > t);
    let equal = scores[above..].partition_point(|s| *s >= t);
    let q = ((target - above as f64) / equal as f64).clamp(0.0, 1.0);
    (t, q)
}

/// Counts members of the randomised witness among `scores`.
pub(crate) fn count_members<R: RngCore>(scores: &[f64], w: &WitnessSet, rng: &mut R) -> u64 {
    scores
        .iter()
        .filter(|&&s| {
            let m = w.membership(s);
            m >= 1.0 || (m > 0.0 && rng::unit(rng) < m)
        })
        .count() as u64
}

/// The trained classifier and the witness calibrated to Pr[M(a') in S] = c,
/// exactly as [`dpsniper_audit`] builds them.
pub fn dpsniper_witness(
    sampler: &dyn Sampler,
    pair: &AdjacentPair,
    config: &DpSniperConfig,
    seed: u64,
) -> Result<(RatioModel, WitnessSet)> {
    let c = config.c;
    if !(c > 0.0 && c < 0.5) {
        return Err(invalid(format!("probability floor {c} is not in (0, 1/2)")));
    }
    if config.n_train == 0 || config.n_est == 0 {
        return Err(invalid("sample counts must be positive"));
    }
    let train_a = draw(sampler, &pair.q_a, seed, "sniper/train/a", config.n_train)?;
    let train_b = draw(
        sampler,
        &pair.q_a_prime,
        seed,
        "sniper/train/b",
        config.n_train,
    )?;
    let model = fit_ratio_model(&train_a, &train_b)?;
    drop((train_a, train_b));

    let select = draw(
        sampler,
        &pair.q_a_prime,
        seed,
        "sniper/select/b",
        config.n_est,
    )?;
    let (t, q) = calibrate(&mut model.scores(&select), c);
    Ok((model, WitnessSet::threshold(t, q, Orientation::Above)))
}

/// DP-Sniper: train a ratio classifier, calibrate a threshold set to
/// Pr[M(a') in S] = c, and estimate ln max(Pr[M(a) in S], c) - ln max(Pr[M(a') in S], c).
///
/// The lower confidence bound combines a Clopper-Pearson lower bound on the
/// numerator and an upper bound on the denominator, each at half the error budget.
pub fn dpsniper_audit(
    sampler: &dyn Sampler,
    pair: &AdjacentPair,
    config: &DpSniperConfig,
    seed: u64,
) -> Result<PowerEstimate> {
    let c = config.c;
    let (model, witness) = dpsniper_witness(sampler, pair, config, seed)?;

    let n = config.n_est as u64;
    let mut coin = rng::stream(rng::derive(seed, "sniper/ties"), 0);
    let est_a = draw(sampler, &pair.q_a, seed, "sniper/est/a", config.n_est)?;
    let ka = count_members(&model.scores(&est_a), &witness, &mut coin);
    drop(est_a);
    let est_b = draw(sampler, &pair.q_a_prime, seed, "sniper/est/b", config.n_est)?;
    let kb = count_members(&model.scores(&est_b), &witness, &mut coin);

    let (pa, pb) = (ka as f64 / n as f64, kb as f64 / n as f64);
    let xi = pa.max(c).ln() - pb.max(c).ln();
    let half = 1.0 - (1.0 - config.confidence) / 2.0;
    let lo_a = binomial_lower_bound(ka, n, half)?;
    let hi_b = binomial_upper_bound(kb, n, half)?;
    let low = lo_a.max(c).ln() - hi_b.max(c).ln();

    Ok(PowerEstimate {
        xi_star: xi,
        ci_low: low,
        ci_high: f64::INFINITY,
        confidence: config.confidence,
        witness,
        sample_count: 2 * config.n_train as u64 + 3 * n,
        alpha: Some(pb),
        beta: Some(1.0 - pa),
    }
    .ordered())
}
