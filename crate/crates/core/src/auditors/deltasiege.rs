use serde::{Deserialize, Serialize};

use super::{draw, Orientation, SurrogateFn, WitnessSet};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    binomial_lower_bound, binomial_upper_bound, fit_ratio_model, PowerEstimate,
};
use crate::mechanisms::{AdjacentPair, Sampler};
use crate::rng;

const INTERPOLATED: usize = 1000;

/// Delta-Siege settings. `samples` is the per-input budget of one run, split
/// evenly between training and estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSiegeConfig {
    #[serde(default)]
    pub surrogate: SurrogateFn,
    pub delta_c: f64,
    /// Smallest estimated Pr[M(a') in S] a threshold may have.
    #[serde(default)]
    pub min_probability: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_samples() -> usize {
    15_000
}

fn default_runs() -> usize {
    5
}

fn default_confidence() -> f64 {
    0.90
}

impl DeltaSiegeConfig {
    pub fn new(surrogate: SurrogateFn, delta_c: f64) -> Self {
        Self {
            surrogate,
            delta_c,
            min_probability: 0.0,
            samples: default_samples(),
            runs: default_runs(),
            confidence: default_confidence(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: ((self.samples as f64 * factor).round() as usize).max(200),
            ..self.clone()
        }
    }
}

/// Result of one run at its best threshold.
#[derive(Clone, Debug)]
struct Run {
    xi: f64,
    low: f64,
    threshold: f64,
    alpha: f64,
    beta: f64,
}

/// Delta-Siege: for every threshold set S = {score >= t}, minimise the
/// surrogate along the line delta = 1 - beta - alpha e^eps; take the smallest
/// minimum rho* over thresholds and report the eps with rho(eps, delta_c) = rho*.
///
/// Repeats `runs` independent runs and keeps the largest estimate and the
/// largest lower bound.
pub fn deltasiege_audit(
    sampler: &dyn Sampler,
    pair: &AdjacentPair,
    config: &DeltaSiegeConfig,
    seed: u64,
) -> Result<PowerEstimate> {
    config.surrogate.validate()?;
    if !(config.delta_c > 0.0 && config.delta_c < 1.0) {
        return Err(invalid("Delta-Siege needs delta_c in (0, 1)"));
    }
    if config.runs == 0 || config.samples < 4 {
        return Err(invalid(
            "Delta-Siege needs at least one run and four samples",
        ));
    }
    let mut runs = Vec::with_capacity(config.runs);
    let mut last_err = None;
    for r in 0..config.runs {
        match one_run(sampler, pair, config, rng::derive_index(seed, r as u64)) {
            Ok(run) => runs.push(run),
            Err(e) => last_err = Some(e),
        }
    }
    if runs.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::NoSolution("no run succeeded".into())));
    }
    let best = runs
        .iter()
        .max_by(|a, b| a.xi.total_cmp(&b.xi))
        .expect("at least one run")
        .clone();
    let low = runs.iter().map(|r| r.low).fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerEstimate {
        xi_star: best.xi,
        ci_low: low,
        ci_high: f64::INFINITY,
        confidence: config.confidence,
        witness: WitnessSet::threshold(best.threshold, 1.0, Orientation::Above),
        sample_count: 2 * (config.samples as u64) * config.runs as u64,
        alpha: Some(best.alpha),
        beta: Some(best.beta),
    }
    .ordered())
}

fn one_run(
    sampler: &dyn Sampler,
    pair: &AdjacentPair,
    config: &DeltaSiegeConfig,
    seed: u64,
) -> Result<Run> {
    let n_train = config.samples / 2;
    let n_est = config.samples - n_train;
    let model = fit_ratio_model(
        &draw(sampler, &pair.q_a, seed, "siege/train/a", n_train)?,
        &draw(sampler, &pair.q_a_prime, seed, "siege/train/b", n_train)?,
    )?;
    let mut sa = model.scores(&draw(sampler, &pair.q_a, seed, "siege/est/a", n_est)?);
    let mut sb = model.scores(&draw(sampler, &pair.q_a_prime, seed, "siege/est/b", n_est)?);
    sa.sort_by(|x, y| y.total_cmp(x));
    sb.sort_by(|x, y| y.total_cmp(x));

    let mut thresholds: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    let (lo, hi) = (
        thresholds.iter().copied().fold(f64::INFINITY, f64::min),
        thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    for i in 0..INTERPOLATED {
        thresholds.push(lo + (hi - lo) * (i as f64 + 0.5) / INTERPOLATED as f64);
    }
    thresholds.sort_by(|x, y| y.total_cmp(x));
    thresholds.dedup();

    let n = n_est as f64;
    let floor = config.min_probability.max(f64::MIN_POSITIVE);
    // (rho, threshold, count under a, count under a')
    let mut best: Option<(f64, f64, usize, usize)> = None;
    let (mut ia, mut ib) = (0, 0);
    for &t in &thresholds {
        while ia < sa.len() && sa[ia] >= t {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] >= t {
            ib += 1;
        }
        let alpha = ib as f64 / n;
        if alpha < floor {
            continue;
        }
        let s = ia as f64 / n;
        if let Some((rho, _, _)) = config.surrogate.minimize_on_line(alpha, s) {
            if best.is_none_or(|b| rho < b.0) {
                best = Some((rho, t, ia, ib));
            }
        }
    }
    let (rho, t, ka, kb) =
        best.ok_or_else(|| Error::NoSolution("every threshold gives an infeasible line".into()))?;
    let xi = config.surrogate.solve_epsilon(rho, config.delta_c);

    let half = 1.0 - (1.0 - config.confidence) / 2.0;
    let s_lo = binomial_lower_bound(ka as u64, n_est as u64, half)?;
    let a_hi = binomial_upper_bound(kb as u64, n_est as u64, half)?;
    let low = match config.surrogate.minimize_on_line(a_hi, s_lo) {
        Some((r, _, _)) => config.surrogate.solve_epsilon(r, config.delta_c),
        None => f64::NEG_INFINITY,
    };
    Ok(Run {
        xi,
        low,
        threshold: t,
        alpha: kb as f64 / n,
        beta: 1.0 - ka as f64 / n,
    })
}
