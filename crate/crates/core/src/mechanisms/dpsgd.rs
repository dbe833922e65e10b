//! One noisy clipped-gradient step on a synthetic two-class linear task.
//!
//! The batch holds `batch - 1` background records plus an optional canary whose
//! clipped gradient has norm exactly `clip`. The released statistic is the
//! update recovered from the new weights, projected on the canary direction.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpsgdConfig {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub data_seed: u64,
}

fn default_dimension() -> usize {
    10
}
fn default_batch() -> usize {
    64
}
fn default_clip() -> f64 {
    1.0
}
fn default_lr() -> f64 {
    0.1
}

impl Default for DpsgdConfig {
    fn default() -> Self {
        Self {
            dimension: default_dimension(),
            batch: default_batch(),
            clip: default_clip(),
            learning_rate: default_lr(),
            data_seed: 0,
        }
    }
}

impl DpsgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.batch < 2 {
            return Err(invalid("DPSGD needs dimension >= 1 and batch >= 2"));
        }
        if !(self.clip > 0.0 && self.learning_rate > 0.0) {
            return Err(invalid("clip norm and learning rate must be positive"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn clip_to(g: &mut [f64], c: f64) {
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > c {
        g.iter_mut().for_each(|v| *v *= c / n);
    }
}

/// Precomputed pieces of the training step.
#[derive(Clone, Debug)]
pub struct ToyStep {
    pub config: DpsgdConfig,
    pub weights: Vec<f64>,
    pub background: Vec<f64>,
    pub canary: Vec<f64>,
    pub direction: Vec<f64>,
}

impl ToyStep {
    pub fn new(config: &DpsgdConfig) -> Result<Self> {
        config.validate()?;
        let d = config.dimension;
        let mut r = rng::stream(rng::derive(config.data_seed, "dpsgd-data"), 0);
        let mut normal = || -> f64 { StandardNormal.sample(&mut r) };
        let truth: Vec<f64> = (0..d).map(|_| normal()).collect();
        let weights: Vec<f64> = (0..d).map(|_| 0.1 * normal()).collect();
        let mut background = vec![0.0; d];
        for _ in 0..config.batch - 1 {
            let x: Vec<f64> = (0..d).map(|_| normal()).collect();
            let y = if dot(&truth, &x) + 0.1 * normal() > 0.0 {
                1.0
            } else {
                0.0
            };
            let p = sigmoid(dot(&weights, &x));
            let mut g: Vec<f64> = x.iter().map(|v| (p - y) * v).collect();
            clip_to(&mut g, config.clip);
            background.iter_mut().zip(&g).for_each(|(b, v)| *b += v);
        }
        // A far-out mislabelled record; its gradient is always clipped.
        let raw: Vec<f64> = (0..d).map(|_| normal()).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = raw.iter().map(|v| 50.0 * v / norm).collect();
        let y = if dot(&weights, &x) > 0.0 { 0.0 } else { 1.0 };
        let p = sigmoid(dot(&weights, &x));
        let mut canary: Vec<f64> = x.iter().map(|v| (p - y) * v).collect();
        let cn = canary.iter().map(|v| v * v).sum::<f64>().sqrt();
        canary.iter_mut().for_each(|v| *v *= config.clip / cn);
        let direction = canary.iter().map(|v| v / config.clip).collect();
        Ok(Self {
            config: config.clone(),
            weights,
            background,
            canary,
            direction,
        })
    }

    /// Noise-free value of the statistic for canary multiplicity `w`.
    pub fn location(&self, w: f64) -> f64 {
        dot(&self.background, &self.direction) + w * self.config.clip
    }

    /// One draw of the released statistic.
    pub fn draw<R: rand::RngCore>(&self, rng: &mut R, w: f64, sigma: f64) -> f64 {
        let c = &self.config;
        let scale = c.learning_rate / c.batch as f64;
        let mut acc = 0.0;
        for j in 0..c.dimension {
            let z: f64 = StandardNormal.sample(rng);
            let g = self.background[j] + w * self.canary[j] + sigma * z;
            let updated = self.weights[j] - scale * g;
            acc += (self.weights[j] - updated) / scale * self.direction[j];
        }
        acc
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canary_has_clip_norm() {
        let step = ToyStep::new(&DpsgdConfig::default()).unwrap();
        let n = step.canary.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert!((step.location(1.0) - step.location(0.0) - 1.0).abs() < 1e-12);
    }
}
