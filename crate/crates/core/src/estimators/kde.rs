use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel reach in bandwidths; the Gaussian tail beyond it is below 1e-14.
const REACH: f64 = 8.0;
/// Bins per bandwidth for the binned estimator.
const BINS_PER_H: f64 = 16.0;
const MAX_BINS: usize = 1 << 23;

/// Bandwidth selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// 0.9 min(sd, IQR/1.34) n^(-1/5).
    #[default]
    Silverman,
    /// 1.06 sd n^(-1/5).
    Scott,
    /// Silverman's scale with rate n^(-1/3), suited to densities with kinks.
    NonSmooth,
    Fixed {
        h: f64,
    },
}

impl BandwidthRule {
    pub fn bandwidth(&self, sorted: &[f64]) -> f64 {
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let sd =
            (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        let q = |p: f64| sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
        let iqr = q(0.75) - q(0.25);
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        match *self {
            BandwidthRule::Silverman => 0.9 * spread * n.powf(-0.2),
            BandwidthRule::Scott => 1.06 * sd * n.powf(-0.2),
            BandwidthRule::NonSmooth => 0.9 * spread * n.powf(-1.0 / 3.0),
            BandwidthRule::Fixed { h } => h,
        }
    }
}

/// Gaussian-kernel density estimate of scalar samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityModel {
    pub bandwidth: f64,
    pub rule: BandwidthRule,
    pub support: (f64, f64),
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl DensityModel {
    pub fn sample_count(&self) -> usize {
        self.sorted.len()
    }

    /// Exact estimate p_hat(x).
    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.sorted.partition_point(|v| *v < x - REACH * h);
        let hi = self.sorted.partition_point(|v| *v <= x + REACH * h);
        let s: f64 = self.sorted[lo..hi]
            .iter()
            .map(|v| (-0.5 * ((x - v) / h).powi(2)).exp())
            .sum();
        s / (self.sorted.len() as f64 * h * (2.0 * PI).sqrt())
    }

    /// Kernel values at `x` of the samples that reach it, unnormalised.
    pub fn local_contributions(&self, x: f64) -> Vec<f64> {
        let h = self.bandwidth;
        let lo = self.sorted.partition_point(|v| *v < x - REACH * h);
        let hi = self.sorted.partition_point(|v| *v <= x + REACH * h);
        self.sorted[lo..hi]
            .iter()
            .map(|v| (-0.5 * ((x - v) / h).powi(2)).exp())
            .collect()
    }

    /// Normaliser turning a sum of kernel values into a density.
    pub fn norm(&self) -> f64 {
        1.0 / (self.sorted.len() as f64 * self.bandwidth * (2.0 * PI).sqrt())
    }
}

/// Fits a Gaussian KDE to at least 100 finite scalar samples.
pub fn kde_fit(samples: &[f64], rule: BandwidthRule) -> Result<DensityModel> {
    if samples.len() < 100 {
        return Err(Error::Degenerate(format!(
            "KDE needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("zero-variance samples".into()));
    }
    let bandwidth = rule.bandwidth(&sorted);
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Degenerate(format!("bandwidth {bandwidth}")));
    }
    Ok(DensityModel {
        bandwidth,
        rule,
        support: (sorted[0], sorted[sorted.len() - 1]),
        sorted,
    })
}

/// KDE evaluated on a regular grid by binning and discrete convolution.
#[derive(Clone, Debug)]
pub struct BinnedDensity {
    pub origin: f64,
    pub width: f64,
    /// Estimated density at the centre of each bin.
    pub values: Vec<f64>,
    /// Number of samples that fell in each bin.
    pub counts: Vec<u32>,
}

impl BinnedDensity {
    pub fn centre(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.width
    }
}

/// Binned estimate over `[lo, hi]` with bandwidth `h` and bins of `width`
/// (h/16 when `width` is not positive). Bins widen if the budget is exceeded.
pub fn binned_kde(samples: &[f64], h: f64, lo: f64, hi: f64, width: f64) -> BinnedDensity {
    let mut width = if width > 0.0 { width } else { h / BINS_PER_H };
    let span = (hi - lo).max(width);
    if span / width > MAX_BINS as f64 {
        width = span / MAX_BINS as f64;
    }
    let nbins = (span / width).ceil() as usize + 1;
    let mut counts = vec![0u32; nbins];
    for &x in samples {
        let i = ((x - lo) / width).floor();
        if i >= 0.0 && (i as usize) < nbins {
            counts[i as usize] += 1;
        }
    }
    let reach = ((REACH * h) / width).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|d| (-0.5 * (d as f64 * width / h).powi(2)).exp())
        .collect();
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    let mut values = vec![0.0; nbins];
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let c = c as f64 * norm;
        let from = (i as isize - reach).max(0);
        let to = (i as isize + reach).min(nbins as isize - 1);
        for j in from..=to {
            values[j as usize] += c * kernel[(j - i as isize + reach) as usize];
        }
    }
    BinnedDensity {
        origin: lo,
        width,
        values,
        counts,
    }
}
