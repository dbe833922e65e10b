use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{SampleBatch, SymbolString};

const MAX_KNOTS: usize = 1 << 16;
const RIDGE: f64 = 1e-6;

/// How outputs are turned into features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// Scalars: u = pooled rank position in [-1/2, 1/2] (linear between knots,
    /// extrapolated outside), features [u, |u|, 1].
    Rank { knots: Vec<f64> },
    /// Bit vectors: one feature per bit plus a bias.
    Bits { k: usize },
    /// Symbol strings: a log-odds table, one entry per observed output.
    Table { entries: Vec<(SymbolString, f64)> },
    /// Both batches held a single identical value.
    Constant,
}

/// Discriminator between samples of M(a) (label 1) and M(a') (label 0). Its
/// score estimates ln Pr[a | b] / Pr[a' | b], which for balanced training data
/// is monotone in the likelihood ratio r(b).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    pub features: FeatureMap,
    pub weights: Vec<f64>,
    /// Set when the training data carried no usable signal.
    pub degenerate: bool,
}

impl RatioModel {
    /// Score of the i-th element of `batch`.
    pub fn score(&self, batch: &SampleBatch, i: usize) -> f64 {
        match (&self.features, batch) {
            (FeatureMap::Rank { knots }, SampleBatch::Real(v)) => {
                let u = rank_position(knots, v[i]);
                self.weights[0] * u + self.weights[1] * u.abs() + self.weights[2]
            }
            (FeatureMap::Bits { k }, SampleBatch::Bits { .. }) => {
                let words = batch.bit_words(i);
                let mut s = self.weights[*k];
                for (j, w) in self.weights[..*k].iter().enumerate() {
                    if words[j / 64] >> (j % 64) & 1 == 1 {
                        s += w;
                    }
                }
                s
            }
            (FeatureMap::Table { entries }, SampleBatch::Symbols(v)) => entries
                .binary_search_by(|(s, _)| s.cmp(&v[i]))
                .map(|j| entries[j].1)
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Scores of every element of `batch`.
    pub fn scores(&self, batch: &SampleBatch) -> Vec<f64> {
        (0..batch.len()).map(|i| self.score(batch, i)).collect()
    }

    /// Score of a scalar output (0 for non-scalar models).
    pub fn score_real(&self, b: f64) -> f64 {
        match &self.features {
            FeatureMap::Rank { knots } => {
                let u = rank_position(knots, b);
                self.weights[0] * u + self.weights[1] * u.abs() + self.weights[2]
            }
            _ => 0.0,
        }
    }
}

/// Rank position of `x` among the knots, in [-1/2, 1/2] inside the knot range.
fn rank_position(knots: &[f64], x: f64) -> f64 {
    let n = knots.len();
    if n < 2 {
        return 0.0;
    }
    let span = (n - 1) as f64;
    let i = knots.partition_point(|k| *k <= x);
    let pos = if i == 0 {
        let gap = (knots[1] - knots[0]).max(f64::MIN_POSITIVE);
        (x - knots[0]) / gap
    } else if i >= n {
        let gap = (knots[n - 1] - knots[n - 2]).max(f64::MIN_POSITIVE);
        span + (x - knots[n - 1]) / gap
    } else {
        let (lo, hi) = (knots[i - 1], knots[i]);
        let frac = if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
        (i - 1) as f64 + frac
    };
    pos / span - 0.5
}

/// Trains the discriminator on labelled samples of M(a) and M(a').
pub fn fit_ratio_model(samples_a: &SampleBatch, samples_b: &SampleBatch) -> Result<RatioModel> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(Error::Degenerate("empty training batch".into()));
    }
    if samples_a.kind() != samples_b.kind() {
        return Err(Error::Degenerate(
            "training batches have different output types".into(),
        ));
    }
    match (samples_a, samples_b) {
        (SampleBatch::Real(a), SampleBatch::Real(b)) => fit_real(a, b),
        (SampleBatch::Bits { k, .. }, SampleBatch::Bits { .. }) => {
            fit_bits(*k, samples_a, samples_b)
        }
        (SampleBatch::Symbols(a), SampleBatch::Symbols(b)) => Ok(fit_table(a, b)),
        _ => unreachable!("kinds checked above"),
    }
}

fn constant() -> RatioModel {
    RatioModel {
        features: FeatureMap::Constant,
        weights: vec![],
        degenerate: true,
    }
}

fn fit_real(a: &[f64], b: &[f64]) -> Result<RatioModel> {
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite training sample".into()));
    }
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    if pooled[0] == pooled[pooled.len() - 1] {
        return Ok(constant());
    }
    let n = pooled.len();
    let k = n.min(MAX_KNOTS);
    let mut knots: Vec<f64> = (0..k)
        .map(|i| pooled[i * (n - 1) / (k - 1).max(1)])
        .collect();
    knots.dedup();
    let us: Vec<f64> = a
        .iter()
        .chain(b)
        .map(|&x| rank_position(&knots, x))
        .collect();
    let na = a.len();
    let weights = logistic(us.len(), 3, |i, x| {
        let u = us[i];
        x.copy_from_slice(&[u, u.abs(), 1.0]);
        (if i < na { 1.0 } else { 0.0 }, 1.0)
    });
    let degenerate = weights[0].abs() + weights[1].abs() < 1e-9;
    Ok(RatioModel {
        features: FeatureMap::Rank { knots },
        weights,
        degenerate,
    })
}

fn fit_bits(k: usize, a: &SampleBatch, b: &SampleBatch) -> Result<RatioModel> {
    // Group identical vectors: (count under a, count under a').
    let mut groups: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
    for i in 0..a.len() {
        groups.entry(a.bit_words(i).to_vec()).or_default().0 += 1.0;
    }
    for i in 0..b.len() {
        groups.entry(b.bit_words(i).to_vec()).or_default().1 += 1.0;
    }
    if groups.len() == 1 {
        return Ok(constant());
    }
    let mut keys: Vec<&Vec<u64>> = groups.keys().collect();
    keys.sort();
    let mut rows = Vec::with_capacity(2 * keys.len());
    for key in keys {
        let (na, nb) = groups[key];
        let mut x: Vec<f64> = (0..k)
            .map(|j| (key[j / 64] >> (j % 64) & 1) as f64)
            .collect();
        x.push(1.0);
        if na > 0.0 {
            rows.push((x.clone(), 1.0, na));
        }
        if nb > 0.0 {
            rows.push((x, 0.0, nb));
        }
    }
    let weights = logistic(rows.len(), k + 1, |i, x| {
        x.copy_from_slice(&rows[i].0);
        (rows[i].1, rows[i].2)
    });
    let degenerate = weights[..k].iter().all(|w| w.abs() < 1e-9);
    Ok(RatioModel {
        features: FeatureMap::Bits { k },
        weights,
        degenerate,
    })
}

fn fit_table(a: &[SymbolString], b: &[SymbolString]) -> RatioModel {
    let mut counts: HashMap<SymbolString, (f64, f64)> = HashMap::new();
    for s in a {
        counts.entry(*s).or_default().0 += 1.0;
    }
    for s in b {
        counts.entry(*s).or_default().1 += 1.0;
    }
    if counts.len() == 1 {
        return constant();
    }
    let prior = (a.len() as f64 / b.len() as f64).ln();
    let mut entries: Vec<(SymbolString, f64)> = counts
        .into_iter()
        .map(|(s, (na, nb))| (s, ((na + 0.5) / (nb + 0.5)).ln() - prior))
        .collect();
    entries.sort_by_key(|x| x.0);
    RatioModel {
        features: FeatureMap::Table { entries },
        weights: vec![],
        degenerate: false,
    }
}

/// Weighted ridge logistic regression by Newton's method. `row(i, x)` fills the
/// features of row `i` into `x` and returns (label, weight).
fn logistic<F>(rows: usize, dim: usize, row: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) -> (f64, f64),
{
    let mut w = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    let total: f64 = (0..rows).map(|i| row(i, &mut x).1).sum();
    for _ in 0..100 {
        let mut grad = vec![0.0; dim];
        let mut hess = vec![vec![0.0; dim]; dim];
        for r in 0..rows {
            let (y, c) = row(r, &mut x);
            let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            let s = c * p * (1.0 - p);
            for i in 0..dim {
                grad[i] += c * (y - p) * x[i];
                for j in 0..=i {
                    hess[i][j] += s * x[i] * x[j];
                }
            }
        }
        for i in 0..dim {
            grad[i] -= RIDGE * total * w[i];
            hess[i][i] += RIDGE * total;
            for j in 0..i {
                hess[j][i] = hess[i][j];
            }
        }
        let Some(step) = solve(hess, grad) else { break };
        let size: f64 = step.iter().map(|s| s.abs()).fold(0.0, f64::max);
        for i in 0..dim {
            w[i] += step[i];
        }
        if size < 1e-10 {
            break;
        }
    }
    w
}

/// Gaussian elimination with partial pivoting.
fn solve(mut m: Vec<Vec<f64>>, mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        v.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            v[r] -= f * v[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (v[r] - s) / m[r][r];
    }
    Some(x)
}
