//! Sparse vector technique: sampling and exact output probabilities.

use rand::RngCore;

use super::output::SymbolString;
use crate::error::{Error, Result};
use crate::numeric;
use crate::rng;

#[derive(Clone, Copy, Debug)]
pub(crate) enum Noise {
    /// rho ~ Lap(b_rho), nu_i ~ Lap(b_nu).
    Benchmark { b_rho: f64, b_nu: f64 },
    /// rho ~ Uniform(-2 t1, -t1), nu_i ~ Lap(1 / lambda).
    Adapted { theta1: f64, lambda: f64 },
}

#[derive(Clone, Debug)]
pub(crate) struct SvtModel {
    pub thresholds: Vec<f64>,
    pub abort: usize,
    pub noise: Noise,
}

/// P(nu < s) for nu ~ Lap(b).
fn lap_cdf(s: f64, b: f64) -> f64 {
    if s < 0.0 {
        0.5 * (s / b).exp()
    } else {
        1.0 - 0.5 * (-s / b).exp()
    }
}

impl SvtModel {
    pub fn benchmark(theta: f64, sensitivity: f64, thresholds: Vec<f64>, abort: usize) -> Self {
        let theta1 = theta / 2.0;
        let theta2 = theta / 2.0;
        Self {
            noise: Noise::Benchmark {
                b_rho: sensitivity / theta1,
                b_nu: 2.0 * abort as f64 * sensitivity / theta2,
            },
            thresholds,
            abort,
        }
    }

    pub fn adapted(
        theta1: f64,
        theta2: f64,
        sensitivity: f64,
        thresholds: Vec<f64>,
        abort: usize,
    ) -> Self {
        Self {
            noise: Noise::Adapted {
                theta1,
                lambda: theta2 / (abort as f64 * sensitivity),
            },
            thresholds,
            abort,
        }
    }

    pub fn draw<R: RngCore>(&self, r: &mut R, x: &[f64]) -> SymbolString {
        let (rho, b_nu) = match self.noise {
            Noise::Benchmark { b_rho, b_nu } => (rng::laplace(r, b_rho), b_nu),
            Noise::Adapted { theta1, lambda } => (-theta1 * (1.0 + rng::unit(r)), 1.0 / lambda),
        };
        let mut tops = 0u64;
        let mut count = 0;
        let mut len = 0u8;
        for (i, (&q, &t)) in x.iter().zip(&self.thresholds).enumerate() {
            len += 1;
            if q + rng::laplace(r, b_nu) >= t + rho {
                tops |= 1 << i;
                count += 1;
                if count >= self.abort {
                    break;
                }
            }
        }
        SymbolString { len, tops }
    }

    /// Whether `out` can be produced at all.
    pub fn is_valid(&self, out: &SymbolString) -> bool {
        let n = self.thresholds.len();
        let len = out.len as usize;
        if len == 0 || len > n || (len < 64 && out.tops >> len != 0) {
            return false;
        }
        let count = out.count_tops() as usize;
        if count > self.abort {
            return false;
        }
        if count == self.abort {
            return out.tops >> (len - 1) & 1 == 1;
        }
        len == n
    }

    /// Exact Pr[M(x) = out].
    pub fn mass(&self, x: &[f64], out: &SymbolString) -> f64 {
        if !self.is_valid(out) {
            return 0.0;
        }
        match self.noise {
            Noise::Benchmark { b_rho, b_nu } => self.benchmark_mass(x, out, b_rho, b_nu),
            Noise::Adapted { theta1, lambda } => self.adapted_mass(x, out, theta1, lambda),
        }
    }

    fn benchmark_mass(&self, x: &[f64], out: &SymbolString, b_rho: f64, b_nu: f64) -> f64 {
        let len = out.len as usize;
        let integrand = |z: f64| {
            let mut p = 0.5 / b_rho * (-z.abs() / b_rho).exp();
            for i in 0..len {
                let below = lap_cdf(self.thresholds[i] + z - x[i], b_nu);
                p *= if out.tops >> i & 1 == 1 {
                    1.0 - below
                } else {
                    below
                };
            }
            p
        };
        let mut breaks = vec![0.0];
        breaks.extend((0..len).map(|i| x[i] - self.thresholds[i]));
        let reach = 40.0 * b_rho;
        numeric::integrate_with_breaks(integrand, -reach, reach, &breaks, 1e-13)
    }

    fn adapted_mass(&self, x: &[f64], out: &SymbolString, theta1: f64, lambda: f64) -> f64 {
        let len = out.len as usize;
        let (lo, hi) = (-2.0 * theta1, -theta1);
        let mut cuts = vec![lo, hi];
        for i in 0..len {
            let z = x[i] - self.thresholds[i];
            if z > lo && z < hi {
                cuts.push(z);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (z1, z2) = (w[0], w[1]);
            let zm = 0.5 * (z1 + z2);
            let half = 0.5 * (z2 - z1);
            // Polynomial in e^{lambda u}, u = z - zm, exponents -len..=len.
            let mut poly = vec![0.0; 2 * len + 1];
            poly[len] = 1.0;
            for i in 0..len {
                let s = self.thresholds[i] - x[i] + zm;
                let top = out.tops >> i & 1 == 1;
                // P(nu < s + u) = c0 + c1 e^{dir lambda u}
                let (c0, c1, dir): (f64, f64, i32) = if s < 0.0 {
                    (0.0, 0.5 * (lambda * s).exp(), 1)
                } else {
                    (1.0, -0.5 * (-lambda * s).exp(), -1)
                };
                let (c0, c1) = if top { (1.0 - c0, -c1) } else { (c0, c1) };
                let mut next = vec![0.0; 2 * len + 1];
                for (k, &v) in poly.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    next[k] += c0 * v;
                    let j = k as i32 + dir;
                    next[j as usize] += c1 * v;
                }
                poly = next;
            }
            for (k, &v) in poly.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let e = (k as f64 - len as f64) * lambda;
                let integral = if e == 0.0 {
                    2.0 * half
                } else {
                    2.0 * (e * half).sinh() / e
                };
                total += v * integral;
            }
        }
        (total / theta1).max(0.0)
    }

    /// All outputs with nonzero probability, shortest first within each prefix.
    pub fn enumerate(&self) -> Result<Vec<SymbolString>> {
        let n = self.thresholds.len();
        let mut out = Vec::new();
        fn rec(
            i: usize,
            count: usize,
            tops: u64,
            n: usize,
            abort: usize,
            out: &mut Vec<SymbolString>,
        ) -> bool {
            if out.len() > 1 << 20 {
                return false;
            }
            if i == n {
                out.push(SymbolString { len: n as u8, tops });
                return true;
            }
            if !rec(i + 1, count, tops, n, abort, out) {
                return false;
            }
            let t = tops | 1 << i;
            if count + 1 == abort {
                out.push(SymbolString {
                    len: (i + 1) as u8,
                    tops: t,
                });
                true
            } else {
                rec(i + 1, count + 1, t, n, abort, out)
            }
        }
        if !rec(0, 0, 0, n, self.abort, &mut out) {
            return Err(Error::Unsupported(
                "SVT output space too large to enumerate".into(),
            ));
        }
        Ok(out)
    }
}
