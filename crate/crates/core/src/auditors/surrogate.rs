use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::{bisect, scan_max};

/// Delta-Siege's privacy surrogate rho(eps, delta), non-increasing in both arguments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateFn {
    /// 1 / (e^eps delta).
    #[default]
    InverseExpDelta,
    /// sensitivity / eps, independent of delta.
    SensitivityOverEpsilon { sensitivity: f64 },
    /// e^(-k eps) / delta.
    ExpDelta { k: f64 },
    /// Bilinear interpolation of `values[i][j]` at (epsilons[i], deltas[j]),
    /// clamped outside the grid.
    Tabulated {
        epsilons: Vec<f64>,
        deltas: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    /// base^exponent with exponent > 0: same minimisers as `base`.
    Power {
        base: Box<SurrogateFn>,
        exponent: f64,
    },
}

impl std::str::FromStr for SurrogateFn {
    type Err = crate::Error;

    /// Accepts `inv-exp-delta`, `delta-over-eps[:SENS]` and `exp-k:K`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: f64| -> Result<f64> {
            a.map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| invalid(format!("bad surrogate argument `{v}`")))
            })
        };
        let f = match name.to_ascii_lowercase().as_str() {
            "inv-exp-delta" | "1/(e^eps*delta)" | "inverse" => SurrogateFn::InverseExpDelta,
            "delta-over-eps" | "sensitivity-over-eps" => SurrogateFn::SensitivityOverEpsilon {
                sensitivity: num(arg, 1.0)?,
            },
            "exp-k" => SurrogateFn::ExpDelta { k: num(arg, 3.0)? },
            _ => {
                return Err(crate::Error::Unknown {
                    kind: "surrogate",
                    name: s.into(),
                })
            }
        };
        f.validate()?;
        Ok(f)
    }
}

impl SurrogateFn {
    pub fn value(&self, eps: f64, delta: f64) -> f64 {
        match self {
            SurrogateFn::InverseExpDelta => (-eps).exp() / delta,
            SurrogateFn::SensitivityOverEpsilon { sensitivity } => sensitivity / eps,
            SurrogateFn::ExpDelta { k } => (-k * eps).exp() / delta,
            SurrogateFn::Tabulated {
                epsilons,
                deltas,
                values,
            } => {
                let (i, u) = locate(epsilons, eps);
                let (j, v) = locate(deltas, delta);
                let at = |a: usize, b: usize| values[a][b];
                let (i1, j1) = (
                    (i + 1).min(epsilons.len() - 1),
                    (j + 1).min(deltas.len() - 1),
                );
                (1.0 - u) * (1.0 - v) * at(i, j)
                    + u * (1.0 - v) * at(i1, j)
                    + (1.0 - u) * v * at(i, j1)
                    + u * v * at(i1, j1)
            }
            SurrogateFn::Power { base, exponent } => base.value(eps, delta).powf(*exponent),
        }
    }

    /// Checks parameters and, on a grid, monotonicity in both arguments.
    pub fn validate(&self) -> Result<()> {
        match self {
            SurrogateFn::SensitivityOverEpsilon { sensitivity } if !(*sensitivity > 0.0) => {
                return Err(invalid("surrogate sensitivity must be positive"))
            }
            SurrogateFn::ExpDelta { k } if !(*k > 0.0) => {
                return Err(invalid("surrogate k must be positive"))
            }
            SurrogateFn::Power { base, exponent } => {
                if !(*exponent > 0.0) {
                    return Err(invalid("surrogate exponent must be positive"));
                }
                base.validate()?;
            }
            SurrogateFn::Tabulated {
                epsilons,
                deltas,
                values,
            } => {
                let sorted = |v: &[f64]| v.len() >= 2 && v.windows(2).all(|w| w[0] < w[1]);
                if !sorted(epsilons) || !sorted(deltas) {
                    return Err(invalid("surrogate grids must be strictly increasing"));
                }
                if values.len() != epsilons.len() || values.iter().any(|r| r.len() != deltas.len())
                {
                    return Err(invalid("surrogate table shape does not match its grids"));
                }
            }
            _ => {}
        }
        let eps: Vec<f64> = (0..=40).map(|i| 0.25 * i as f64).collect();
        let dels: Vec<f64> = (1..=40).map(|i| i as f64 / 41.0).collect();
        for (a, &e) in eps.iter().enumerate() {
            for (b, &d) in dels.iter().enumerate() {
                let v = self.value(e, d);
                let tol = 1e-12 * v.abs().max(1.0);
                if a + 1 < eps.len() && self.value(eps[a + 1], d) > v + tol {
                    return Err(invalid("surrogate increases in epsilon"));
                }
                if b + 1 < dels.len() && self.value(e, dels[b + 1]) > v + tol {
                    return Err(invalid("surrogate increases in delta"));
                }
            }
        }
        Ok(())
    }

    /// Minimum of rho over the feasible line delta = s - alpha e^eps, eps >= 0,
    /// delta > 0, where s = 1 - beta. Returns (rho, eps, delta), or None if
    /// the line has no feasible point.
    pub fn minimize_on_line(&self, alpha: f64, s: f64) -> Option<(f64, f64, f64)> {
        if !(s > alpha) || !(s > 0.0) {
            return None;
        }
        let at = |x: f64| (self.value(x.ln(), s - alpha * x), x.ln(), s - alpha * x);
        match self {
            SurrogateFn::InverseExpDelta => Some(tangent(1.0, alpha, s)),
            SurrogateFn::ExpDelta { k } => {
                let (_, e, d) = tangent(*k, alpha, s);
                Some((self.value(e, d), e, d))
            }
            SurrogateFn::SensitivityOverEpsilon { .. } => {
                if alpha <= 0.0 {
                    return Some((0.0, f64::INFINITY, s));
                }
                // Only epsilon matters: push it to the end of the line.
                let e = (s / alpha).ln();
                Some((self.value(e, 0.0), e, 0.0))
            }
            SurrogateFn::Power { base, exponent } => base
                .minimize_on_line(alpha, s)
                .map(|(r, e, d)| (r.powf(*exponent), e, d)),
            SurrogateFn::Tabulated { .. } => {
                let top = if alpha > 0.0 { (s / alpha).ln() } else { 50.0 };
                let (e, _) = scan_max(
                    |e| -self.value(e, s - alpha * e.exp()),
                    0.0,
                    top * (1.0 - 1e-12),
                    400,
                    1e-10,
                );
                let r = at(e.exp());
                Some(r)
            }
        }
    }

    /// The epsilon at which rho(eps, delta_c) = rho, searched on [0, 50].
    pub fn solve_epsilon(&self, rho: f64, delta_c: f64) -> f64 {
        match self {
            SurrogateFn::InverseExpDelta => -(rho * delta_c).ln(),
            SurrogateFn::ExpDelta { k } => -(rho * delta_c).ln() / k,
            SurrogateFn::SensitivityOverEpsilon { sensitivity } => sensitivity / rho,
            SurrogateFn::Power { base, exponent } => {
                base.solve_epsilon(rho.powf(1.0 / exponent), delta_c)
            }
            SurrogateFn::Tabulated { .. } => {
                let f = |e: f64| self.value(e, delta_c) - rho;
                if f(0.0) <= 0.0 {
                    return 0.0;
                }
                if f(50.0) > 0.0 {
                    return 50.0;
                }
                bisect(f, 0.0, 50.0, 1e-10).unwrap_or(50.0)
            }
        }
    }
}

/// Minimiser of e^(-k eps) / (s - alpha e^eps) over eps >= 0: the tangent point
/// e^eps = k s / ((k + 1) alpha), or eps = 0 if that lies below 1.
fn tangent(k: f64, alpha: f64, s: f64) -> (f64, f64, f64) {
    let x = if alpha > 0.0 {
        k * s / ((k + 1.0) * alpha)
    } else {
        f64::INFINITY
    };
    let x = if x <= 1.0 { 1.0 } else { x };
    if x.is_infinite() {
        return (0.0, f64::INFINITY, s);
    }
    let d = s - alpha * x;
    ((-k * x.ln()).exp() / d, x.ln(), d)
}

/// Index of the grid cell holding `x` and the fractional position inside it.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    if x <= grid[0] {
        return (0, 0.0);
    }
    let n = grid.len();
    if x >= grid[n - 1] {
        return (n - 1, 0.0);
    }
    let i = grid.partition_point(|g| *g <= x) - 1;
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}
