//! Exact output probabilities. Ground-truth code only; auditors never see this.

use super::dpsgd::ToyStep;
use super::output::{OutputSample, SymbolString};
use super::rappor::{bloom_positions, RapporHash};
use super::spec::{Family, MechanismSpec, Structure};
use super::svt::SvtModel;
use crate::error::{invalid, Error, Result};
use crate::numeric::phi;

enum Kind {
    Laplace { scale: f64 },
    AdaptedLaplace { rate: f64, theta2: f64 },
    Gaussian { sigma: f64 },
    Svt(SvtModel),
    Rappor { hash: RapporHash, theta: f64 },
    Dpsgd { step: Box<ToyStep>, sigma: f64 },
}

/// Analytical densities (continuous outputs) and masses (discrete outputs).
pub struct DensityOracle {
    spec: MechanismSpec,
    kind: Kind,
}

impl DensityOracle {
    pub fn new(spec: &MechanismSpec) -> Result<Self> {
        spec.validate()?;
        let p = &spec.params;
        let d = spec.sensitivity;
        let kind = match (&spec.family, &spec.structure) {
            (Family::Laplace, _) => Kind::Laplace { scale: d / p[0] },
            (Family::AdaptedLaplace, _) => Kind::AdaptedLaplace {
                rate: p[0] / d,
                theta2: p[1],
            },
            (Family::Gaussian, _) => Kind::Gaussian { sigma: p[0] },
            (Family::Svt, Structure::Svt { thresholds, abort }) => {
                Kind::Svt(SvtModel::benchmark(p[0], d, thresholds.clone(), *abort))
            }
            (Family::AdaptedSvt, Structure::Svt { thresholds, abort }) => {
                Kind::Svt(SvtModel::adapted(p[0], p[1], d, thresholds.clone(), *abort))
            }
            (Family::RapporOneTime, Structure::Rappor { k, h, hash_seed }) => Kind::Rappor {
                hash: RapporHash::new(*k, *h, *hash_seed),
                theta: p[0],
            },
            (Family::DpsgdOneStep, Structure::Dpsgd(cfg)) => Kind::Dpsgd {
                step: Box::new(ToyStep::new(cfg)?),
                sigma: p[0],
            },
            _ => return Err(invalid("family and structure disagree")),
        };
        Ok(Self {
            spec: spec.clone(),
            kind,
        })
    }

    pub fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    pub fn is_scalar(&self) -> bool {
        matches!(
            self.kind,
            Kind::Laplace { .. }
                | Kind::AdaptedLaplace { .. }
                | Kind::Gaussian { .. }
                | Kind::Dpsgd { .. }
        )
    }

    fn check(&self, input: &[f64]) -> Result<()> {
        let expected = self.spec.input_len();
        if input.len() != expected {
            return Err(Error::InputLength {
                expected,
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Centre of the output distribution for scalar families.
    pub fn location(&self, input: &[f64]) -> Result<f64> {
        self.check(input)?;
        match &self.kind {
            Kind::Dpsgd { step, .. } => Ok(step.location(input[0])),
            _ if self.is_scalar() => Ok(input[0]),
            _ => Err(Error::Unsupported("location of a non-scalar output".into())),
        }
    }

    /// Density of the centred noise at `v` (scalar families).
    pub fn noise_density(&self, v: f64) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Laplace { scale } => 0.5 / scale * (-v.abs() / scale).exp(),
            Kind::AdaptedLaplace { rate, theta2 } => {
                let r = v.abs();
                if r <= *theta2 {
                    0.5 * rate * (-rate * r).exp()
                } else if r <= theta2 + 1.0 / rate {
                    0.5 * rate * (-rate * theta2).exp()
                } else {
                    0.0
                }
            }
            Kind::Gaussian { sigma } | Kind::Dpsgd { sigma, .. } => {
                (-(v / sigma).powi(2) / 2.0).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            _ => {
                return Err(Error::Unsupported(
                    "noise density of a discrete output".into(),
                ))
            }
        })
    }

    /// CDF of the centred noise at `v` (scalar families).
    pub fn noise_cdf(&self, v: f64) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Laplace { scale } => {
                if v < 0.0 {
                    0.5 * (v / scale).exp()
                } else {
                    1.0 - 0.5 * (-v / scale).exp()
                }
            }
            Kind::AdaptedLaplace { rate, theta2 } => {
                let r = v.abs();
                let core = -(-rate * theta2).exp_m1();
                let g = if r <= *theta2 {
                    -(-rate * r).exp_m1()
                } else {
                    (core + (r - theta2) * rate * (1.0 - core)).min(1.0)
                };
                if v < 0.0 {
                    0.5 * (1.0 - g)
                } else {
                    0.5 * (1.0 + g)
                }
            }
            Kind::Gaussian { sigma } | Kind::Dpsgd { sigma, .. } => phi(v / sigma),
            _ => return Err(Error::Unsupported("CDF of a discrete output".into())),
        })
    }

    /// Half-width of the noise support, infinite for unbounded noise.
    pub fn noise_reach(&self) -> f64 {
        match &self.kind {
            Kind::AdaptedLaplace { rate, theta2 } => theta2 + 1.0 / rate,
            _ => f64::INFINITY,
        }
    }

    /// Pr[M(input) <= x] for scalar families.
    pub fn cdf(&self, input: &[f64], x: f64) -> Result<f64> {
        let loc = self.location(input)?;
        self.noise_cdf(x - loc)
    }

    /// Pr[lo < M(input) <= hi] for scalar families.
    pub fn interval_probability(&self, input: &[f64], lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let loc = self.location(input)?;
        let (a, b) = (lo - loc, hi - loc);
        // Work on the side with the smaller tail to keep precision.
        if a >= 0.0 {
            Ok((1.0 - self.noise_cdf(a)?) - (1.0 - self.noise_cdf(b)?))
        } else {
            Ok(self.noise_cdf(b)? - self.noise_cdf(a)?)
        }
    }

    /// Density (scalar outputs) or probability mass (discrete outputs) of `output`.
    pub fn density(&self, input: &[f64], output: &OutputSample) -> Result<f64> {
        self.check(input)?;
        match (&self.kind, output) {
            (_, OutputSample::Real(b)) if self.is_scalar() => {
                self.noise_density(b - self.location(input)?)
            }
            (Kind::Svt(model), OutputSample::Symbols(s)) => {
                if s.len() > 64 {
                    return Ok(0.0);
                }
                Ok(model.mass(input, &SymbolString::from_symbols(s)))
            }
            (Kind::Rappor { hash, theta }, OutputSample::Bits(bits)) => {
                if bits.len() != hash.k {
                    return Err(invalid("bit vector length differs from the filter size"));
                }
                let pos = bloom_positions(hash, input[0]);
                let (keep, flip) = (1.0 - theta / 2.0, theta / 2.0);
                Ok(bits
                    .iter()
                    .enumerate()
                    .map(|(j, b)| if *b == pos.contains(&j) { keep } else { flip })
                    .product())
            }
            _ => Err(invalid("output does not match the mechanism's output type")),
        }
    }

    /// Mass of a packed SVT output.
    pub fn svt_mass(&self, input: &[f64], output: &SymbolString) -> Result<f64> {
        self.check(input)?;
        match &self.kind {
            Kind::Svt(model) => Ok(model.mass(input, output)),
            _ => Err(Error::Unsupported("not an SVT mechanism".into())),
        }
    }

    /// Every SVT output with nonzero probability.
    pub fn svt_outputs(&self) -> Result<Vec<SymbolString>> {
        match &self.kind {
            Kind::Svt(model) => model.enumerate(),
            _ => Err(Error::Unsupported("not an SVT mechanism".into())),
        }
    }

    /// Bloom-filter positions of a RAPPOR item, plus (k, theta).
    pub fn rappor_filter(&self, item: f64) -> Result<(Vec<usize>, usize, f64)> {
        match &self.kind {
            Kind::Rappor { hash, theta } => Ok((bloom_positions(hash, item), hash.k, *theta)),
            _ => Err(Error::Unsupported("not a RAPPOR mechanism".into())),
        }
    }
}
