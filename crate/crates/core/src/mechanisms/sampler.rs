use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::dpsgd::ToyStep;
use super::output::{OutputKind, OutputSample, SampleBatch};
use super::rappor::RapporHash;
use super::spec::{Family, MechanismSpec, Structure};
use super::svt::SvtModel;
use crate::error::{invalid, Error, Result};
use crate::rng;

/// Blackbox sampling access to a mechanism: the only capability auditors get.
pub trait Sampler: Sync {
    fn output_kind(&self) -> OutputKind;

    fn input_len(&self) -> usize;

    /// `n` independent draws of M(input); a pure function of its arguments.
    fn sample_batch(&self, input: &[f64], seed: u64, n: usize) -> Result<SampleBatch>;
}

enum Engine {
    Laplace {
        scale: f64,
    },
    AdaptedLaplace {
        rate: f64,
        core: f64,
        width: f64,
        theta2: f64,
    },
    Gaussian {
        sigma: f64,
    },
    Svt(SvtModel),
    Rappor {
        hash: RapporHash,
        theta: f64,
    },
    Dpsgd {
        step: Box<ToyStep>,
        sigma: f64,
    },
}

/// A validated spec turned into a sampler.
pub struct MechanismSampler {
    spec: MechanismSpec,
    engine: Engine,
}

impl MechanismSampler {
    pub fn new(spec: &MechanismSpec) -> Result<Self> {
        spec.validate()?;
        let p = &spec.params;
        let d = spec.sensitivity;
        let engine = match (&spec.family, &spec.structure) {
            (Family::Laplace, _) => Engine::Laplace { scale: d / p[0] },
            (Family::AdaptedLaplace, _) => {
                let rate = p[0] / d;
                Engine::AdaptedLaplace {
                    rate,
                    core: -(-rate * p[1]).exp_m1(),
                    width: 1.0 / rate,
                    theta2: p[1],
                }
            }
            (Family::Gaussian, _) => Engine::Gaussian { sigma: p[0] },
            (Family::Svt, Structure::Svt { thresholds, abort }) => {
                Engine::Svt(SvtModel::benchmark(p[0], d, thresholds.clone(), *abort))
            }
            (Family::AdaptedSvt, Structure::Svt { thresholds, abort }) => {
                Engine::Svt(SvtModel::adapted(p[0], p[1], d, thresholds.clone(), *abort))
            }
            (Family::RapporOneTime, Structure::Rappor { k, h, hash_seed }) => Engine::Rappor {
                hash: RapporHash::new(*k, *h, *hash_seed),
                theta: p[0],
            },
            (Family::DpsgdOneStep, Structure::Dpsgd(cfg)) => Engine::Dpsgd {
                step: Box::new(ToyStep::new(cfg)?),
                sigma: p[0],
            },
            _ => return Err(invalid("family and structure disagree")),
        };
        Ok(Self {
            spec: spec.clone(),
            engine,
        })
    }

    pub fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    fn check(&self, input: &[f64]) -> Result<()> {
        let expected = self.spec.input_len();
        if input.len() != expected {
            return Err(Error::InputLength {
                expected,
                got: input.len(),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(invalid("inputs must be finite"));
        }
        Ok(())
    }
}

/// Noise of the adapted Laplace mechanism by inverting the CDF of |nu|:
/// 1 - e^{-rate r} on the core, then linear across the flat tail.
fn adapted_noise<R: RngCore>(r: &mut R, rate: f64, core: f64, width: f64, theta2: f64) -> f64 {
    let v = rng::unit(r);
    let sign = if r.next_u32() & 1 == 0 { -1.0 } else { 1.0 };
    let mag = if v < core {
        -(-v).ln_1p() / rate
    } else {
        theta2 + (v - core) / (1.0 - core) * width
    };
    sign * mag
}

impl Sampler for MechanismSampler {
    fn output_kind(&self) -> OutputKind {
        match &self.spec.structure {
            Structure::Svt { thresholds, .. } => OutputKind::Symbols {
                n: thresholds.len(),
            },
            Structure::Rappor { k, .. } => OutputKind::Bits { k: *k },
            _ => OutputKind::Real,
        }
    }

    fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    fn sample_batch(&self, input: &[f64], seed: u64, n: usize) -> Result<SampleBatch> {
        self.check(input)?;
        let x = input[0];
        Ok(match &self.engine {
            Engine::Laplace { scale } => {
                SampleBatch::Real(rng::generate(seed, n, |r| x + rng::laplace(r, *scale)))
            }
            Engine::AdaptedLaplace {
                rate,
                core,
                width,
                theta2,
            } => SampleBatch::Real(rng::generate(seed, n, |r| {
                x + adapted_noise(r, *rate, *core, *width, *theta2)
            })),
            Engine::Gaussian { sigma } => SampleBatch::Real(rng::generate(seed, n, |r| {
                let z: f64 = StandardNormal.sample(r);
                x + sigma * z
            })),
            Engine::Svt(model) => {
                SampleBatch::Symbols(rng::generate(seed, n, |r| model.draw(r, input)))
            }
            Engine::Rappor { hash, theta } => {
                let filter = hash.filter(x);
                let words = filter.len();
                let k = hash.k;
                let half = theta / 2.0;
                let rows = rng::generate(seed, n, |r| {
                    let mut w = filter.clone();
                    for j in 0..k {
                        let u = rng::unit(r);
                        let bit = 1u64 << (j % 64);
                        if u < half {
                            w[j / 64] |= bit;
                        } else if u < *theta {
                            w[j / 64] &= !bit;
                        }
                    }
                    w
                });
                SampleBatch::Bits {
                    k,
                    words,
                    data: rows.concat(),
                }
            }
            Engine::Dpsgd { step, sigma } => {
                SampleBatch::Real(rng::generate(seed, n, |r| step.draw(r, x, *sigma)))
            }
        })
    }
}

/// One draw of M(input) under `seed`.
pub fn sample(spec: &MechanismSpec, input: &[f64], seed: u64) -> Result<OutputSample> {
    Ok(sample_batch(spec, input, seed, 1)?.get(0))
}

/// `n` draws of M(input) under `seed`.
pub fn sample_batch(
    spec: &MechanismSpec,
    input: &[f64],
    seed: u64,
    n: usize,
) -> Result<SampleBatch> {
    MechanismSampler::new(spec)?.sample_batch(input, seed, n)
}
