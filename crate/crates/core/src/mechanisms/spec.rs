use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dpsgd::DpsgdConfig;
use crate::error::{invalid, Error, Result};

/// Mechanism families known to the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Laplace,
    AdaptedLaplace,
    Svt,
    AdaptedSvt,
    RapporOneTime,
    Gaussian,
    DpsgdOneStep,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Laplace => "laplace",
            Family::AdaptedLaplace => "adapted_laplace",
            Family::Svt => "svt",
            Family::AdaptedSvt => "adapted_svt",
            Family::RapporOneTime => "rappor_one_time",
            Family::Gaussian => "gaussian",
            Family::DpsgdOneStep => "dpsgd_one_step",
        }
    }

    pub fn is_adapted(self) -> bool {
        matches!(self, Family::AdaptedLaplace | Family::AdaptedSvt)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "laplace" => Family::Laplace,
            "adaptedlaplace" => Family::AdaptedLaplace,
            "svt" => Family::Svt,
            "adaptedsvt" => Family::AdaptedSvt,
            "rappor" | "rapporonetime" | "onetimerappor" => Family::RapporOneTime,
            "gaussian" => Family::Gaussian,
            "dpsgd" | "dpsgdonestep" => Family::DpsgdOneStep,
            _ => {
                return Err(Error::Unknown {
                    kind: "mechanism family",
                    name: s.to_string(),
                })
            }
        })
    }
}

/// Structural configuration that is not a privacy parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    /// One scalar query.
    #[default]
    Scalar,
    /// Sparse vector: one threshold per query, abort after `abort` tops.
    Svt { thresholds: Vec<f64>, abort: usize },
    /// One-time RAPPOR with a `k`-bit Bloom filter and `h` hashes.
    Rappor { k: usize, h: usize, hash_seed: u64 },
    /// One noisy clipped-gradient step on a synthetic linear task.
    Dpsgd(DpsgdConfig),
}

/// A mechanism family with its parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub family: Family,
    pub params: Vec<f64>,
    #[serde(default = "default_sensitivity")]
    pub sensitivity: f64,
    #[serde(default)]
    pub structure: Structure,
}

fn default_sensitivity() -> f64 {
    1.0
}

impl MechanismSpec {
    pub fn laplace(theta: f64) -> Self {
        Self::scalar(Family::Laplace, vec![theta])
    }

    pub fn adapted_laplace(theta1: f64, theta2: f64) -> Self {
        Self::scalar(Family::AdaptedLaplace, vec![theta1, theta2])
    }

    pub fn gaussian(theta: f64) -> Self {
        Self::scalar(Family::Gaussian, vec![theta])
    }

    /// SVT with the given thresholds (one per query) and abort count.
    pub fn svt(theta: f64, thresholds: Vec<f64>, abort: usize) -> Self {
        Self {
            family: Family::Svt,
            params: vec![theta],
            sensitivity: 1.0,
            structure: Structure::Svt { thresholds, abort },
        }
    }

    pub fn adapted_svt(theta1: f64, theta2: f64, thresholds: Vec<f64>, abort: usize) -> Self {
        Self {
            family: Family::AdaptedSvt,
            params: vec![theta1, theta2],
            sensitivity: 1.0,
            structure: Structure::Svt { thresholds, abort },
        }
    }

    pub fn rappor(theta: f64, k: usize, h: usize, hash_seed: u64) -> Self {
        Self {
            family: Family::RapporOneTime,
            params: vec![theta],
            sensitivity: 1.0,
            structure: Structure::Rappor { k, h, hash_seed },
        }
    }

    pub fn dpsgd(theta: f64, config: DpsgdConfig) -> Self {
        Self {
            family: Family::DpsgdOneStep,
            params: vec![theta],
            sensitivity: config.clip,
            structure: Structure::Dpsgd(config),
        }
    }

    pub fn with_sensitivity(mut self, sensitivity: f64) -> Self {
        self.sensitivity = sensitivity;
        self
    }

    fn scalar(family: Family, params: Vec<f64>) -> Self {
        Self {
            family,
            params,
            sensitivity: 1.0,
            structure: Structure::Scalar,
        }
    }

    /// First parameter; every family has one.
    pub fn theta(&self) -> f64 {
        self.params[0]
    }

    /// Checks the family invariants.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let need = match self.family {
            Family::AdaptedLaplace | Family::AdaptedSvt => 2,
            _ => 1,
        };
        if p.len() != need {
            return Err(invalid(format!(
                "{} takes {need} parameter(s), got {}",
                self.family,
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        if !(self.sensitivity > 0.0 && self.sensitivity.is_finite()) {
            return Err(invalid("sensitivity must be positive"));
        }
        match (self.family, &self.structure) {
            (Family::Laplace | Family::Gaussian, Structure::Scalar) => positive(p[0], "theta"),
            (Family::AdaptedLaplace, Structure::Scalar) => {
                positive(p[0], "theta1")?;
                if p[1] < 0.0 {
                    return Err(invalid("theta2 must be non-negative"));
                }
                Ok(())
            }
            (Family::Svt | Family::AdaptedSvt, Structure::Svt { thresholds, abort }) => {
                positive(p[0], "theta")?;
                if self.family == Family::AdaptedSvt {
                    positive(p[1], "theta2")?;
                }
                if thresholds.is_empty() || thresholds.len() > 64 {
                    return Err(invalid("SVT needs between 1 and 64 queries"));
                }
                if *abort == 0 {
                    return Err(invalid("abort count must be at least 1"));
                }
                Ok(())
            }
            (Family::RapporOneTime, Structure::Rappor { k, h, .. }) => {
                if !(p[0] > 0.0 && p[0] <= 1.0) {
                    return Err(invalid("RAPPOR theta must lie in (0, 1]"));
                }
                if *h == 0 || *k < 2 * h {
                    return Err(invalid("RAPPOR needs h >= 1 and k >= 2h"));
                }
                Ok(())
            }
            (Family::DpsgdOneStep, Structure::Dpsgd(cfg)) => {
                positive(p[0], "theta")?;
                cfg.validate()
            }
            (family, structure) => Err(invalid(format!(
                "structure {structure:?} does not fit family {family}"
            ))),
        }
    }

    /// Length of the query vector the mechanism consumes.
    pub fn input_len(&self) -> usize {
        match &self.structure {
            Structure::Svt { thresholds, .. } => thresholds.len(),
            _ => 1,
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

/// f(t1, t2) = (e^{-t1 t2} - e^{-2 t1 t2}) / (t1 t2): the expectation of
/// e^{t2 z} for z uniform on [-2 t1, -t1].
pub fn adapted_svt_mass(theta1: f64, theta2: f64) -> f64 {
    let x = theta1 * theta2;
    if x < 1e-8 {
        return 1.0 - 1.5 * x;
    }
    (-x).exp() * (-(-x).exp_m1()) / x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let spec = MechanismSpec::svt(0.5, vec![1.0, 1.0], 1);
        let text = spec.to_toml().unwrap();
        assert_eq!(MechanismSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(MechanismSpec::laplace(0.0).validate().is_err());
        assert!(MechanismSpec::rappor(0.5, 3, 2, 0).validate().is_err());
        assert!(MechanismSpec::adapted_laplace(1.0, -1.0)
            .validate()
            .is_err());
        assert!(MechanismSpec::svt(1.0, vec![], 1).validate().is_err());
    }

    #[test]
    fn family_names_parse() {
        for f in [
            Family::Laplace,
            Family::AdaptedLaplace,
            Family::Svt,
            Family::AdaptedSvt,
            Family::RapporOneTime,
            Family::Gaussian,
            Family::DpsgdOneStep,
        ] {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("laplacian".parse::<Family>().is_err());
    }

    #[test]
    fn f_closed_form() {
        let v = adapted_svt_mass(1.0, 1.0);
        assert!((v - ((-1f64).exp() - (-2f64).exp())).abs() < 1e-15);
    }
}
