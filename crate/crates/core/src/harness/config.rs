use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::auditors::AuditorConfig;
use crate::error::{invalid, Error, Result};
use crate::mechanisms::{canonical_pair, pair_for, AdjacentPair, MechanismSpec, Pattern};

/// A sweep of one mechanism parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Index into `MechanismSpec::params`.
    #[serde(default)]
    pub param: usize,
    pub values: Vec<f64>,
}

/// Where results go. Relative paths resolve against the working directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Line-delimited JSON records.
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
}

/// One experiment: a mechanism (optionally swept over a grid), an auditor,
/// the seeds to run and the claims to classify.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub grid: Option<Grid>,
    /// Required by `audit`; `sample` ignores it.
    #[serde(default)]
    pub auditor: Option<AuditorConfig>,
    /// Input pattern, by identifier or display name ("One Above"); the
    /// family's canonical pair when absent.
    #[serde(default, deserialize_with = "pattern_name")]
    pub pattern: Option<Pattern>,
    pub seeds: Vec<u64>,
    /// Claimed epsilons to classify each run against.
    #[serde(default)]
    pub claims: Vec<f64>,
    /// Per-input sample budget. Overrides the auditor's own budget, and sets the
    /// batch size for `sample`.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Multiplies the auditor's sample budget.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub output: OutputPaths,
}

fn pattern_name<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Pattern>, D::Error> {
    Option::<String>::deserialize(d)?
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .transpose()
}

fn default_name() -> String {
    "experiment".into()
}

fn default_scale() -> f64 {
    1.0
}

/// Batch size for `sample` when the config names none.
pub const DEFAULT_SAMPLE_BATCH: usize = 10_000;

impl ExperimentConfig {
    pub fn new(mechanism: MechanismSpec, auditor: Option<AuditorConfig>, seeds: Vec<u64>) -> Self {
        Self {
            name: default_name(),
            mechanism,
            grid: None,
            auditor,
            pattern: None,
            seeds,
            claims: Vec::new(),
            samples: None,
            scale: default_scale(),
            output: OutputPaths::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything but grid emptiness: an empty grid is a legal, if
    /// useless, audit.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed must be given".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!(
                "scale {} must be positive",
                self.scale
            )));
        }
        if self.samples == Some(0) {
            return Err(Error::Config("sample budget must be positive".into()));
        }
        if let Some(g) = &self.grid {
            if g.param >= self.mechanism.params.len() {
                return Err(Error::Config(format!(
                    "grid parameter {} out of range for {}",
                    g.param, self.mechanism.family
                )));
            }
        }
        if self.claims.iter().any(|e| !(*e >= 0.0)) {
            return Err(invalid("claims must be nonnegative"));
        }
        self.mechanism.validate()
    }

    /// The mechanisms to audit, one per grid value.
    pub fn points(&self) -> Result<Vec<MechanismSpec>> {
        let Some(g) = &self.grid else {
            return Ok(vec![self.mechanism.clone()]);
        };
        g.values
            .iter()
            .map(|&v| {
                let mut spec = self.mechanism.clone();
                spec.params[g.param] = v;
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    pub fn pair(&self, spec: &MechanismSpec) -> Result<AdjacentPair> {
        match self.pattern {
            Some(p) => pair_for(spec, p),
            None => Ok(canonical_pair(spec)),
        }
    }

    /// The auditor with budget overrides applied.
    pub fn effective_auditor(&self) -> Result<AuditorConfig> {
        let base = self
            .auditor
            .as_ref()
            .ok_or_else(|| Error::Config("no auditor configured".into()))?;
        let a = match self.samples {
            Some(n) => base.with_samples(n),
            None => base.clone(),
        };
        Ok(if self.scale == 1.0 {
            a
        } else {
            a.scaled(self.scale)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
name = "laplace-grid"
seeds = [1, 2]
claims = [1.0]
pattern = "One Below"

[mechanism]
family = "laplace"
params = [1.0]

[grid]
values = [0.5, 1.0, 2.0]

[auditor]
tool = "dp_sniper"
c = 0.01
n_train = 1000
n_est = 1000
"#;

    #[test]
    fn parses_and_expands() {
        let cfg = ExperimentConfig::from_toml(TEXT).unwrap();
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2].params, vec![2.0]);
        assert_eq!(cfg.pair(&pts[0]).unwrap().q_a_prime, vec![0.0]);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn seeds_are_required() {
        let text = TEXT.replace("seeds = [1, 2]", "seeds = []");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(Error::Config(_))
        ));
    }
}
