use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::auditors::AuditorConfig;
use crate::error::{Error, Result};
use crate::estimators::PowerEstimate;
use crate::fp_analyzer::{classify, AuditVerdict};
use crate::ground_truth::{true_epsilon_for, Epsilon, EpsilonKind};
use crate::mechanisms::{AdjacentPair, MechanismSampler, MechanismSpec};
use crate::serde_ext::fmt;

/// Everything needed to repeat one audit run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub spec: MechanismSpec,
    pub pair: AdjacentPair,
    pub auditor: AuditorConfig,
    pub seed: u64,
}

impl RunKey {
    /// Hex SHA-256 of the key's JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("run key serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn run(&self) -> Result<PowerEstimate> {
        let sampler = MechanismSampler::new(&self.spec)?;
        self.auditor.run(&sampler, &self.pair, self.seed)
    }
}

/// One audit run with its ground truth and verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub experiment: String,
    pub config_hash: String,
    pub spec_hash: String,
    #[serde(flatten)]
    pub key: RunKey,
    pub estimate: PowerEstimate,
    /// Absent when no ground truth is available for the family at this delta.
    pub eps_star: Option<Epsilon>,
    pub verdicts: Vec<AuditVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl AuditRecord {
    /// Audits `key` and classifies the result against `claims`.
    pub fn execute(experiment: &str, key: RunKey, claims: &[f64]) -> Result<Self> {
        let start = Instant::now();
        let estimate = key.run()?;
        let elapsed = start.elapsed().as_secs_f64();
        let eps_star = ground_truth(&key)?;
        Ok(Self::assemble(
            experiment,
            key,
            estimate,
            eps_star,
            claims,
            Some(elapsed),
        ))
    }

    pub fn assemble(
        experiment: &str,
        key: RunKey,
        estimate: PowerEstimate,
        eps_star: Option<Epsilon>,
        claims: &[f64],
        wall_time_s: Option<f64>,
    ) -> Self {
        let verdicts = match eps_star {
            Some(e) => claims
                .iter()
                .map(|&c| classify(c, e, estimate.ci_low))
                .collect(),
            None => Vec::new(),
        };
        Self {
            experiment: experiment.into(),
            config_hash: key.hash(),
            spec_hash: key.spec.hash(),
            key,
            estimate,
            eps_star,
            verdicts,
            wall_time_s,
        }
    }
}

/// The true level at the auditor's delta, or `None` where none is computable.
pub fn ground_truth(key: &RunKey) -> Result<Option<Epsilon>> {
    match true_epsilon_for(&key.spec, &key.pair, key.auditor.delta_c()) {
        Ok(e) => Ok(Some(e)),
        Err(Error::Unsupported(_) | Error::OutOfRange(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Records of one experiment, in grid-then-seed order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub records: Vec<AuditRecord>,
}

pub const AUDIT_CSV_HEADER: [&str; 20] = [
    "config_hash",
    "experiment",
    "family",
    "params",
    "spec_hash",
    "tool",
    "delta_c",
    "seed",
    "xi",
    "ci_low",
    "ci_high",
    "alpha",
    "beta",
    "samples",
    "eps_star",
    "eps_star_kind",
    "eps_c",
    "verdict",
    "infeasible",
    "indeterminate",
];

impl AuditReport {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One row per (record, claim), or one row per record without claims.
    /// Wall time is left out so that reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(AUDIT_CSV_HEADER)?;
        for r in &self.records {
            let e = &r.estimate;
            let params = r
                .key
                .spec
                .params
                .iter()
                .map(|p| fmt(*p))
                .collect::<Vec<_>>()
                .join(";");
            let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
            let (star, kind) = match r.eps_star {
                Some(s) => (fmt(s.value), kind_name(s.kind).to_string()),
                None => (String::new(), String::new()),
            };
            let base = [
                r.config_hash.clone(),
                r.experiment.clone(),
                r.key.spec.family.to_string(),
                params,
                r.spec_hash.clone(),
                r.key.auditor.tool().to_string(),
                fmt(r.key.auditor.delta_c()),
                r.key.seed.to_string(),
                fmt(e.xi_star),
                fmt(e.ci_low),
                fmt(e.ci_high),
                opt(e.alpha),
                opt(e.beta),
                e.sample_count.to_string(),
                star,
                kind,
            ];
            if r.verdicts.is_empty() {
                w.write_record(
                    base.iter()
                        .cloned()
                        .chain(std::iter::repeat_n(String::new(), 4)),
                )?;
            }
            for v in &r.verdicts {
                let tail = [
                    fmt(v.eps_c),
                    v.verdict.to_string(),
                    v.infeasible.to_string(),
                    v.indeterminate.to_string(),
                ];
                w.write_record(base.iter().cloned().chain(tail))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }
}

pub(crate) fn kind_name(k: EpsilonKind) -> &'static str {
    match k {
        EpsilonKind::Exact => "exact",
        EpsilonKind::LowerBound => "lower_bound",
    }
}

/// Runs every (grid point, seed) of `config`. Grid points run in parallel when
/// the `parallel` feature is on; the report keeps grid-then-seed order.
pub fn run_audit(config: &ExperimentConfig) -> Result<AuditReport> {
    config.validate()?;
    let auditor = config.effective_auditor()?;
    let mut keys = Vec::new();
    for spec in config.points()? {
        let pair = config.pair(&spec)?;
        for &seed in &config.seeds {
            keys.push(RunKey {
                spec: spec.clone(),
                pair: pair.clone(),
                auditor: auditor.clone(),
                seed,
            });
        }
    }
    let job = |k: RunKey| AuditRecord::execute(&config.name, k, &config.claims);
    #[cfg(feature = "parallel")]
    let records: Result<Vec<_>> = {
        use rayon::prelude::*;
        keys.into_par_iter().map(job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Result<Vec<_>> = keys.into_iter().map(job).collect();
    Ok(AuditReport { records: records? })
}
