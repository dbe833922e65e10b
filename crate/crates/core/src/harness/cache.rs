use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, DEFAULT_SAMPLE_BATCH};
use crate::error::{Error, Result};
use crate::mechanisms::{sample_batch, MechanismSpec, OutputKind, SampleBatch};

const MAGIC: &str = "#dpaudit-samples v1";

/// Identifies a cached batch: `n` draws of M(input) under `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchKey {
    pub spec_hash: String,
    pub input: Vec<f64>,
    pub seed: u64,
    pub n: usize,
}

impl BatchKey {
    pub fn new(spec: &MechanismSpec, input: &[f64], seed: u64, n: usize) -> Self {
        Self {
            spec_hash: spec.hash(),
            input: input.to_vec(),
            seed,
            n,
        }
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("batch key serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    key: BatchKey,
    kind: OutputKind,
    body_sha256: String,
}

/// Whether `put` wrote a new file or found an identical one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stored {
    Written,
    Existing,
}

/// A cache entry produced by `sample`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CacheEntry {
    pub path: PathBuf,
    pub key: BatchKey,
    pub stored: Stored,
}

/// Append-only directory of sample batches, one text file per batch.
///
/// Writers take an advisory lock on `<dir>/.lock`. A file is never replaced:
/// storing a batch whose key exists but whose content differs is an integrity
/// error.
#[derive(Clone, Debug)]
pub struct SampleCache {
    dir: PathBuf,
}

impl SampleCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_of(&self, key: &BatchKey) -> PathBuf {
        self.dir.join(format!("{}.samples", key.digest()))
    }

    fn lock(&self) -> Result<File> {
        let f = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.dir.join(".lock"))?;
        f.lock()?;
        Ok(f)
    }

    pub fn put(&self, key: &BatchKey, batch: &SampleBatch) -> Result<(PathBuf, Stored)> {
        if batch.len() != key.n {
            return Err(Error::Integrity(format!(
                "batch has {} draws, key says {}",
                batch.len(),
                key.n
            )));
        }
        let text = encode(key, batch)?;
        let path = self.path_of(key);
        let _guard = self.lock()?;
        if path.exists() {
            return if fs::read_to_string(&path)? == text {
                Ok((path, Stored::Existing))
            } else {
                Err(Error::Integrity(format!(
                    "{} holds different samples for the same key",
                    path.display()
                )))
            };
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &text)?;
        fs::rename(&tmp, &path)?;
        Ok((path, Stored::Written))
    }

    /// Reads a batch back, verifying its header and checksum.
    pub fn get(&self, key: &BatchKey) -> Result<Option<SampleBatch>> {
        let path = self.path_of(key);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let corrupt = |why: &str| Error::Integrity(format!("{}: {why}", path.display()));
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(corrupt("not a sample file"));
        }
        let header: Header =
            serde_json::from_str(lines.next().ok_or_else(|| corrupt("missing header"))?)
                .map_err(|_| corrupt("bad header"))?;
        if header.key != *key {
            return Err(corrupt("header does not match key"));
        }
        let rows: Vec<String> = lines.map(str::to_string).collect();
        if rows.len() != key.n || body_digest(&rows) != header.body_sha256 {
            return Err(corrupt("checksum mismatch"));
        }
        SampleBatch::parse(header.kind, &rows).map(Some)
    }

    /// Cached draws when present, otherwise fresh ones, stored.
    pub fn fetch(
        &self,
        spec: &MechanismSpec,
        input: &[f64],
        seed: u64,
        n: usize,
    ) -> Result<SampleBatch> {
        let key = BatchKey::new(spec, input, seed, n);
        if let Some(b) = self.get(&key)? {
            return Ok(b);
        }
        let batch = sample_batch(spec, input, seed, n)?;
        self.put(&key, &batch)?;
        Ok(batch)
    }
}

fn body_digest(rows: &[String]) -> String {
    let mut h = Sha256::new();
    for r in rows {
        h.update(r.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn encode(key: &BatchKey, batch: &SampleBatch) -> Result<String> {
    let rows: Vec<String> = (0..batch.len()).map(|i| batch.render(i)).collect();
    let header = Header {
        key: key.clone(),
        kind: batch.kind(),
        body_sha256: body_digest(&rows),
    };
    let mut text = format!("{MAGIC}\n{}\n", serde_json::to_string(&header)?);
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    Ok(text)
}

/// Draws and stores `samples` outputs for both inputs of every grid point and
/// seed. Safe to repeat: identical batches are left in place.
pub fn run_sample(config: &ExperimentConfig, cache: &SampleCache) -> Result<Vec<CacheEntry>> {
    config.validate()?;
    let points = config.points()?;
    if points.is_empty() {
        return Err(Error::Config("the parameter grid is empty".into()));
    }
    let n = config.samples.unwrap_or(DEFAULT_SAMPLE_BATCH);
    let mut out = Vec::new();
    for spec in &points {
        let pair = config.pair(spec)?;
        for &seed in &config.seeds {
            for input in [&pair.q_a, &pair.q_a_prime] {
                let key = BatchKey::new(spec, input, seed, n);
                let batch = sample_batch(spec, input, seed, n)?;
                let (path, stored) = cache.put(&key, &batch)?;
                out.push(CacheEntry { path, key, stored });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_collision() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SampleCache::open(dir.path()).unwrap();
        let spec = MechanismSpec::rappor(0.3, 8, 2, 0);
        let key = BatchKey::new(&spec, &[1.0], 9, 50);
        let batch = sample_batch(&spec, &[1.0], 9, 50).unwrap();
        assert_eq!(cache.put(&key, &batch).unwrap().1, Stored::Written);
        assert_eq!(cache.put(&key, &batch).unwrap().1, Stored::Existing);
        assert_eq!(cache.get(&key).unwrap().unwrap(), batch);
        let other = sample_batch(&spec, &[1.0], 10, 50).unwrap();
        assert!(matches!(cache.put(&key, &other), Err(Error::Integrity(_))));
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SampleCache::open(dir.path()).unwrap();
        let spec = MechanismSpec::laplace(1.0);
        let key = BatchKey::new(&spec, &[1.0], 1, 5);
        let (path, _) = cache
            .put(&key, &sample_batch(&spec, &[1.0], 1, 5).unwrap())
            .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[2] = "0.0";
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        assert!(matches!(cache.get(&key), Err(Error::Integrity(_))));
    }
}
