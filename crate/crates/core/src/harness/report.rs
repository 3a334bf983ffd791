//! Persisted run results and the single writer that produces them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub experiment: String,
    pub config_hash: String,
    /// SHA-256 over the artifact names and digests, so equal outputs share a version.
    pub content_version: String,
    pub tool_version: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// Named results; `None` stands for a non-finite value.
    pub scalars: BTreeMap<String, Option<f64>>,
    /// Oracle checks; any `false` makes the CLI exit with code 3.
    pub checks: BTreeMap<String, bool>,
    pub artifacts: Vec<Artifact>,
}

impl ReportRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).copied().flatten()
    }

    pub fn passed(&self) -> bool {
        self.checks.values().all(|&ok| ok)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, &ok)| !ok).map(|(k, _)| k.as_str()).collect()
    }
}

pub(crate) fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Accumulates results and writes every artifact from one thread, in call order.
pub struct Collector {
    dir: PathBuf,
    scalars: BTreeMap<String, Option<f64>>,
    checks: BTreeMap<String, bool>,
    artifacts: Vec<Artifact>,
}

impl Collector {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Collector {
            dir: dir.to_path_buf(),
            scalars: BTreeMap::new(),
            checks: BTreeMap::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn scalar(&mut self, name: impl Into<String>, value: f64) {
        self.scalars.insert(name.into(), value.is_finite().then_some(value));
    }

    pub fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.insert(name.into(), ok);
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if self.artifacts.iter().any(|a| a.path == Path::new(name)) {
            return Err(Error::argument(format!("artifact `{name}` written twice")));
        }
        fs::write(self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: PathBuf::from(name),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, experiment: &str, config_hash: String, seed: u64, started_unix: f64) -> ReportRecord {
        let mut version = Sha256::new();
        for a in &self.artifacts {
            version.update(a.path.to_string_lossy().as_bytes());
            version.update([0]);
            version.update(a.sha256.as_bytes());
        }
        ReportRecord {
            experiment: experiment.to_string(),
            config_hash,
            content_version: hex::encode(version.finalize()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_unix,
            finished_unix: unix_now(),
            scalars: self.scalars,
            checks: self.checks,
            artifacts: self.artifacts,
        }
    }
}

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(scalars: Vec<(String, f64)>) -> ReportRecord {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Collector::new(dir.path()).unwrap();
        for (k, v) in scalars {
            c.scalar(k, v);
        }
        c.check("ok", true);
        c.write("a.csv", b"x\n1\n").unwrap();
        c.finish("schedule", "abc".into(), 7, 1.5)
    }

    #[test]
    fn duplicate_artifacts_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Collector::new(dir.path()).unwrap();
        c.write("a.csv", b"1").unwrap();
        assert!(c.write("a.csv", b"2").is_err());
    }

    #[test]
    fn content_version_follows_the_bytes() {
        let a = record(vec![]);
        let b = record(vec![("x".into(), 1.0)]);
        assert_eq!(a.content_version, b.content_version);
        assert_eq!(a.artifacts[0].bytes, 4);
        assert!(a.passed());
    }

    #[test]
    fn non_finite_scalars_become_null() {
        let r = record(vec![("inf".into(), f64::INFINITY)]);
        assert_eq!(r.scalars["inf"], None);
        assert_eq!(ReportRecord::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn fmt17_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }

    proptest! {
        #[test]
        fn json_round_trip_is_lossless(values in proptest::collection::vec(any::<f64>(), 0..8)) {
            let r = record(values.iter().enumerate().map(|(i, v)| (format!("s{i}"), *v)).collect());
            prop_assert_eq!(ReportRecord::from_json(&r.to_json().unwrap()).unwrap(), r);
        }
    }
}
