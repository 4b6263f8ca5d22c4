//! Run directories: unique id allocation, manifests with lifecycle status,
//! corpus fingerprinting, and summary loading for reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::metrics::EvaluationReport;
use crate::train::StrategyId;

/// Where run directories live: explicit flag, then the TRAIT_TUNER_RUNS
/// environment variable, then `./runs`.
pub fn runs_root(flag: Option<&Path>) -> PathBuf {
    if let Some(path) = flag {
        return path.to_path_buf();
    }
    if let Ok(value) = std::env::var("TRAIT_TUNER_RUNS") {
        if !value.is_empty() {
            return PathBuf::from(value);
        }
    }
    PathBuf::from("runs")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub strategy: StrategyId,
    pub status: RunStatus,
    pub seed: u64,
    pub created: String,
    pub data_dir: String,
    pub corpus_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Allocates a fresh run directory under `root`. The id is a UTC timestamp
/// plus a short hash; uniqueness is enforced by the atomicity of
/// `create_dir`, retrying with a new hash on collision.
pub fn new_run_dir(root: &Path, strategy: StrategyId) -> Result<(PathBuf, String)> {
    std::fs::create_dir_all(root)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    for attempt in 0u64.. {
        let mut hasher = Sha256::new();
        hasher.update(stamp.as_bytes());
        hasher.update(strategy.as_str().as_bytes());
        hasher.update(std::process::id().to_le_bytes());
        hasher.update(attempt.to_le_bytes());
        let digest = hasher.finalize();
        let run_id = format!("{stamp}-{}-{}", strategy.as_str(), &hex(&digest)[..6]);
        let dir = root.join(&run_id);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok((dir, run_id)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("run id collisions cannot exhaust u64 attempts")
}

/// SHA-256 over the three split files in order, truncated to 16 hex chars.
pub fn corpus_fingerprint(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for split in [Split::Train, Split::Eval, Split::Test] {
        let path = dir.join(split.file_name());
        let bytes = std::fs::read(&path).map_err(|_| Error::MissingSplit {
            split: split.name().to_string(),
            path: path.clone(),
        })?;
        hasher.update(&bytes);
    }
    Ok(hex(&hasher.finalize())[..16].to_string())
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    crate::model::write_json_pretty(&dir.join("manifest.json"), manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join("manifest.json");
    Ok(serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(path)?,
    ))?)
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub metrics: Option<EvaluationReport>,
}

/// Loads every directory under `root` that carries a run manifest, in
/// run-id order. Entries without a manifest are ignored.
pub fn load_run_summaries(root: &Path) -> Result<Vec<RunSummary>> {
    if !root.is_dir() {
        return Err(Error::Resource(format!(
            "runs root {} does not exist",
            root.display()
        )));
    }
    let mut summaries = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let dir = entry?.path();
        if !dir.is_dir() || !dir.join("manifest.json").exists() {
            continue;
        }
        let manifest = read_manifest(&dir)?;
        let metrics_path = dir.join("metrics.json");
        let metrics = if metrics_path.exists() {
            Some(serde_json::from_reader(std::io::BufReader::new(
                std::fs::File::open(metrics_path)?,
            ))?)
        } else {
            None
        };
        summaries.push(RunSummary {
            dir,
            manifest,
            metrics,
        });
    }
    summaries.sort_by(|a, b| a.manifest.run_id.cmp(&b.manifest.run_id));
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{make_synthetic_corpus, save_corpus};

    #[test]
    fn runs_root_prefers_flag_then_env_then_default() {
        std::env::remove_var("TRAIT_TUNER_RUNS");
        assert_eq!(runs_root(None), PathBuf::from("runs"));
        std::env::set_var("TRAIT_TUNER_RUNS", "/tmp/elsewhere");
        assert_eq!(runs_root(None), PathBuf::from("/tmp/elsewhere"));
        assert_eq!(
            runs_root(Some(Path::new("/tmp/explicit"))),
            PathBuf::from("/tmp/explicit")
        );
        std::env::remove_var("TRAIT_TUNER_RUNS");
    }

    #[test]
    fn run_ids_are_unique_and_directories_exist() {
        let root = tempfile::tempdir().unwrap();
        let mut ids = std::collections::HashSet::new();
        for _ in 0..5 {
            let (dir, id) = new_run_dir(root.path(), StrategyId::S3).unwrap();
            assert!(dir.is_dir());
            assert!(id.contains("-s3-"));
            assert!(ids.insert(id), "duplicate run id");
        }
    }

    #[test]
    fn fingerprint_is_stable_and_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = make_synthetic_corpus(1, (4, 2, 2));
        save_corpus(&corpus, dir.path()).unwrap();
        let a = corpus_fingerprint(dir.path()).unwrap();
        let b = corpus_fingerprint(dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        let other = make_synthetic_corpus(2, (4, 2, 2));
        save_corpus(&other, dir.path()).unwrap();
        assert_ne!(a, corpus_fingerprint(dir.path()).unwrap());
    }

    #[test]
    fn summaries_skip_unrelated_directories() {
        let root = tempfile::tempdir().unwrap();
        std::fs::create_dir(root.path().join("not-a-run")).unwrap();
        let (dir, run_id) = new_run_dir(root.path(), StrategyId::S1).unwrap();
        let manifest = RunManifest {
            run_id: run_id.clone(),
            strategy: StrategyId::S1,
            status: RunStatus::Complete,
            seed: 7,
            created: "2026-01-01T00:00:00Z".to_string(),
            data_dir: "data".to_string(),
            corpus_fingerprint: "abc".to_string(),
            error: None,
        };
        write_manifest(&dir, &manifest).unwrap();
        let summaries = load_run_summaries(root.path()).unwrap();
        assert_eq!(summaries.len(), 1);
        assert_eq!(summaries[0].manifest, manifest);
        assert!(summaries[0].metrics.is_none());
    }

    #[test]
    fn missing_root_is_a_resource_error() {
        let err = load_run_summaries(Path::new("/definitely/not/here")).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }
}
