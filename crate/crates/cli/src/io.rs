//! File helpers, content identifiers and the shared train/test split.

use std::fs;
use std::path::{Path, PathBuf};

use powermap::features::{parse_dataset_csv, DatasetManifest, DatasetRow};
use powermap::rng::RngStream;
use rand::seq::SliceRandom;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{runtime, CliResult};

/// Stream tag of the split shuffle.
const SPLIT_TAG: u64 = 0x5350_4c49;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))
}

/// Write through a temporary sibling and rename, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    let tmp = sibling(path, ".tmp");
    fs::write(&tmp, text).map_err(|e| runtime(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// `path` with `suffix` appended to the file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// `data/x.csv` -> `data/x.manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Location-independent identifier: file name plus a content digest prefix.
pub fn file_id(path: &Path, contents: &str) -> String {
    let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    format!("{name}@sha256:{}", &sha256_hex(contents.as_bytes())[..16])
}

/// A dataset CSV with its manifest, when present.
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub manifest: Option<DatasetManifest>,
    pub id: String,
}

impl Dataset {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let rows = parse_dataset_csv(&text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        let mpath = manifest_path(path);
        let manifest = if mpath.exists() {
            Some(serde_json::from_str(&read_text(&mpath)?).map_err(|e| runtime(format!("{}: {e}", mpath.display())))?)
        } else {
            None
        };
        Ok(Dataset { rows, manifest, id: file_id(path, &text) })
    }

    /// Simulation calls that produced the file; one per row without a manifest.
    pub fn total_calls(&self) -> u64 {
        self.manifest.as_ref().map_or(self.rows.len() as u64, |m| m.compute_calls)
    }

    /// Calls behind a subset of `rows` rows.
    pub fn calls_for(&self, rows: usize) -> u64 {
        if self.rows.is_empty() {
            return 0;
        }
        (self.total_calls() as f64 * rows as f64 / self.rows.len() as f64).round() as u64
    }

    pub fn select(&self, idx: &[usize]) -> Vec<DatasetRow> {
        idx.iter().map(|&i| self.rows[i].clone()).collect()
    }
}

/// Disjoint, exhaustive, seeded split. Both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> CliResult<Split> {
    if n < 2 {
        return Err(runtime(format!("need at least 2 rows to split, got {n}")));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut RngStream::with_path(seed, &[SPLIT_TAG]).generator());
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_partition() {
        let s = split_indices(2000, 0.1, 4).unwrap();
        assert_eq!(s.train.len(), 200);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..2000).collect::<Vec<_>>());
        assert_eq!(s, split_indices(2000, 0.1, 4).unwrap());
        assert_ne!(s, split_indices(2000, 0.1, 5).unwrap());
        assert_eq!(split_indices(3, 0.01, 1).unwrap().train.len(), 1);
        assert!(split_indices(1, 0.5, 1).is_err());
    }

    #[test]
    fn paths() {
        assert_eq!(manifest_path(Path::new("a/x.csv")), PathBuf::from("a/x.manifest.json"));
        assert_eq!(sibling(Path::new("a/x.csv"), ".partial"), PathBuf::from("a/x.csv.partial"));
        assert!(file_id(Path::new("/tmp/q/d.csv"), "abc").starts_with("d.csv@sha256:ba7816bf8f01cfea"));
    }
}
