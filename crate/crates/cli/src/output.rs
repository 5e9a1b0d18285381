//! Artifact staging and atomic commits with a checksummed manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Files produced by a job, held in memory until the job has succeeded.
#[derive(Debug, Default)]
pub struct Artifacts {
    items: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.items.push((name.into(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub artifacts: Vec<ArtifactRecord>,
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, &target).map_err(|e| CliError::io(format!("{}: {e}", target.display())))
}

/// Writes every artifact to a temporary name first, renames them into place and
/// writes `manifest.json` last.
pub fn commit<C: Serialize>(dir: &Path, command: &str, config: &C, artifacts: Artifacts) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let mut staged = Vec::with_capacity(artifacts.items.len());
    for (name, bytes) in &artifacts.items {
        let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
        if let Err(e) = fs::write(&tmp, bytes) {
            for t in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(CliError::io(format!("{}: {e}", tmp.display())));
        }
        staged.push(tmp);
    }
    let mut records = Vec::with_capacity(staged.len());
    for ((name, bytes), tmp) in artifacts.items.iter().zip(&staged) {
        fs::rename(tmp, dir.join(name)).map_err(|e| CliError::io(format!("{}: {e}", dir.join(name).display())))?;
        records.push(ArtifactRecord {
            path: name.clone(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }
    let manifest = Manifest {
        tool: "gmatern",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        artifacts: records,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::io(e.to_string()))?;
    text.push('\n');
    write_atomic(dir, "manifest.json", text.as_bytes())?;
    Ok(dir.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_files_and_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::default();
        a.add("a.txt", "abc");
        commit(dir.path(), "test", &serde_json::json!({"k": 1}), a).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("a.txt")).unwrap(), "abc");
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(
            m["artifacts"][0]["sha256"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }
}
