//! Artifact manifest: one tab-separated line per artifact with the
//! producing stage, config hash, seed, content hash and inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{MtlError, Result};

pub const MANIFEST_FILE: &str = "manifest.tsv";
const HEADER: &str = "artifact\tstage\tconfig_hash\tseed\tsha256\tinputs";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// path relative to the output directory; directories end with '/'
    pub artifact: String,
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub sha256: String,
    pub inputs: Vec<String>,
}

impl ManifestEntry {
    fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.artifact,
            self.stage,
            self.config_hash,
            self.seed,
            self.sha256,
            self.inputs.join(",")
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 6 {
            return Err(MtlError::Parse(format!("manifest line has {} fields", parts.len())));
        }
        Ok(ManifestEntry {
            artifact: parts[0].into(),
            stage: parts[1].into(),
            config_hash: parts[2].into(),
            seed: parts[3].parse().map_err(|_| MtlError::Parse(format!("manifest seed {:?}", parts[3])))?,
            sha256: parts[4].into(),
            inputs: if parts[5].is_empty() { Vec::new() } else { parts[5].split(',').map(str::to_string).collect() },
        })
    }
}

/// Manifest of one output directory, keyed by artifact.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = std::fs::read_to_string(path)?;
        let mut entries = BTreeMap::new();
        for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
            let e = ManifestEntry::parse(line)?;
            entries.insert(e.artifact.clone(), e);
        }
        Ok(Manifest { entries })
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let mut text = String::from(HEADER);
        text.push('\n');
        for e in self.entries.values() {
            text.push_str(&e.line());
            text.push('\n');
        }
        std::fs::write(root.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn record(&mut self, entry: ManifestEntry) {
        self.entries.insert(entry.artifact.clone(), entry);
    }

    pub fn get(&self, artifact: &str) -> Option<&ManifestEntry> {
        self.entries.get(artifact)
    }

    /// Fail unless every named artifact is recorded under `config_hash`.
    pub fn require(&self, artifacts: &[&str], config_hash: &str) -> Result<()> {
        for a in artifacts {
            match self.entries.get(*a) {
                None => return Err(MtlError::NoData(format!("artifact {a} is missing; run its stage first"))),
                Some(e) if e.config_hash != config_hash => {
                    return Err(MtlError::Config(format!(
                        "artifact {a} was produced under config {} but the current config is {config_hash}",
                        e.config_hash
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// The single config hash shared by the given artifacts.
    pub fn common_hash(&self, artifacts: &[&str]) -> Result<String> {
        let mut hashes: Vec<&str> = artifacts
            .iter()
            .filter_map(|a| self.entries.get(*a))
            .map(|e| e.config_hash.as_str())
            .collect();
        hashes.sort_unstable();
        hashes.dedup();
        match hashes.as_slice() {
            [] => Err(MtlError::NoData("no recorded artifacts to report on".into())),
            [h] => Ok(h.to_string()),
            many => Err(MtlError::Config(format!("mixed config hashes among inputs: {}", many.join(", ")))),
        }
    }
}

/// SHA-256 of a file, or of a directory's files (sorted by relative path,
/// each contributing its name and contents).
pub fn content_hash(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, path, &mut files)?;
        files.sort();
        for rel in files {
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0u8]);
            h.update(std::fs::read(path.join(&rel))?);
        }
    } else {
        h.update(std::fs::read(path)?);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            out.push(p.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}
