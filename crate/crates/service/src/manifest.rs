//! Run manifests: what was run, with which settings, on which bytes.
//!
//! Manifests carry no timestamps or host details, so the same command on the
//! same inputs yields a byte-identical manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Result, ServiceError};

pub const TOOL: &str = "a2t";
pub const MANIFEST_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(ServiceError::file(path))?;
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool: String,
    pub tool_version: String,
    /// Subcommand path, e.g. `campaign create`.
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    /// Effective settings: thresholds, seeds, stopword-list version, formula variants.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool: TOOL.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv,
            config: serde_json::Value::Object(Default::default()),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Record a setting. Later values under the same key replace earlier ones.
    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("settings serialize");
        if let serde_json::Value::Object(map) = &mut self.config {
            map.insert(key.to_string(), v);
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    /// Hash an output file, or every file below an output directory.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        if path.is_dir() {
            let mut files = Vec::new();
            collect_files(path, &mut files)?;
            files.sort();
            for f in files {
                self.outputs.push(FileDigest::of(&f)?);
            }
        } else {
            self.outputs.push(FileDigest::of(path)?);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifests serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(ServiceError::file(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(ServiceError::file(path))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| ServiceError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(a2t_core::Error::Version {
                expected: MANIFEST_VERSION,
                found: m.manifest_version,
            }
            .into());
        }
        Ok(m)
    }

    /// Outputs whose current content differs from the recorded hash.
    pub fn changed_outputs(&self) -> Vec<PathBuf> {
        self.outputs
            .iter()
            .filter(|d| FileDigest::of(&d.path).map(|now| now.sha256 != d.sha256).unwrap_or(true))
            .map(|d| d.path.clone())
            .collect()
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(ServiceError::file(dir))? {
        let path = entry.map_err(ServiceError::file(dir))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if !path.to_string_lossy().ends_with(".manifest.json") {
            out.push(path);
        }
    }
    Ok(())
}

/// `<artifact>.manifest.json`, next to the artifact it describes.
pub fn sidecar(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}
