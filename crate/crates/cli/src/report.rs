//! Deterministic artifact writers: CSV reports, JSON models, the run
//! manifest with content fingerprints.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use neurocross_core::{Error, Result};

/// FNV-1a 64-bit fingerprint of a file's bytes, hex encoded. A content
/// checksum for reproducibility audits, not a cryptographic hash.
pub fn fingerprint(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}

/// Collects the files a command read and wrote, then renders the run
/// manifest.
pub struct RunRecorder {
    command: String,
    seed: u64,
    config: Vec<(String, String)>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct HashedFile {
    path: String,
    fnv64: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    seed: u64,
    config: Vec<[&'a str; 2]>,
    inputs: Vec<HashedFile>,
    outputs: Vec<HashedFile>,
}

impl RunRecorder {
    pub fn new(command: &str, seed: u64, config: Vec<(String, String)>) -> Self {
        RunRecorder {
            command: command.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `run_manifest.json` into the output directory.
    pub fn finish(mut self, out_dir: &Path) -> Result<PathBuf> {
        self.inputs.sort();
        self.inputs.dedup();
        self.outputs.sort();
        self.outputs.dedup();
        let hash_all = |paths: &[PathBuf]| -> Result<Vec<HashedFile>> {
            paths
                .iter()
                .map(|p| {
                    Ok(HashedFile {
                        path: p.display().to_string(),
                        fnv64: fingerprint(p)?,
                    })
                })
                .collect()
        };
        let manifest = RunManifest {
            command: &self.command,
            seed: self.seed,
            config: self
                .config
                .iter()
                .map(|(k, v)| [k.as_str(), v.as_str()])
                .collect(),
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
        };
        let path = out_dir.join("run_manifest.json");
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("serialization failed: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))
}

/// Writes a CSV with a header row; every value is rendered with Rust's
/// shortest round-trip float formatting, so reruns are byte-identical.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
