//! Run manifests: everything needed to replay a run.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub subcommand: &'a str,
    pub version: &'static str,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Flags as parsed.
    pub config: &'a C,
    /// Effective settings after defaults were derived.
    pub resolved: Option<serde_json::Value>,
    pub inputs: Vec<InputDigest>,
}

pub fn digest(path: &Path) -> std::io::Result<InputDigest> {
    let bytes = std::fs::read(path)?;
    let hash = Sha256::digest(&bytes);
    let sha256 = hash.iter().map(|b| format!("{b:02x}")).collect();
    Ok(InputDigest { path: path.to_path_buf(), sha256 })
}
