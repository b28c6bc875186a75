use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use underlay_core::Scenario;

use crate::commands::{Failure, EXIT_IO};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub blocks: Option<u64>,
    pub out_dir: String,
    /// SHA-256 of the effective scenario serialized as TOML.
    pub scenario_hash: String,
    pub overrides: BTreeMap<String, String>,
    /// Command line after the program name.
    pub args: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut json = serde_json::to_vec_pretty(self).map_err(io::Error::other)?;
        json.push(b'\n');
        write_atomic(&dir.join(MANIFEST_FILE), &json)
    }
}

pub fn scenario_hash(scenario: &Scenario) -> String {
    hex::encode(Sha256::digest(scenario.to_toml_string().as_bytes()))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("output");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub struct Replayed {
    pub argv: Vec<String>,
    pub scenario_hash: String,
}

/// Recorded arguments with `--out` redirected when requested.
pub fn replay_argv(path: &Path, out: Option<&Path>) -> Result<Replayed, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("{}: not a manifest: {e}", path.display())))?;
    let mut argv = strip_out(&manifest.args);
    let target = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&manifest.out_dir));
    argv.push("--out".into());
    argv.push(target.display().to_string());
    Ok(Replayed {
        argv,
        scenario_hash: manifest.scenario_hash,
    })
}

fn strip_out(args: &[String]) -> Vec<String> {
    let mut kept = Vec::with_capacity(args.len());
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        if a == "--out" {
            iter.next();
        } else if !a.starts_with("--out=") {
            kept.push(a.clone());
        }
    }
    kept
}
