//! Writing primary outputs and their run manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Run description written next to every output file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON form of `parameters`.
    pub config_hash: String,
    pub wall_time_seconds: f64,
    pub parameters: Value,
}

/// SHA-256 hex digest of `parameters` serialized with sorted keys.
pub fn config_hash(parameters: &Value) -> String {
    let canonical = serde_json::to_string(parameters).expect("JSON values serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `contents` to `out` plus a manifest, or to stdout when `out` is `None`.
pub fn emit(out: Option<&Path>, contents: &str, command: &str, parameters: Value, started: Instant) -> Result<(), CliError> {
    match out {
        None => {
            print!("{contents}");
            Ok(())
        }
        Some(path) => {
            write_file(path, contents)?;
            write_manifest(path, command, parameters, started)
        }
    }
}

pub fn write_manifest(out: &Path, command: &str, parameters: Value, started: Instant) -> Result<(), CliError> {
    let manifest = RunManifest {
        tool: "macex".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_hash: config_hash(&parameters),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        parameters,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&manifest_path(out), &text)
}

/// Shortest round-trip form of a float (`inf` for `+∞`).
pub fn float(x: f64) -> String {
    format!("{x:?}")
}

/// Pretty JSON with a trailing newline.
pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
