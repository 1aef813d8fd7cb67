pub mod benchmark_cmd;
pub mod decompose;
pub mod embed_cmd;
pub mod learn;

use std::path::Path;

/// Print an error and pick the usage/config exit code.
pub fn fail_usage(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    crate::EXIT_USAGE
}

pub fn ensure_out_dir(path: &Path) -> Result<(), String> {
    std::fs::create_dir_all(path).map_err(|e| format!("cannot create {}: {e}", path.display()))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
