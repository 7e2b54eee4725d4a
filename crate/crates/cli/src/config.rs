//! Layered run configuration: built-in defaults, then the command's section
//! of the JSON config file, then environment variables and flags (clap
//! resolves those two). The merged object is what runs, and what gets
//! written to `run_config.json`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const SNAPSHOT_FILE: &str = "run_config.json";

/// Loads the whole config file; `None` yields an empty object.
pub fn load_file(path: Option<&Path>) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Invalid(format!("config {} must be a JSON object", path.display())).into()),
        Err(e) => Err(CliError::Invalid(format!("config {}: {e}", path.display())).into()),
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
}

fn object(v: Value, what: &str) -> Result<Map<String, Value>> {
    match v {
        Value::Object(m) => Ok(m),
        Value::Null => Ok(Map::new()),
        _ => Err(CliError::Invalid(format!("config section {what:?} must be an object")).into()),
    }
}

/// defaults < file section < flags. `defaults` names every setting of the
/// command (null where there is no default), so any other key in the file
/// section is rejected.
pub fn resolve<T: Serialize + DeserializeOwned>(command: &str, defaults: Value, file: &Map<String, Value>, flags: &T) -> Result<T> {
    let mut merged = object(defaults, command)?;
    let section = object(file.get(command).cloned().unwrap_or(Value::Null), command)?;
    if let Some(key) = section.keys().find(|k| !merged.contains_key(*k)) {
        return Err(CliError::Invalid(format!("unknown setting {key:?} in config section {command:?}")).into());
    }
    overlay(&mut merged, section);
    overlay(&mut merged, object(serde_json::to_value(flags)?, command)?);
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Invalid(format!("{command} settings: {e}")).into())
}

#[derive(Serialize)]
struct Snapshot<'a, T> {
    command: &'a str,
    version: &'a str,
    settings: &'a T,
}

/// Writes the resolved settings next to the outputs.
pub fn write_snapshot<T: Serialize>(out: &Path, command: &str, settings: &T) -> Result<PathBuf> {
    let path = out.join(SNAPSHOT_FILE);
    let snap = Snapshot { command, version: env!("CARGO_PKG_VERSION"), settings };
    let mut text = serde_json::to_string_pretty(&snap)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Unwraps a setting that has no default.
pub fn need<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| CliError::Invalid(format!("--{flag} is required (flag, AFW_ variable or config file)")).into())
}
