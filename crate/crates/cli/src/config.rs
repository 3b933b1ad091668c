use std::path::Path;

use nats_core::experiments::ExperimentConfig;
use nats_core::{Error, Result};

/// Reads a TOML or JSON experiment config. The extension picks the format;
/// anything else is tried as TOML, then JSON.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "json" => from_json(&text),
        "toml" => from_toml(&text),
        _ => from_toml(&text).or_else(|_| from_json(&text)),
    }
}

fn from_toml(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML config: {e}")))
}

fn from_json(text: &str) -> Result<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))
}
