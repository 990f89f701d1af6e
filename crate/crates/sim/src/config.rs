use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use jpcomp_core::scenario::{algorithm_names, ScenarioConfig};

/// Parses and validates a flat TOML scenario. Missing keys take their
/// defaults; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let table: toml::Table = text.parse().context("malformed configuration")?;
    from_table(table)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn from_table(table: toml::Table) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
        let msg = e.message().to_string();
        if msg.contains("unknown variant") && msg.contains("centralized") {
            anyhow!("{msg} (valid algorithms: {})", algorithm_names())
        } else {
            anyhow!(msg)
        }
    })?;
    cfg.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(cfg)
}

/// Interprets a command-line value as a TOML literal when it parses as one,
/// otherwise as a bare string.
fn literal(value: &str) -> toml::Value {
    format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// The configuration text with `key` set to `value`, re-validated.
pub fn with_override(text: &str, key: &str, value: &str) -> Result<ScenarioConfig> {
    let mut table: toml::Table = text.parse().context("malformed configuration")?;
    table.insert(key.to_string(), literal(value));
    from_table(table).with_context(|| format!("{key} = {value}"))
}
