//! TOML run configuration with `key.path=value` overrides.

use std::path::Path;

use mflight::orchestrator::RunConfig;
use toml::{Table, Value};

use crate::CliError;

pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let user: Table = text.parse().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut table = default_table();
    merge(&mut table, user);
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if cfg.schema_version != mflight::orchestrator::SCHEMA_VERSION {
        return Err(CliError::Version(format!(
            "{}: schema_version {} is not supported (expected {})",
            path.display(),
            cfg.schema_version,
            mflight::orchestrator::SCHEMA_VERSION
        )));
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn default_table() -> Table {
    Table::try_from(RunConfig::default()).expect("default config serializes")
}

/// Overlays `over` onto `base`; nested tables merge, everything else replaces.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses the right-hand side as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `a.b.c=value`; numeric segments index into arrays.
pub fn apply_override(root: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} is malformed")));
    }
    let bad = |msg: &str| CliError::Config(format!("override {key:?}: {msg}"));
    let (last, path) = parts.split_last().unwrap();
    let mut node = root.entry(parts[0].to_string()).or_insert_with(|| Value::Table(Table::new()));
    if path.is_empty() {
        *node = parse_value(raw.trim());
        return Ok(());
    }
    for seg in &path[1..] {
        node = match node {
            Value::Table(t) => t.entry(seg.to_string()).or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| bad("expected an array index"))?;
                a.get_mut(i).ok_or_else(|| bad("array index out of range"))?
            }
            _ => return Err(bad("path runs through a scalar")),
        };
    }
    match node {
        Value::Table(t) => {
            t.insert(last.to_string(), parse_value(raw.trim()));
        }
        Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| bad("expected an array index"))?;
            *a.get_mut(i).ok_or_else(|| bad("array index out of range"))? = parse_value(raw.trim());
        }
        _ => return Err(bad("path runs through a scalar")),
    }
    Ok(())
}

/// The full default configuration as TOML.
pub fn defaults_toml() -> String {
    let body = toml::to_string(&RunConfig::default()).expect("default config serializes");
    format!(
        "# mflight run configuration (all defaults).\n\
         # Unknown keys are rejected. Unset optional keys:\n\
         #   reference = {{ mu = .., sigma = .. }}   state scaling, defaults to the source distribution\n\
         #   metrics.threshold = ..                 fixed episodes-to-threshold level\n\n{body}"
    )
}
