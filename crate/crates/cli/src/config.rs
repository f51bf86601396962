//! TOML config files that override command-line flags.
//!
//! The file mirrors the flag structure: top-level scalars set global flags,
//! a table named after the subcommand (nested tables for two-level commands
//! like `forecast train`) sets that subcommand's flags. Underscores in keys
//! map to hyphens in flags, so `node_budget = 100` overrides
//! `--node-budget`. Overrides are appended to the original argument vector
//! and win because the parser keeps the last occurrence of a flag.

use gduplan::{Error, Result};
use std::path::Path;

/// Return `argv` extended with the flag overrides found in `path`.
pub fn with_overrides(
    mut argv: Vec<String>,
    path: &Path,
    command_path: &[&str],
) -> Result<Vec<String>> {
    let text = crate::runio::read_to_string(path)?;
    let table: toml::Table = text.parse().map_err(|e| {
        Error::InvalidConfig(format!("{}: not valid TOML: {e}", path.display()))
    })?;

    let mut extra = Vec::new();
    collect_scalars(&table, path, &mut extra)?;

    // Descend into the table matching the active subcommand, collecting
    // scalars at every level so `[forecast]` applies to both actions.
    let mut level = &table;
    for segment in command_path {
        match level.get(*segment) {
            Some(toml::Value::Table(inner)) => {
                collect_scalars(inner, path, &mut extra)?;
                level = inner;
            }
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "{}: key {segment:?} must be a table, found {}",
                    path.display(),
                    other.type_str()
                )));
            }
            None => break,
        }
    }

    argv.extend(extra);
    Ok(argv)
}

/// Convert every scalar key in `table` to a `--flag value` pair. Tables are
/// handled by the caller's descent; any table not on the active command
/// path is simply ignored, so one config file can serve a whole pipeline.
fn collect_scalars(table: &toml::Table, path: &Path, out: &mut Vec<String>) -> Result<()> {
    for (key, value) in table {
        let rendered = match value {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            toml::Value::Table(_) => continue,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "{}: key {key:?} has unsupported type {}",
                    path.display(),
                    other.type_str()
                )));
            }
        };
        out.push(format!("--{}", key.replace('_', "-")));
        out.push(rendered);
    }
    Ok(())
}
