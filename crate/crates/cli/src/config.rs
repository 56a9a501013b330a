//! Config-file loading and flag overrides.
//!
//! A config file is TOML with one table per subcommand, e.g. `[match]` or
//! `[cluster-anchors]`. Flags given on the command line replace the file's
//! values key by key; whatever is left falls back to built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Bad flags, a bad config file, or a missing required setting. Exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn load_file(path: &Path) -> anyhow::Result<toml::Table> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Merge a subcommand's file section with its flags and deserialize.
pub fn resolve<A: Serialize, C: DeserializeOwned>(
    file: Option<&toml::Table>,
    section: &str,
    flags: &A,
) -> anyhow::Result<C> {
    let mut table = match file.and_then(|f| f.get(section)) {
        None => toml::Table::new(),
        Some(toml::Value::Table(t)) => t.clone(),
        Some(_) => return Err(usage(format!("config: [{section}] must be a table"))),
    };
    let overrides = toml::Table::try_from(flags).map_err(|e| usage(format!("flags: {e}")))?;
    for (k, v) in overrides {
        table.insert(k, v);
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("config [{section}]: {}", e.message())))
}

/// Serialize the resolved config under its section name.
pub fn echo<C: Serialize>(section: &str, config: &C) -> anyhow::Result<String> {
    let mut root = toml::Table::new();
    root.insert(section.to_string(), toml::Value::try_from(config)?);
    Ok(toml::to_string(&root)?)
}

pub fn require(value: &Option<PathBuf>, flag: &str) -> anyhow::Result<PathBuf> {
    value
        .clone()
        .ok_or_else(|| usage(format!("missing {flag} (flag or config file)")))
}
