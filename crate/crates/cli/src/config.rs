//! Config files overlay parsed flags.
//!
//! A config file is TOML. Top-level `seed` and `threads` apply to every
//! command; a `[<command>]` table sets that command's options using the flag
//! names with underscores (`noise_p = 0.3`). Values in the file win over
//! flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        Ok(Self { table })
    }

    pub fn empty() -> Self {
        Self { table: toml::Table::new() }
    }

    pub fn threads(&self) -> Option<usize> {
        self.table.get("threads").and_then(toml::Value::as_integer).map(|t| t as usize)
    }

    /// Overlay the file onto `args` for `command`.
    pub fn apply<T: Serialize + DeserializeOwned>(&self, command: &str, args: T) -> Result<T, CliError> {
        let mut merged = toml::Table::try_from(&args).map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(seed) = self.table.get("seed") {
            if merged.contains_key("seed") {
                merged.insert("seed".into(), seed.clone());
            }
        }
        if let Some(section) = self.table.get(command) {
            let section = section
                .as_table()
                .ok_or_else(|| CliError::Usage(format!("config entry [{command}] must be a table")))?;
            for (k, v) in section {
                merged.insert(k.clone(), v.clone());
            }
        }
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e| CliError::Usage(format!("invalid [{command}] config: {e}")))
    }
}

/// The resolved options as `# `-prefixed TOML lines.
pub fn provenance<T: Serialize>(command: &str, args: &T) -> Vec<(String, String)> {
    let mut out = vec![("command".to_string(), command.to_string())];
    if let Ok(toml::Value::Table(t)) = toml::Value::try_from(args) {
        for (k, v) in t {
            out.push((k, v.to_string()));
        }
    }
    out
}
