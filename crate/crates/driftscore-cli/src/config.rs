//! Flat key=value configuration files.
//!
//! A config file supplies defaults for flags the command line leaves unset;
//! an explicit flag always wins. Keys a command does not use are ignored,
//! so one file can configure several subcommands.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        FileConfig {
            map: BTreeMap::new(),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped, the last occurrence of a repeated key wins.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((before, _)) => before,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected key=value, got {raw:?}",
                    path.display(),
                    lineno + 1
                );
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }
}

/// Flag value if present, else the config entry, else the default.
pub fn resolve<T>(flag: Option<T>, cfg: &FileConfig, key: &str, default: T) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|e| anyhow::anyhow!("config key {key}={raw:?}: {e}")),
        None => Ok(default),
    }
}

/// Like [`resolve`], but the value must come from somewhere.
pub fn resolve_required<T>(flag: Option<T>, cfg: &FileConfig, key: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|e| anyhow::anyhow!("config key {key}={raw:?}: {e}")),
        None => bail!("missing required parameter: pass --{} or set {key} in the config", key.replace('_', "-")),
    }
}
