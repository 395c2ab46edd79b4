//! Key-value configuration files: one `key = value` entry per line, `#`
//! starts a comment. Entries override command-line flags, so a run can be
//! pinned down completely by a checked-in config.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// A parsed configuration file: a flat string-to-string map.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {line_no}: expected `key = value`, got `{line}`");
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                bail!("line {line_no}: empty key");
            }
            if entries.insert(key.to_owned(), value.to_owned()).is_some() {
                bail!("line {line_no}: duplicate key `{key}`");
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Overrides `slot` with the parsed value of `key`, if present.
    pub fn set<T>(&self, key: &str, slot: &mut T) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(raw) = self.entries.get(key) {
            *slot = raw
                .parse()
                .map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e}"))?;
        }
        Ok(())
    }

    /// Like [`set`](Self::set) for optional flags.
    pub fn set_opt<T>(&self, key: &str, slot: &mut Option<T>) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(raw) = self.entries.get(key) {
            *slot = Some(
                raw.parse()
                    .map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e}"))?,
            );
        }
        Ok(())
    }

    /// Rejects keys outside `known`, so a typo fails loudly instead of
    /// silently leaving the flag default in place.
    pub fn ensure_known(&self, known: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !known.contains(&key.as_str()) {
                bail!(
                    "unknown config key `{key}` (expected one of: {})",
                    known.join(", ")
                );
            }
        }
        Ok(())
    }
}
