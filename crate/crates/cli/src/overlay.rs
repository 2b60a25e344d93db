//! Flat `key = value` run configuration files.
//!
//! Keys are long flag names with `-` or `_` separators. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::UsageError;

pub const KNOWN_KEYS: &[&str] = &[
    "dim",
    "heads",
    "layers",
    "out_dim",
    "mode",
    "lr",
    "epochs",
    "sigma",
    "seed",
    "include_ties",
    "step",
    "jobs",
    "commits",
    "deleted",
    "added",
    "edge_density",
    "signal",
    "structure_only",
    "tolerance",
    "fd_step",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overlay {
    values: BTreeMap<String, String>,
}

impl Overlay {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(UsageError(format!("config line {}: expected key = value", n + 1)));
            };
            let key = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(UsageError(format!("config line {}: unknown key `{}`", n + 1, k.trim())));
            }
            if values.insert(key, v.trim().to_owned()).is_some() {
                return Err(UsageError(format!(
                    "config line {}: duplicate key `{}`",
                    n + 1,
                    k.trim()
                )));
            }
        }
        Ok(Overlay { values })
    }

    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Overlay::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(Overlay::parse(&text)?)
    }

    /// Flag value if given, else the file value, else `default`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, UsageError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T: FromStr,
        T::Err: Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key}");
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|e| UsageError(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    /// A switch is on if the flag is set or the file says `true`.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, UsageError> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }
}
