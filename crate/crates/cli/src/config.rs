//! Flat `key=value` experiment configuration.
//!
//! One entry per line; blank lines and lines starting with `#` are ignored.
//! Lists are comma separated (`deltas=0.1,0.2`). Every key must be consumed by
//! the experiment it configures, so typos are reported instead of ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config field '{field}': {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Parsed entries plus a record of which keys have been read.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(
                    format!("line {}", i + 1),
                    format!("expected key=value, got '{line}'"),
                ));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::new(format!("line {}", i + 1), "empty key"));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::new(key, "given more than once"));
            }
        }
        Ok(RawConfig {
            entries,
            used: BTreeSet::new(),
        })
    }

    /// Sets `key` unless already present.
    pub fn set_default(&mut self, key: &str, value: impl Display) {
        self.entries.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    /// Sets `key`, replacing any value from the file.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    pub fn get<T>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_value(key, &v),
        }
    }

    pub fn get_list<T>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>, ConfigError>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(default.to_vec());
        };
        let items: Vec<T> = v
            .split(',')
            .map(|s| parse_value(key, s.trim()))
            .collect::<Result<_, _>>()?;
        if items.is_empty() {
            return Err(ConfigError::new(key, "list is empty"));
        }
        Ok(items)
    }

    /// Errors on the first key that no experiment read.
    pub fn finish(&self) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(ConfigError::new(k.as_str(), "unknown key for this experiment")),
            None => Ok(()),
        }
    }
}

fn parse_value<T>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T: FromStr,
    T::Err: Display,
{
    if v.is_empty() {
        return Err(ConfigError::new(key, "empty value"));
    }
    v.parse()
        .map_err(|e: T::Err| ConfigError::new(key, format!("cannot parse '{v}': {e}")))
}

/// Checks a condition on a parsed value.
pub fn ensure(ok: bool, field: &str, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(field, message))
    }
}
