//! Flat `key = value` configuration with command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Later assignments replace earlier ones.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> CliResult<Self> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(CliError::Parse { path: origin.to_path_buf(), line: i + 1, message: "empty key".into() });
            }
            c.values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Apply a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
        self.values.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Reject keys the subcommand does not know.
    pub fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        for k in self.values.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key `{k}` (expected one of: {})", allowed.join(", "))));
            }
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| CliError::Config(format!("key `{key}`: cannot parse `{v}`: {e}"))),
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str, default: Vec<T>) -> CliResult<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|e| CliError::Config(format!("key `{key}`: cannot parse `{s}`: {e}"))))
                .collect(),
        }
    }

    pub fn get_string(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }
}
