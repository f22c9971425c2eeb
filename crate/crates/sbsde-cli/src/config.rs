//! Flat `key = value` run configuration with flag overrides.
//!
//! Keys are the long flag names (`L`, `dt-sim`, ...). A flag given on the
//! command line wins over the file. Every resolved value is recorded so the
//! run can be written back out as a config that reproduces it.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Config {
    file: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Config {
    /// Reads `path`; `None` gives an empty configuration.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
            file.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { file, resolved: RefCell::default() })
    }

    /// Flag value, else file value, else `None`.
    pub fn get<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(s) => Some(
                    s.parse::<T>().map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{s}'")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.borrow_mut().insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn or<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
    {
        let v = self.get(key, flag)?.unwrap_or(default);
        self.resolved.borrow_mut().insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn require<T>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Display,
    {
        self.get(key, flag)?.ok_or_else(|| CliError::Usage(format!("missing required --{key}")))
    }

    /// Boolean switch: set by the flag or by `key = true` in the file.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        self.or(key, flag.then_some(true), false)
    }

    /// Fails on file keys that no resolution asked for.
    pub fn reject_unknown(&self) -> Result<(), CliError> {
        let seen = self.resolved.borrow();
        match self.file.keys().find(|k| !seen.contains_key(*k)) {
            Some(k) => Err(CliError::Usage(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }

    /// Resolved values as a config file.
    pub fn render(&self) -> String {
        self.resolved.borrow().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
