//! `key = value` experiment files merged with command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Flat settings for one command. Later layers override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
    allowed: &'static [&'static str],
}

impl Settings {
    pub fn new(allowed: &'static [&'static str]) -> Self {
        Self {
            values: BTreeMap::new(),
            allowed,
        }
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// keys may use `-` or `_`.
    pub fn parse_file_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    i + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        self.parse_file_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        if !self.allowed.contains(&key.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "unknown key `{key}` (expected one of: {})",
                self.allowed.join(", ")
            )));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    pub fn set_opt(&mut self, key: &str, value: &Option<String>) -> Result<()> {
        match value {
            Some(v) => self.set(key, v),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::InvalidConfig(format!("cannot parse {key} = `{v}`")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::InvalidConfig(format!("missing required setting `{key}`")))
    }

    /// Comma-separated numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }
}

pub fn parse_list(key: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse `{s}` in {key}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[&str] = &["eta", "problem", "theta0"];

    #[test]
    fn file_then_override() {
        let mut s = Settings::new(KEYS);
        s.parse_file_text("# experiment\nproblem = quad100\n\neta = 0.5  # base step\n")
            .unwrap();
        s.set_opt("eta", &Some("2".into())).unwrap();
        assert_eq!(s.raw("problem"), Some("quad100"));
        assert_eq!(s.get::<f64>("eta").unwrap(), Some(2.0));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        let mut s = Settings::new(KEYS);
        assert!(s.parse_file_text("learning_rate = 1").is_err());
        assert!(s.parse_file_text("eta 1").is_err());
        s.set("eta", "fast").unwrap();
        assert!(s.get::<f64>("eta").is_err());
    }

    #[test]
    fn lists() {
        let mut s = Settings::new(KEYS);
        s.set("theta0", "-3, -4").unwrap();
        assert_eq!(s.list("theta0").unwrap(), Some(vec![-3.0, -4.0]));
    }
}
