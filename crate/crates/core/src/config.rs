//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear once.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!(
                    "config line {line_no}: expected 'key = value', got '{line}'"
                ))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::invalid(format!("config line {line_no}: empty key")));
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(Error::invalid(format!(
                    "config line {line_no}: key '{key}' already set on line {first}"
                )));
            }
            entries.insert(key, (line_no, value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `key` with `FromStr`, naming the key and line on failure.
    pub fn parse_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| {
                Error::invalid(format!(
                    "config line {line}: bad value '{v}' for '{key}': {e}"
                ))
            }),
        }
    }

    /// Fails on any key outside `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::invalid(format!(
                    "config line {line}: unknown key '{key}' (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Parses a kappa list such as `none,3,8`; `none` and `-inf` mean no
/// outliers.
pub fn parse_kappa_list(s: &str) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        let lower = item.to_ascii_lowercase();
        if lower == "none" || lower == "-inf" {
            out.push(None);
            continue;
        }
        let v: f64 = item.parse().map_err(|_| {
            Error::invalid(format!("bad kappa '{item}' (expected a number or none)"))
        })?;
        if !v.is_finite() {
            return Err(Error::invalid(format!(
                "kappa must be finite, got '{item}'"
            )));
        }
        out.push(Some(v));
    }
    if out.is_empty() {
        return Err(Error::invalid("empty kappa list"));
    }
    Ok(out)
}

/// Comma-separated list of finite floats.
pub fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|item| {
            let item = item.trim();
            match item.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::invalid(format!("bad number '{item}'"))),
            }
        })
        .collect()
}
