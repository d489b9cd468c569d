//! Plain-text `key = value` configuration with `#` comments and dotted section keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            let valid = !key.is_empty()
                && key.split('.').all(|part| {
                    !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                });
            if !valid {
                return Err(Error::Config(format!("line {}: bad key `{key}`", i + 1)));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    i + 1
                )));
            }
        }
        Ok(Config {
            entries,
            base: PathBuf::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Config::parse(&text)?;
        c.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    /// Parses `key` if present.
    pub fn value<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        self.get(key)
            .map(|v| {
                v.parse::<V>()
                    .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
            })
            .transpose()
    }

    pub fn value_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.value(key)?.unwrap_or(default))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.base.join(v))
    }

    /// Rejects keys outside `allowed`. A trailing `.` in an entry admits a whole section.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            let ok = allowed.iter().any(|a| {
                if a.ends_with('.') {
                    key.starts_with(a)
                } else {
                    key == a
                }
            });
            if !ok {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text: one `key = value` per line, sorted.
    pub fn to_text(&self) -> String {
        self.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Geometric grid `k_min·2^{i/per_octave}` up to `k_max`.
pub fn geometric_grid(k_min: f64, k_max: f64, per_octave: usize) -> Result<Vec<f64>> {
    if !(k_min.is_finite() && k_max.is_finite()) || per_octave == 0 || k_max < k_min || k_min <= 0.0
    {
        return Err(Error::Config(format!(
            "bad grid: min {k_min}, max {k_max}, {per_octave} points per octave"
        )));
    }
    let steps = ((k_max / k_min).log2() * per_octave as f64 + 1e-9).floor() as usize;
    Ok((0..=steps)
        .map(|i| k_min * 2f64.powf(i as f64 / per_octave as f64))
        .collect())
}
