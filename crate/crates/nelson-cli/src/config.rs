//! Flat key = value run configuration. Strict by design: every key must
//! be consumed by the selected mode, so a typo or a key from the wrong
//! mode fails the run by name instead of being silently ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

pub struct Config {
    map: BTreeMap<String, String>,
    touched: RefCell<HashSet<String>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {}: expected `key = value`, got `{line}`", idx + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError(format!("line {}: empty key", idx + 1)));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError(format!("duplicate key `{key}`")));
            }
        }
        Ok(Config {
            map,
            touched: RefCell::new(HashSet::new()),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.map.get(key)?;
        self.touched.borrow_mut().insert(key.to_string());
        Some(v.as_str())
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a number"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn req_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| ConfigError(format!("missing required key `{key}`")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a count"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not an integer"))),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|_| {
                        ConfigError(format!("key `{key}`: `{}` is not a number", p.trim()))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    pub fn req_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.f64_list(key)?
            .ok_or_else(|| ConfigError(format!("missing required key `{key}`")))
    }

    /// Optional pair "a, b".
    pub fn f64_pair(&self, key: &str) -> Result<Option<(f64, f64)>> {
        match self.f64_list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(v) => Err(ConfigError(format!(
                "key `{key}`: expected two comma-separated numbers, got {}",
                v.len()
            ))),
        }
    }

    /// Every key must have been read by now; the first leftover is a
    /// config error.
    pub fn finish(&self) -> Result<()> {
        let touched = self.touched.borrow();
        for key in self.map.keys() {
            if !touched.contains(key) {
                return Err(ConfigError(format!("unknown key `{key}` for this mode")));
            }
        }
        Ok(())
    }
}
