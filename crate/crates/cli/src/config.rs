//! Flat key=value run configuration: defaults per command, optional config
//! file, `--set` overrides. The fully resolved map is echoed into every
//! output artifact so a run can be replayed from its own output.

use std::collections::BTreeMap;
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

#[derive(Clone, Debug)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(defaults: &[(&str, &str)]) -> Self {
        RunConfig {
            values: defaults
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Merge `key = value` lines from a file; `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !self.values.contains_key(key) {
            return Err(ConfigError(format!(
                "unknown config key '{key}' (known: {})",
                self.values
                    .keys()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get(key)
            .parse()
            .map_err(|_| ConfigError(format!("{key} = '{}' is not a number", self.get(key))))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.get(key)
            .parse()
            .map_err(|_| ConfigError(format!("{key} = '{}' is not an integer", self.get(key))))
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.get(key)
            .parse()
            .map_err(|_| ConfigError(format!("{key} = '{}' is not an integer", self.get(key))))
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("{key}: '{s}' is not a number")))
            })
            .collect()
    }

    /// Decimal string as an exact reduced fraction, e.g. "0.85" -> (17, 20).
    pub fn decimal_ratio(&self, key: &str) -> Result<(u64, u64), ConfigError> {
        let text = self.get(key).trim();
        let bad = || ConfigError(format!("{key} = '{text}' is not a decimal in [0, 1]"));
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > 15
        {
            return Err(bad());
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let mut den: u64 = 1;
        for _ in 0..frac_part.len() {
            den *= 10;
        }
        let frac_val: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        let num = int_val
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        let g = gcd(num.max(1), den);
        Ok((num / g, den / g))
    }

    /// Resolved key/value view for echoing into artifacts.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.values
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_parsing() {
        let mut c = RunConfig::new(&[("gamma", "0.85")]);
        assert_eq!(c.decimal_ratio("gamma").unwrap(), (17, 20));
        c.set("gamma", "0.75").unwrap();
        assert_eq!(c.decimal_ratio("gamma").unwrap(), (3, 4));
        c.set("gamma", "1").unwrap();
        assert_eq!(c.decimal_ratio("gamma").unwrap(), (1, 1));
        c.set("gamma", "x").unwrap();
        assert!(c.decimal_ratio("gamma").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut c = RunConfig::new(&[("samples", "10")]);
        assert!(c.set("sample", "10").is_err());
        assert!(c.set("samples", "20").is_ok());
        assert_eq!(c.usize("samples").unwrap(), 20);
    }
}
