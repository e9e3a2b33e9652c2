//! Run configuration: `key=value` arguments layered over an optional TOML file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn toml_scalar(v: &toml::Value) -> Result<String, CliError> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(toml_scalar)
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        other => {
            return Err(CliError::Config(format!(
                "unsupported config value {other}"
            )))
        }
    })
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("config file: {e}")))?;
        let mut values = BTreeMap::new();
        for (k, v) in &table {
            values.insert(k.replace('-', "_"), toml_scalar(v)?);
        }
        Ok(RunConfig { values })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Applies `key=value` overrides; later ones win.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<(), CliError> {
        for a in args {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("expected key=value, got '{a}'")))?;
            let k = k.trim().replace('-', "_");
            if k.is_empty() {
                return Err(CliError::Config(format!("empty key in '{a}'")));
            }
            self.values.insert(k, v.trim().to_string());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn to_toml(&self) -> String {
        let table: toml::Table = self
            .values
            .iter()
            .map(|(k, v)| (k.clone(), toml::Value::String(v.clone())))
            .collect();
        toml::to_string(&table).expect("string table serializes")
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, command: &str, allowed: &[&str]) -> Result<(), CliError> {
        for k in self.values.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown key '{k}' for {command}; accepted: {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|e| CliError::Config(format!("{key}={s}: {e}"))),
        }
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::Config(format!("{key}={s}: {e}")))
            })
            .transpose()
    }

    pub fn list_f64(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Config(format!("{key}={s}: {e}")))
                })
                .collect(),
        }
    }

    /// Frequency given as a plain angular value or with a `Hz`/`kHz`/`MHz`/`GHz`
    /// suffix, in which case it is converted to `2π × frequency`.
    pub fn angular(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => parse_quantity(s, FREQ_UNITS)
                .map(|(v, suffixed)| if suffixed { TWO_PI * v } else { v })
                .ok_or_else(|| CliError::Config(format!("{key}={s}: not a frequency"))),
        }
    }

    /// Value with an optional frequency suffix and no `2π`.
    pub fn scaled(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => parse_quantity(s, FREQ_UNITS)
                .map(|(v, _)| v)
                .ok_or_else(|| CliError::Config(format!("{key}={s}: not a number"))),
        }
    }

    /// Time in seconds; accepts `s`, `ms`, `us`.
    pub fn seconds_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| {
                    parse_quantity(p.trim(), TIME_UNITS)
                        .map(|(v, _)| v)
                        .ok_or_else(|| CliError::Config(format!("{key}={s}: not a time")))
                })
                .collect(),
        }
    }
}

const FREQ_UNITS: &[(&str, f64)] = &[("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0)];
const TIME_UNITS: &[(&str, f64)] = &[("ms", 1e-3), ("us", 1e-6), ("s", 1.0)];

/// Number with an optional unit suffix; the flag reports whether one was given.
pub fn parse_quantity(s: &str, units: &[(&str, f64)]) -> Option<(f64, bool)> {
    let s = s.trim();
    for (suffix, factor) in units {
        if let Some(num) = s.strip_suffix(suffix) {
            return num.trim().parse::<f64>().ok().map(|v| (v * factor, true));
        }
    }
    s.parse::<f64>().ok().map(|v| (v, false))
}
