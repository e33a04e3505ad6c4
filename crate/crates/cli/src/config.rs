//! Typed parameters, unit suffixes and the `key = value` config format.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Frequency,
    Rate,
    Time,
    Field,
    Length,
    Current,
    Number,
    Count,
    Text,
    Choice(&'static [&'static str]),
    Flag,
}

impl Kind {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Kind::Frequency => &[("MHz", 1e6), ("kHz", 1e3), ("mHz", 1e-3), ("Hz", 1.0)],
            Kind::Rate => &[("1/s", 1.0), ("/s", 1.0), ("s^-1", 1.0)],
            Kind::Time => &[("min", 60.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9), ("s", 1.0)],
            Kind::Field => &[("mT", 1e-3), ("uT", 1e-6), ("mG", 1e-7), ("T", 1.0), ("G", 1e-4)],
            Kind::Length => &[("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6), ("nm", 1e-9), ("m", 1.0)],
            Kind::Current => &[("mA", 1e-3), ("uA", 1e-6), ("A", 1.0)],
            _ => &[],
        }
    }

    /// Base unit shown in help text.
    pub fn unit(self) -> &'static str {
        match self {
            Kind::Frequency => "Hz",
            Kind::Rate => "1/s",
            Kind::Time => "s",
            Kind::Field => "T",
            Kind::Length => "m",
            Kind::Current => "A",
            Kind::Number => "dimensionless",
            Kind::Count => "count",
            Kind::Text => "text",
            Kind::Choice(_) => "choice",
            Kind::Flag => "flag",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: Kind,
    /// Raw default in the same syntax as the command line; `None` = optional.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn param(name: &'static str, kind: Kind, default: Option<&'static str>, help: &'static str) -> ParamSpec {
    ParamSpec { name, kind, default, help }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(untagged)]
pub enum Value {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parses `raw` for parameter `spec`, converting unit suffixes to base units.
pub fn parse_value(spec: &ParamSpec, raw: &str) -> Result<Value, ConfigError> {
    let raw = raw.trim();
    let key = spec.name;
    match spec.kind {
        Kind::Count => raw
            .replace('_', "")
            .parse::<u64>()
            .map(Value::Int)
            .or_else(|_| err(format!("{key}: expected a non-negative integer, got '{raw}'"))),
        Kind::Text => Ok(Value::Text(raw.to_string())),
        Kind::Choice(options) => {
            if options.contains(&raw) {
                Ok(Value::Text(raw.to_string()))
            } else {
                err(format!("{key}: '{raw}' is not one of {}", options.join(", ")))
            }
        }
        Kind::Flag => match raw {
            "true" | "yes" | "1" | "on" => Ok(Value::Bool(true)),
            "false" | "no" | "0" | "off" => Ok(Value::Bool(false)),
            _ => err(format!("{key}: expected true or false, got '{raw}'")),
        },
        kind => {
            if let Ok(v) = raw.parse::<f64>() {
                return finite(key, v);
            }
            for (suffix, factor) in kind.units() {
                if let Some(num) = raw.strip_suffix(suffix) {
                    if let Ok(v) = num.trim().parse::<f64>() {
                        return finite(key, v * factor);
                    }
                }
            }
            let allowed: Vec<&str> = kind.units().iter().map(|u| u.0).collect();
            if allowed.is_empty() {
                err(format!("{key}: expected a number, got '{raw}'"))
            } else {
                err(format!("{key}: bad value or unit suffix '{raw}' (allowed units: {})", allowed.join(", ")))
            }
        }
    }
}

fn finite(key: &str, v: f64) -> Result<Value, ConfigError> {
    if v.is_finite() {
        Ok(Value::Float(v))
    } else {
        err(format!("{key}: value must be finite"))
    }
}

/// Normalises `tau_c` and `tau-c` to one spelling.
pub fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub raw: String,
    pub line: usize,
}

/// Parsed config file: entries before any section, then one list per section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub global: Vec<Entry>,
    pub sections: BTreeMap<String, Vec<Entry>>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut cfg = ConfigFile::default();
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return err(format!("line {n}: unterminated section header"));
            };
            let name = name.trim().to_string();
            if cfg.sections.contains_key(&name) {
                return err(format!("line {n}: duplicate section [{name}]"));
            }
            cfg.sections.insert(name.clone(), Vec::new());
            current = Some(name);
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {n}: expected 'key = value'"));
        };
        let key = normalize_key(k);
        if key.is_empty() {
            return err(format!("line {n}: empty key"));
        }
        let list = match &current {
            Some(s) => cfg.sections.get_mut(s).unwrap(),
            None => &mut cfg.global,
        };
        if let Some(prev) = list.iter().find(|e| e.key == key) {
            return err(format!("line {n}: duplicate key '{key}' (first set on line {})", prev.line));
        }
        list.push(Entry { key, raw: v.trim().to_string(), line: n });
    }
    Ok(cfg)
}

/// Fully resolved parameters in base units.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct Params(pub BTreeMap<String, Value>);

impl Params {
    pub fn has(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn f(&self, name: &str) -> f64 {
        match self.0.get(name) {
            Some(Value::Float(v)) => *v,
            Some(Value::Int(v)) => *v as f64,
            other => panic!("parameter {name} is not numeric: {other:?}"),
        }
    }

    pub fn opt_f(&self, name: &str) -> Option<f64> {
        self.has(name).then(|| self.f(name))
    }

    pub fn u(&self, name: &str) -> usize {
        match self.0.get(name) {
            Some(Value::Int(v)) => *v as usize,
            other => panic!("parameter {name} is not a count: {other:?}"),
        }
    }

    pub fn s(&self, name: &str) -> &str {
        match self.0.get(name) {
            Some(Value::Text(v)) => v,
            other => panic!("parameter {name} is not text: {other:?}"),
        }
    }

    pub fn flag(&self, name: &str) -> bool {
        matches!(self.0.get(name), Some(Value::Bool(true)))
    }
}

/// Merges defaults, then file entries, then command-line values.
pub fn resolve(specs: &[ParamSpec], file: &[Entry], cli: &[(&'static str, String)]) -> Result<Params, ConfigError> {
    let mut out = Params::default();
    for s in specs {
        if let Some(d) = s.default {
            out.0.insert(s.name.to_string(), parse_value(s, d)?);
        }
    }
    for e in file {
        let Some(spec) = specs.iter().find(|s| normalize_key(s.name) == e.key) else {
            return err(format!("line {}: unknown key '{}'", e.line, e.key));
        };
        let v = parse_value(spec, &e.raw).map_err(|ConfigError(m)| ConfigError(format!("line {}: {m}", e.line)))?;
        out.0.insert(spec.name.to_string(), v);
    }
    for (name, raw) in cli {
        let spec = specs.iter().find(|s| s.name == *name).expect("flag without spec");
        out.0.insert(spec.name.to_string(), parse_value(spec, raw)?);
    }
    Ok(out)
}
