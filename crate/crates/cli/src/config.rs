//! Flag parsing helpers and config-file merging.
//!
//! Every subcommand's flags double as its config schema: a JSON object with
//! the same field names (or a report whose `config` field holds one) can be
//! passed with `--config`, and explicit flags override it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::output::{invalid, Classify, Outcome};

/// Parses an enum from its snake_case serde name.
pub fn snake<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown value '{s}'"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Auto {
    Auto,
}

/// A fixed threshold or `auto` (take τ* from a calibration report).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSpec {
    Fixed(f64),
    Auto(Auto),
}

impl FromStr for TauSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(TauSpec::Auto(Auto::Auto));
        }
        s.parse::<f64>().map(TauSpec::Fixed).map_err(|_| format!("expected a number or 'auto', got '{s}'"))
    }
}

/// Rater counts as `2..8` (inclusive) or `2,3,5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Counts(pub Vec<usize>);

impl FromStr for Counts {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |_| format!("expected 'a..b' or a comma list, got '{s}'");
        let v: Vec<usize> = match s.split_once("..") {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
                (a..=b).collect()
            }
            None => s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>().map_err(bad)?,
        };
        if v.is_empty() {
            return Err(format!("empty range '{s}'"));
        }
        Ok(Counts(v))
    }
}

/// Two-style group sizes written `5-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group(pub usize, pub usize);

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once('-').ok_or_else(|| format!("expected 'a-b', got '{s}'"))?;
        let p = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("expected 'a-b', got '{s}'"));
        Ok(Group(p(a)?, p(b)?))
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// Overlays the non-null fields of `cli` on the config file, if any.
pub fn merge<T: Serialize + DeserializeOwned>(cli: &T, file: Option<&Path>) -> Outcome<T> {
    let mut base = match file {
        None => Map::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
            let doc: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let doc = match doc {
                Value::Object(mut m) if m.contains_key("tool") && m.contains_key("config") => m.remove("config").unwrap_or_default(),
                other => other,
            };
            match doc {
                Value::Object(m) => m,
                _ => return Err(invalid(format!("{}: config must be a JSON object", path.display()))),
            }
        }
    };
    if let Value::Object(over) = serde_json::to_value(cli).invalid()? {
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| invalid(format!("config: {e}")))
}

pub fn required<T: Clone>(v: &Option<T>, flag: &str) -> Outcome<T> {
    v.clone().ok_or_else(|| invalid(format!("missing required --{flag}")))
}

pub fn required_path(v: &Option<PathBuf>, flag: &str) -> Outcome<PathBuf> {
    required(v, flag)
}
