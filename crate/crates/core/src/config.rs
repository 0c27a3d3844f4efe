//! Flat `key = value` run configuration files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const KEYS: &[&str] = &[
    "bracket",
    "format",
    "ho_omega",
    "k_even",
    "k_odd",
    "lambda",
    "lambda_range",
    "mesh_scale",
    "mesh_size",
    "n",
    "out",
    "pairs",
    "quantities",
    "solver",
    "states",
];

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!(
                "config line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            ))
        })?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "config line {}: unknown key '{key}'",
                lineno + 1
            )));
        }
        let value = value.trim().trim_matches('"').to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::InvalidParameter(format!(
                "config line {}: duplicate key '{key}'",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

pub fn render(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn parse_real(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{key}: '{s}' is not finite")));
    }
    Ok(v)
}

pub fn parse_reals(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| parse_real(key, p)).collect()
}

/// Integer list: `0,2,3` or an inclusive range `0..3`.
pub fn parse_indices(key: &str, s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidParameter(format!("{key}: '{s}' is not an index list"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}
