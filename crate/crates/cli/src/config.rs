//! `key = value` experiment files with `[solver.<name>]` sections.
//!
//! ```text
//! # keys before any section default the subcommand flags
//! runs = 1000
//! seed = 7
//!
//! [solver.visa]
//! alpha = 4
//! p_rate = 0.005
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;
use spin_anneal::{Error, Result, SolverConfig, SolverKind};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    /// Keys outside any section, in file order.
    pub global: Vec<(String, String)>,
    pub solvers: BTreeMap<SolverKind, Vec<(String, String)>>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut out = ConfigFile::default();
    let mut section: Option<SolverKind> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let solver = name
                .trim()
                .strip_prefix("solver.")
                .ok_or_else(|| parse_err(line_no, format!("unknown section [{name}]")))?;
            section = Some(solver.parse().map_err(|_| parse_err(line_no, format!("unknown solver '{solver}'")))?);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, "expected key = value"))?;
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() {
            return Err(parse_err(line_no, "empty key"));
        }
        match section {
            Some(kind) => out.solvers.entry(kind).or_default().push((key, value)),
            None => out.global.push((key, value)),
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<ConfigFile> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn canonical_key(key: &str) -> String {
    match key.trim().replace('-', "_").as_str() {
        "steps" => "n_steps".to_string(),
        "stride" => "trajectory_stride".to_string(),
        other => other.to_string(),
    }
}

/// Sets one [`SolverConfig`] field by name. Values are read as JSON
/// literals, falling back to a plain string.
pub fn apply_setting(cfg: &mut SolverConfig, key: &str, value: &str) -> Result<()> {
    let key = canonical_key(key);
    if key == "solver" {
        return Err(Error::Validation("the solver kind cannot be overridden".into()));
    }
    let mut obj = serde_json::to_value(&*cfg)?;
    let map = obj.as_object_mut().expect("config serialises to an object");
    if !map.contains_key(&key) {
        return Err(Error::Validation(format!("unknown solver setting '{key}'")));
    }
    let parsed = serde_json::from_str::<Value>(value).unwrap_or_else(|_| Value::String(value.to_string()));
    map.insert(key.clone(), parsed);
    *cfg = serde_json::from_value(obj)
        .map_err(|e| Error::Validation(format!("bad value '{value}' for '{key}': {e}")))?;
    Ok(())
}

/// Applies `--set` overrides of the form `key=value` (every solver) or
/// `solver.key=value` (one solver).
pub fn apply_overrides(cfg: &mut SolverConfig, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (lhs, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("override '{item}' is not key=value")))?;
        let (target, key) = match lhs.split_once('.') {
            Some((s, k)) => (Some(s.parse::<SolverKind>()?), k),
            None => (None, lhs),
        };
        if target.is_none_or(|t| t == cfg.solver) {
            apply_setting(cfg, key, value)?;
        }
    }
    Ok(())
}
