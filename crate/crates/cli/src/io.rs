//! Input files: `key=value` parameter and SOA files, `soc,ocv_volts` OCV
//! tables and `t_s,current_a` current profiles.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use soplab_core::ecm::Profile;
use soplab_core::{BatteryParams, OcvCurve, Soa};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{what}, line {line}: {msg}")]
    Syntax { what: String, line: usize, msg: String },
    #[error("{what}: {msg}")]
    Invalid { what: String, msg: String },
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Read {
        path: path.display().to_string(),
        source,
    })
}

fn number(what: &str, line: usize, text: &str) -> Result<f64, InputError> {
    let text = text.trim();
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| InputError::Syntax {
            what: what.into(),
            line,
            msg: format!("'{text}' is not a finite decimal number"),
        })
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
/// Every key in `keys` is required and no other key is accepted.
fn key_values(what: &str, text: &str, keys: &[&str]) -> Result<HashMap<String, f64>, InputError> {
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |msg: String| InputError::Syntax {
            what: what.into(),
            line: i + 1,
            msg,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected key=value, got '{line}'")))?;
        let k = k.trim();
        if !keys.contains(&k) {
            return Err(syntax(format!("unknown key '{k}'")));
        }
        if out.insert(k.to_string(), number(what, i + 1, v)?).is_some() {
            return Err(syntax(format!("duplicate key '{k}'")));
        }
    }
    if let Some(missing) = keys.iter().find(|k| !out.contains_key(**k)) {
        return Err(InputError::Invalid {
            what: what.into(),
            msg: format!("missing key '{missing}'"),
        });
    }
    Ok(out)
}

fn invalid(what: &str, e: impl std::fmt::Display) -> InputError {
    InputError::Invalid {
        what: what.into(),
        msg: e.to_string(),
    }
}

pub const PARAM_KEYS: [&str; 5] = ["r0_ohm", "r1_ohm", "tau_s", "capacity_ah", "coulombic_eff"];
pub const SOA_KEYS: [&str; 6] = ["vt_min", "vt_max", "i_max_dis", "i_max_chg", "soc_min", "soc_max"];

pub fn parse_params(what: &str, text: &str) -> Result<BatteryParams, InputError> {
    let kv = key_values(what, text, &PARAM_KEYS)?;
    BatteryParams::new(
        kv["r0_ohm"],
        kv["r1_ohm"],
        kv["tau_s"],
        kv["capacity_ah"],
        kv["coulombic_eff"],
    )
    .map_err(|e| invalid(what, e))
}

pub fn parse_soa(what: &str, text: &str) -> Result<Soa, InputError> {
    let kv = key_values(what, text, &SOA_KEYS)?;
    Soa::new(
        kv["vt_min"],
        kv["vt_max"],
        kv["i_max_dis"],
        kv["i_max_chg"],
        kv["soc_min"],
        kv["soc_max"],
    )
    .map_err(|e| invalid(what, e))
}

/// Two-column CSV with a required header whose names must match `header`.
fn two_columns(what: &str, text: &str, header: [&str; 2]) -> Result<Vec<(f64, f64)>, InputError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = rdr.headers().map_err(|e| invalid(what, e))?.clone();
    if found.len() != 2 || found[0] != *header[0] || found[1] != *header[1] {
        return Err(InputError::Syntax {
            what: what.into(),
            line: 1,
            msg: format!("expected header '{},{}'", header[0], header[1]),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| invalid(what, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(InputError::Syntax {
                what: what.into(),
                line,
                msg: format!("expected 2 columns, got {}", record.len()),
            });
        }
        rows.push((number(what, line, &record[0])?, number(what, line, &record[1])?));
    }
    Ok(rows)
}

pub fn parse_ocv(what: &str, text: &str) -> Result<OcvCurve, InputError> {
    let rows = two_columns(what, text, ["soc", "ocv_volts"])?;
    OcvCurve::new(rows).map_err(|e| invalid(what, e))
}

pub fn parse_profile(what: &str, text: &str) -> Result<Profile, InputError> {
    let rows = two_columns(what, text, ["t_s", "current_a"])?;
    Profile::new(rows).map_err(|e| invalid(what, e))
}

pub fn load_params(path: &Path) -> Result<BatteryParams, InputError> {
    parse_params(&path.display().to_string(), &read(path)?)
}

pub fn load_soa(path: &Path) -> Result<Soa, InputError> {
    parse_soa(&path.display().to_string(), &read(path)?)
}

pub fn load_ocv(path: &Path) -> Result<OcvCurve, InputError> {
    parse_ocv(&path.display().to_string(), &read(path)?)
}

pub fn load_profile(path: &Path) -> Result<Profile, InputError> {
    parse_profile(&path.display().to_string(), &read(path)?)
}

/// Comma-separated numbers; an empty string is an empty list.
pub fn parse_list<T: std::str::FromStr>(what: &str, text: &str) -> Result<Vec<T>, InputError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|e| InputError::Invalid {
                what: what.into(),
                msg: format!("'{s}': {e}"),
            })
        })
        .collect()
}
