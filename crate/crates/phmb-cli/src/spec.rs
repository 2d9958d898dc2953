//! Run specification: every command-line flag has a config-file equivalent;
//! file values fill in wherever no flag was given.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use crate::effort::EffortSpec;

/// The config-file mirror of the command line. All fields optional; flags
/// take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    pub model: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
    pub pair: Option<String>,
    pub params: Option<BTreeMap<String, f64>>,
    pub params_a: Option<BTreeMap<String, f64>>,
    pub params_b: Option<BTreeMap<String, f64>>,
    /// Initial-condition table, e.g. `init = { omega = [10.0, 0.0, 0.0] }`
    /// or `init = { omega1 = 5.0 }`.
    pub init: Option<BTreeMap<String, toml::Value>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub scheme: Option<String>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub projection_tol: Option<f64>,
    pub store_every: Option<usize>,
    pub effort: Option<EffortSpec>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    /// Sample box rows `[lo, hi]`, one per coordinate.
    #[serde(rename = "box")]
    pub sample_box: Option<Vec<[f64; 2]>>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub force: Option<bool>,
    pub simulate: Option<bool>,
}

impl FileSpec {
    pub fn load(path: &PathBuf) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("cannot parse config {}: {e}", path.display()))
    }
}

/// Parse `k=v,k=v` parameter overrides.
pub fn parse_params(s: &str) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value in '{part}'"))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|e| format!("bad value in '{part}': {e}"))?;
        out.insert(k.trim().to_string(), value);
    }
    Ok(out)
}

/// Parse `key=a,b,c;key=d` initial-condition settings.
pub fn parse_init(s: &str) -> Result<BTreeMap<String, Vec<f64>>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(';').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=values in '{part}'"))?;
        let values = v
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad number '{x}': {e}"))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        out.insert(k.trim().to_string(), values);
    }
    Ok(out)
}

/// Initial-condition table from the config file: scalars or arrays of floats.
pub fn init_from_toml(
    table: &BTreeMap<String, toml::Value>,
) -> Result<BTreeMap<String, Vec<f64>>, String> {
    let mut out = BTreeMap::new();
    for (k, v) in table {
        let values = match v {
            toml::Value::Float(x) => vec![*x],
            toml::Value::Integer(x) => vec![*x as f64],
            toml::Value::Array(items) => items
                .iter()
                .map(|item| match item {
                    toml::Value::Float(x) => Ok(*x),
                    toml::Value::Integer(x) => Ok(*x as f64),
                    other => Err(format!("init.{k}: expected numbers, got {other}")),
                })
                .collect::<Result<Vec<f64>, _>>()?,
            other => return Err(format!("init.{k}: expected number or array, got {other}")),
        };
        out.insert(k.clone(), values);
    }
    Ok(out)
}

/// Parse `lo:hi,lo:hi,..` sample-box bounds.
pub fn parse_box(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| format!("expected lo:hi in '{pair}'"))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|e| format!("bad bound '{lo}': {e}"))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|e| format!("bad bound '{hi}': {e}"))?;
            Ok((lo, hi))
        })
        .collect()
}

/// Parse the port pairing `i,j,..:k,l,..`.
pub fn parse_pair(s: &str) -> Result<(Vec<usize>, Vec<usize>), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected a:b port lists in '{s}'"))?;
    let parse_list = |side: &str| -> Result<Vec<usize>, String> {
        if side.trim().is_empty() {
            return Ok(Vec::new());
        }
        side.split(',')
            .map(|x| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|e| format!("bad port index '{x}': {e}"))
            })
            .collect()
    };
    Ok((parse_list(a)?, parse_list(b)?))
}
