//! Flat `key = value` experiment files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, Method};
use crate::pendulum::{DynamicsForm, SpreadConvention};

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub env: EnvSpec,
    pub trials: usize,
    /// Trial `i` runs with seed `seed + i`.
    pub seed: u64,
    /// Ground-truth file, resolved against the config file's directory.
    pub ground_truth_file: Option<PathBuf>,
    pub estimator: EstimatorConfig,
}

const EXPERIMENT_KEYS: [&str; 9] = [
    "method",
    "env",
    "trials",
    "seed",
    "ground_truth_file",
    "gamma_fail",
    "dynamics_form",
    "continuous_std_convention",
    "continuous_spread",
];

/// Splits a config text into key/value pairs; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", lineno + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("key `{k}` given twice")));
        }
    }
    Ok(out)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::Config(format!("`{key}` expects a number, got `{v}`")))
}

/// Unsigned integer, also accepting integral scientific notation such as `5e4`.
fn parse_u64(key: &str, v: &str) -> Result<u64> {
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    let x = parse_f64(key, v)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(Error::Config(format!("`{key}` expects a non-negative integer, got `{v}`")))
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(key: &str, v: &str) -> Result<T> {
    serde_json::from_value(Value::String(v.to_string()))
        .map_err(|_| Error::Config(format!("`{key}` has unknown value `{v}`")))
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_text(&text)?;
        if let (Some(f), Some(dir)) = (&cfg.ground_truth_file, path.parent()) {
            if f.is_relative() {
                cfg.ground_truth_file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let get = |k: &str| pairs.get(k).map(String::as_str);
        let method: Method = get("method").ok_or_else(|| Error::Config("missing key `method`".into()))?.parse()?;
        let kind: EnvKind = get("env").ok_or_else(|| Error::Config("missing key `env`".into()))?.parse()?;

        let mut env = EnvSpec::new(kind);
        if let Some(v) = get("gamma_fail") {
            env.gamma_fail = Some(parse_f64("gamma_fail", v)?);
        }
        if let Some(v) = get("dynamics_form") {
            env.dynamics_form = parse_enum::<DynamicsForm>("dynamics_form", v)?;
        }
        if let Some(v) = get("continuous_std_convention") {
            env.continuous_std_convention = parse_enum::<SpreadConvention>("continuous_std_convention", v)?;
        }
        if let Some(v) = get("continuous_spread") {
            env.continuous_spread = parse_f64("continuous_spread", v)?;
        }

        let trials = get("trials").map(|v| parse_u64("trials", v)).transpose()?.unwrap_or(10) as usize;
        if trials == 0 {
            return Err(Error::Config("`trials` must be positive".into()));
        }
        let seed = get("seed").map(|v| parse_u64("seed", v)).transpose()?.unwrap_or(0);
        let ground_truth_file = get("ground_truth_file").map(PathBuf::from);

        let mut estimator = EstimatorConfig::for_method(method);
        estimator.gamma = env.build()?.threshold();
        estimator.seed = seed;
        let mut fields = serde_json::to_value(&estimator)?;
        let obj = fields.as_object_mut().expect("config serializes to an object");
        let mut string_keys = Vec::new();
        for (k, v) in &pairs {
            if EXPERIMENT_KEYS.contains(&k.as_str()) {
                continue;
            }
            let slot = obj.get_mut(k).ok_or_else(|| Error::Config(format!("unknown key `{k}`")))?;
            *slot = match slot {
                Value::Bool(_) => Value::Bool(parse_bool(k, v)?),
                Value::Number(n) if n.is_u64() => Value::from(parse_u64(k, v)?),
                Value::Number(_) => Value::from(parse_f64(k, v)?),
                Value::String(_) => {
                    string_keys.push(k.as_str());
                    Value::String(v.clone())
                }
                _ => return Err(Error::Config(format!("key `{k}` cannot be set from a config file"))),
            };
        }
        let estimator: EstimatorConfig = serde_json::from_value(fields).map_err(|e| {
            Error::Config(match string_keys.as_slice() {
                [] => e.to_string(),
                keys => format!("{e} (check {})", keys.iter().map(|k| format!("`{k}`")).collect::<Vec<_>>().join(", ")),
            })
        })?;
        estimator.validate()?;
        Ok(Self { method, env, trials, seed, ground_truth_file, estimator })
    }

    /// Config text that parses back to `self` (ground-truth path excepted
    /// when it was resolved against a directory).
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("method = {}", self.method.name()),
            format!("env = {}", self.env.kind.name()),
            format!("trials = {}", self.trials),
            format!("seed = {}", self.seed),
        ];
        if let Some(f) = &self.ground_truth_file {
            lines.push(format!("ground_truth_file = {}", f.display()));
        }
        if let Some(g) = self.env.gamma_fail {
            lines.push(format!("gamma_fail = {g:?}"));
        }
        lines.push(format!("dynamics_form = {}", enum_name(&self.env.dynamics_form)));
        lines.push(format!("continuous_std_convention = {}", enum_name(&self.env.continuous_std_convention)));
        lines.push(format!("continuous_spread = {:?}", self.env.continuous_spread));
        let fields = serde_json::to_value(&self.estimator).expect("config serializes");
        for (k, v) in fields.as_object().expect("object") {
            if k == "seed" {
                continue;
            }
            match v {
                Value::String(s) => lines.push(format!("{k} = {s}")),
                _ => lines.push(format!("{k} = {v}")),
            }
        }
        lines.join("\n") + "\n"
    }
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => unreachable!("unit enum variants serialize to strings"),
    }
}
