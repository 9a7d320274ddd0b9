//! The resolved experiment description and its flat key-value form.

use std::path::Path;
use std::str::FromStr;

use orthoqkd::engine::ProtocolConfig;
use orthoqkd::noise::{AngleSchedule, Grouping};
use orthoqkd::{AttackKind, NoiseMode, Protocol};
use serde::Serialize;

use crate::CliError;

/// Every knob of a batch. Echoed verbatim in JSON output; feeding the echo
/// back through `--config` reproduces the batch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub protocol: Protocol,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub attack: AttackKind,
    pub noise: NoiseMode,
    pub grouping: Grouping,
    pub angle_schedule: AngleSchedule,
    pub adapt_to_noise: bool,
    pub checking_fraction: f64,
    pub decoy_ratio: f64,
    pub error_threshold: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let cfg = ProtocolConfig::new(Protocol::One, 100);
        Settings {
            protocol: cfg.protocol,
            n: cfg.n,
            trials: 1,
            seed: 0,
            attack: AttackKind::NoAttack,
            noise: cfg.noise,
            grouping: cfg.grouping,
            angle_schedule: cfg.angle_schedule,
            adapt_to_noise: cfg.adapt_to_noise,
            checking_fraction: cfg.checking_fraction,
            decoy_ratio: cfg.decoy_ratio,
            error_threshold: cfg.error_threshold,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Validation(format!("{key} = {value:?}: {e}")))
}

impl Settings {
    /// Sets one field from its textual form. Dashes in `key` read as
    /// underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key.replace('-', "_").as_str() {
            "protocol" => self.protocol = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "attack" => self.attack = parse(key, value)?,
            "noise" => self.noise = parse(key, value)?,
            "grouping" => self.grouping = parse(key, value)?,
            "angle_schedule" => self.angle_schedule = parse(key, value)?,
            "adapt_to_noise" => self.adapt_to_noise = parse(key, value)?,
            "checking_fraction" => self.checking_fraction = parse(key, value)?,
            "decoy_ratio" => self.decoy_ratio = parse(key, value)?,
            "error_threshold" => self.error_threshold = parse(key, value)?,
            _ => return Err(CliError::Validation(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    pub fn config(&self) -> ProtocolConfig {
        ProtocolConfig {
            protocol: self.protocol,
            n: self.n,
            noise: self.noise,
            adapt_to_noise: self.adapt_to_noise,
            grouping: self.grouping,
            angle_schedule: self.angle_schedule,
            checking_fraction: self.checking_fraction,
            decoy_ratio: self.decoy_ratio,
            error_threshold: self.error_threshold,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(CliError::Validation("trials must be at least 1".into()));
        }
        self.config()
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        self.attack
            .check(self.protocol)
            .map_err(|e| CliError::Validation(e.to_string()))
    }
}

/// Reads a flat key-value file: TOML, or JSON when the extension is `.json`.
/// Values may be strings, numbers or booleans.
pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: &dyn std::fmt::Display| CliError::Validation(format!("{}: {e}", path.display()));
    let is_json = path.extension().is_some_and(|x| x == "json");
    let mut out = Vec::new();
    if is_json {
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| bad(&e))?;
        for (k, v) in map {
            let s = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => return Err(bad(&format!("{k} has unsupported value {other}"))),
            };
            out.push((k, s));
        }
    } else {
        let table: toml::Table = text.parse().map_err(|e| bad(&e))?;
        for (k, v) in table {
            let s = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => return Err(bad(&format!("{k} has unsupported value {other}"))),
            };
            out.push((k, s));
        }
    }
    Ok(out)
}
