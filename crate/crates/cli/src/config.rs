//! JSON configuration files with unit-suffixed quantities.
//!
//! A file holds any subset of the [`CircuitConfig`] tree; missing fields keep
//! their defaults. Quantities may be bare SI numbers or strings such as
//! `"25pF"`, `"1mH"` or `"5%"`. When `tree.C_s` is given without `tree.C_d`,
//! the damping capacitor is matched to the synapse total.

use std::path::Path;

use acan_core::model::CircuitConfig;
use acan_core::units::{parse_quantity, Unit};
use acan_core::{Error, Result};
use serde_json::{Map, Value};

fn config_error(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

/// Unit of a leaf field, by key.
fn unit_for(key: &str) -> Option<Unit> {
    Some(match key {
        "L_PC" => Unit::Henry,
        "C_E" | "C_node" | "C_s" | "C_d" | "C_par" | "C_inv" | "C_sh" | "C_pl_on" | "C_pl_off" | "C_pr" => Unit::Farad,
        "V_dc" | "V_REF" | "V_TH" | "V_dd" | "min_overdrive" | "overdrive_scale" => Unit::Volt,
        "R_TG" | "R_reset" | "M_L" | "M_R" => Unit::Ohm,
        "W_n" => Unit::Meter,
        "f_nominal" => Unit::Hertz,
        "E_decision" => Unit::Joule,
        "worst_delay" | "metastability_slope" => Unit::Second,
        "temperature_C" | "reference_temperature_C" => Unit::Celsius,
        "duty" | "Q_L" | "fast" | "typical" | "slow" | "temp_coeff" => Unit::Ratio,
        _ => return None,
    })
}

/// Converts one user value, using the default value to decide its kind.
fn convert_leaf(path: &str, key: &str, default: &Value, user: &Value) -> Result<Value> {
    match (default, user) {
        (Value::Number(d), Value::Number(_)) if d.is_u64() => {
            if user.as_u64().is_some() {
                Ok(user.clone())
            } else {
                Err(config_error(path, "expected a non-negative integer"))
            }
        }
        (Value::Number(_), Value::Number(_)) => Ok(user.clone()),
        (Value::Number(d), Value::String(s)) if !d.is_u64() => {
            let unit = unit_for(key).ok_or_else(|| config_error(path, "expected a plain number"))?;
            let v = parse_quantity(s, unit).map_err(|e| match e {
                Error::Config { msg, .. } => config_error(path, msg),
                other => other,
            })?;
            serde_json::Number::from_f64(v)
                .map(Value::Number)
                .ok_or_else(|| config_error(path, "must be finite"))
        }
        (Value::Number(_), _) => Err(config_error(path, "expected a number or quantity string")),
        (Value::String(_), Value::String(_)) => Ok(user.clone()),
        (Value::String(_), _) => Err(config_error(path, "expected a string")),
        (Value::Array(d), Value::Array(items)) => {
            let proto = d.first().cloned().unwrap_or(Value::Null);
            items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let p = format!("{path}[{i}]");
                    match (&proto, item) {
                        (Value::Object(o), Value::Object(u)) => Ok(Value::Object(merge(o, u, &p)?)),
                        _ => convert_leaf(&p, key, &proto, item),
                    }
                })
                .collect::<Result<Vec<_>>>()
                .map(Value::Array)
        }
        (Value::Array(_), _) => Err(config_error(path, "expected an array")),
        (Value::Bool(_), Value::Bool(_)) => Ok(user.clone()),
        _ => Err(config_error(path, "unexpected value")),
    }
}

fn merge(defaults: &Map<String, Value>, user: &Map<String, Value>, prefix: &str) -> Result<Map<String, Value>> {
    let mut out = defaults.clone();
    for (key, value) in user {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let default = defaults
            .get(key)
            .ok_or_else(|| config_error(&path, "unknown field"))?;
        let merged = match (default, value) {
            (Value::Object(d), Value::Object(u)) => Value::Object(merge(d, u, &path)?),
            (Value::Object(_), _) => return Err(config_error(&path, "expected an object")),
            _ => convert_leaf(&path, key, default, value)?,
        };
        out.insert(key.clone(), merged);
    }
    Ok(out)
}

/// Parses a configuration document.
pub fn parse_config(text: &str) -> Result<CircuitConfig> {
    let user: Value = serde_json::from_str(text)?;
    let Value::Object(user) = user else {
        return Err(config_error("<root>", "expected a JSON object"));
    };
    let Value::Object(defaults) = serde_json::to_value(CircuitConfig::default())? else {
        unreachable!("config serializes to an object");
    };
    let mut merged = merge(&defaults, &user, "")?;
    let tree_user = user.get("tree").and_then(Value::as_object);
    if tree_user.is_some_and(|t| t.contains_key("C_s") && !t.contains_key("C_d")) {
        if let Some(Value::Object(tree)) = merged.get_mut("tree") {
            let total: f64 = tree["C_s"].as_array().map_or(0.0, |a| a.iter().filter_map(Value::as_f64).sum());
            tree.insert("C_d".into(), Value::from(total));
        }
    }
    let cfg: CircuitConfig =
        serde_json::from_value(Value::Object(merged)).map_err(|e| config_error("<config>", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<CircuitConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Canonical JSON form of a config (bare SI numbers).
pub fn config_json(cfg: &CircuitConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(cfg)?)
}
