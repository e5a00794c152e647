//! SI quantity strings such as `"25pF"`, `"1mH"`, `"50ns"` or `"5kOhm"`.
//!
//! A quantity is a decimal number, an optional SI prefix and an optional
//! unit symbol. Bare numbers are taken as SI base units. When a field
//! declares its unit, a mismatching symbol is rejected.

use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};

/// Physical unit of a configuration field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Farad,
    Henry,
    Volt,
    Ohm,
    Second,
    Hertz,
    Joule,
    Meter,
    Celsius,
    /// Dimensionless ratio; accepts a trailing `%`.
    Ratio,
}

impl Unit {
    fn symbols(self) -> &'static [&'static str] {
        match self {
            Unit::Farad => &["F"],
            Unit::Henry => &["H"],
            Unit::Volt => &["V"],
            Unit::Ohm => &["Ohm", "ohm", "Ω", "R"],
            Unit::Second => &["s"],
            Unit::Hertz => &["Hz"],
            Unit::Joule => &["J"],
            Unit::Meter => &["m"],
            Unit::Celsius => &["C", "°C", "degC"],
            Unit::Ratio => &[],
        }
    }
}

/// Decimal exponent of an SI prefix.
fn prefix_exponent(p: &str) -> Option<i32> {
    Some(match p {
        "" => 0,
        "f" => -15,
        "p" => -12,
        "n" => -9,
        "u" | "µ" | "μ" => -6,
        "m" => -3,
        "k" | "K" => 3,
        "M" | "meg" | "Meg" => 6,
        "G" => 9,
        _ => return None,
    })
}

/// Parses a quantity string into an SI float, checking it against `unit`.
pub fn parse_quantity(text: &str, unit: Unit) -> Result<f64> {
    let s = text.trim();
    let bad = |msg: &str| Error::config("<quantity>", format!("`{text}`: {msg}"));
    let split = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && s[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, rest) = s.split_at(split);
    let value: f64 = num.parse().map_err(|_| bad("not a number"))?;
    let rest = rest.trim();
    if unit == Unit::Ratio {
        return match rest {
            "" => Ok(value),
            "%" => Ok(value / 100.0),
            _ => Err(bad("expected a plain ratio or percentage")),
        };
    }
    let mut prefix = rest;
    for sym in unit.symbols() {
        if let Some(p) = rest.strip_suffix(sym) {
            prefix = p;
            break;
        }
    }
    let exp = prefix_exponent(prefix).ok_or_else(|| bad(&format!("unknown unit `{rest}` for {unit:?}")))?;
    if exp == 0 {
        return Ok(value);
    }
    // Re-parse with the prefix folded into the exponent so "4.49pJ" is
    // bit-identical to 4.49e-12.
    let (mantissa, e) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().map_err(|_| bad("bad exponent"))?),
        None => (num, 0),
    };
    format!("{mantissa}e{}", e + exp).parse().map_err(|_| bad("not a number"))
}

/// A number or unit-suffixed string, as accepted in config files.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RawQuantity {
    Number(f64),
    Text(String),
}

impl RawQuantity {
    pub fn resolve(&self, field: &str, unit: Unit) -> Result<f64> {
        match self {
            RawQuantity::Number(v) => Ok(*v),
            RawQuantity::Text(t) => parse_quantity(t, unit).map_err(|e| match e {
                Error::Config { msg, .. } => Error::config(field, msg),
                other => other,
            }),
        }
    }
}

/// Deserializes either form without unit checking (used for ad-hoc lists).
pub fn deserialize_loose<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    match RawQuantity::deserialize(d)? {
        RawQuantity::Number(v) => Ok(v),
        RawQuantity::Text(t) => {
            for unit in [
                Unit::Farad,
                Unit::Henry,
                Unit::Volt,
                Unit::Ohm,
                Unit::Second,
                Unit::Hertz,
                Unit::Joule,
                Unit::Meter,
                Unit::Ratio,
            ] {
                if let Ok(v) = parse_quantity(&t, unit) {
                    return Ok(v);
                }
            }
            Err(serde::de::Error::custom(format!("cannot parse quantity `{t}`")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes_and_symbols() {
        assert_eq!(parse_quantity("25pF", Unit::Farad).unwrap(), 25e-12);
        assert_eq!(parse_quantity("1mH", Unit::Henry).unwrap(), 1e-3);
        assert_eq!(parse_quantity("1.8V", Unit::Volt).unwrap(), 1.8);
        assert_eq!(parse_quantity("50ns", Unit::Second).unwrap(), 50e-9);
        assert_eq!(parse_quantity("5kOhm", Unit::Ohm).unwrap(), 5e3);
        assert_eq!(parse_quantity("5kΩ", Unit::Ohm).unwrap(), 5e3);
        assert_eq!(parse_quantity("30um", Unit::Meter).unwrap(), 30e-6);
        assert_eq!(parse_quantity("1MHz", Unit::Hertz).unwrap(), 1e6);
        assert_eq!(parse_quantity("5%", Unit::Ratio).unwrap(), 0.05);
        assert_eq!(parse_quantity("1e-12", Unit::Farad).unwrap(), 1e-12);
        assert_eq!(parse_quantity("2.5e-3 H", Unit::Henry).unwrap(), 2.5e-3);
        assert_eq!(parse_quantity("4.49pJ", Unit::Joule).unwrap(), 4.49e-12);
        assert_eq!(parse_quantity("10 k", Unit::Ohm).unwrap(), 1e4);
    }

    #[test]
    fn meter_symbol_not_mistaken_for_milli() {
        assert_eq!(parse_quantity("2m", Unit::Meter).unwrap(), 2.0);
        assert_eq!(parse_quantity("2mm", Unit::Meter).unwrap(), 2e-3);
    }

    #[test]
    fn wrong_unit_rejected() {
        assert!(parse_quantity("25pH", Unit::Farad).is_err());
        assert!(parse_quantity("abc", Unit::Volt).is_err());
        assert!(parse_quantity("3 parsecs", Unit::Meter).is_err());
    }
}
