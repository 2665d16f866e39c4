//! Quantities written as `"<number> <unit>"`, converted to SI base units.
//!
//! A bare number (TOML integer or float, or a string without a unit) is
//! taken to be in SI base units already.

use std::fmt;

/// Physical dimension a field expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Frequency,
    /// Events per second.
    Rate,
    Velocity,
    Power,
    Angle,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::Rate => "rate",
            Dimension::Velocity => "velocity",
            Dimension::Power => "power",
            Dimension::Angle => "angle",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

fn micro(unit: &str) -> Option<&str> {
    unit.strip_prefix('u')
        .or_else(|| unit.strip_prefix('µ'))
        .or_else(|| unit.strip_prefix('μ'))
}

fn length_factor(unit: &str) -> Option<f64> {
    Some(match unit {
        "km" => 1e3,
        "m" => 1.0,
        "cm" => 1e-2,
        "mm" => 1e-3,
        "nm" => 1e-9,
        "pm" => 1e-12,
        "in" => 0.0254,
        _ => match micro(unit)? {
            "m" => 1e-6,
            _ => return None,
        },
    })
}

fn time_factor(unit: &str) -> Option<f64> {
    Some(match unit {
        "min" => 60.0,
        "s" => 1.0,
        "ms" => 1e-3,
        "ns" => 1e-9,
        "ps" => 1e-12,
        _ => match micro(unit)? {
            "s" => 1e-6,
            _ => return None,
        },
    })
}

fn frequency_factor(unit: &str) -> Option<f64> {
    Some(match unit {
        "Hz" => 1.0,
        "kHz" => 1e3,
        "MHz" => 1e6,
        "GHz" => 1e9,
        "THz" => 1e12,
        _ => return None,
    })
}

fn factor(dim: Dimension, unit: &str) -> Option<f64> {
    match dim {
        Dimension::Length => length_factor(unit),
        Dimension::Time => time_factor(unit),
        Dimension::Frequency => frequency_factor(unit),
        Dimension::Rate => match unit {
            "cps" | "/s" | "1/s" => Some(1.0),
            "kcps" => Some(1e3),
            "Mcps" => Some(1e6),
            _ => frequency_factor(unit),
        },
        Dimension::Velocity => {
            let (num, den) = unit.split_once('/')?;
            Some(length_factor(num)? / time_factor(den)?)
        }
        Dimension::Power => Some(match unit {
            "W" => 1.0,
            "mW" => 1e-3,
            "nW" => 1e-9,
            _ => match micro(unit)? {
                "W" => 1e-6,
                _ => return None,
            },
        }),
        Dimension::Angle => Some(match unit {
            "rad" => 1.0,
            "mrad" => 1e-3,
            "nrad" => 1e-9,
            "deg" => std::f64::consts::PI / 180.0,
            _ => match micro(unit)? {
                "rad" => 1e-6,
                _ => return None,
            },
        }),
        Dimension::Dimensionless => match unit {
            "%" => Some(1e-2),
            _ => None,
        },
    }
}

/// Parses `"<number>[ ]<unit>"` into SI units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit() || c == '.' || c == '+' || c == '-' || c == '_')
                && !((c == 'e' || c == 'E') && exponent_follows(&text[i + 1..]))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let num = num.trim().replace('_', "");
    let value: f64 = num
        .parse()
        .map_err(|_| format!("`{text}` does not start with a number"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    let f = factor(dim, unit).ok_or_else(|| format!("`{unit}` is not a {dim} unit"))?;
    Ok(value * f)
}

fn exponent_follows(rest: &str) -> bool {
    let rest = rest.strip_prefix(['+', '-']).unwrap_or(rest);
    rest.starts_with(|c: char| c.is_ascii_digit())
}
