//! Unit-tagged quantities in configuration files.
//!
//! A configuration value is either a bare number, taken to be in SI units
//! (linear for ratios), or a string `"<value> <unit>"`. Every field declares
//! the physical dimension it accepts; a unit from another dimension is an
//! error.

use serde::{Deserialize, Serialize};

/// Standard gravity, used to turn a mass in kg into a weight force.
pub const STANDARD_GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Unitless ratio, accepts `dB`.
    Ratio,
    /// Power in watts, accepts `dBm`, `dBW`, `mW`, `kW`.
    Power,
    Length,
    Time,
    Frequency,
    Angle,
    Speed,
    /// Weight force in newtons, accepts a mass in `kg`.
    Force,
    Temperature,
    Energy,
    Area,
    /// A plain number; no unit strings accepted.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Number(v)
    }
}

// `black_box` keeps the compiler from constant-folding `powf` with a
// different rounding than the runtime libm, which would make a literal
// default and the same value parsed from a file differ in the last bit.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(std::hint::black_box(db / 10.0))
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(std::hint::black_box((dbm - 30.0) / 10.0))
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn split_value_unit(s: &str) -> Option<(f64, &str)> {
    let s = s.trim();
    // Longest numeric prefix; exponents like `1e-3` make a simple scan unsafe.
    let mut best = None;
    for (idx, _) in s.char_indices().chain(std::iter::once((s.len(), ' '))) {
        if idx == 0 {
            continue;
        }
        if let Ok(v) = s[..idx].trim().parse::<f64>() {
            best = Some((v, s[idx..].trim()));
        }
    }
    best
}

impl Quantity {
    /// Converts to SI in the requested dimension.
    pub fn to_si(&self, dim: Dim) -> Result<f64, String> {
        match self {
            Quantity::Number(v) => Ok(*v),
            Quantity::Text(s) => {
                let (v, unit) =
                    split_value_unit(s).ok_or_else(|| format!("cannot parse quantity `{s}`"))?;
                convert(v, unit, dim).ok_or_else(|| format!("unit `{unit}` is not valid for a {dim:?} field"))
            }
        }
    }
}

fn convert(v: f64, unit: &str, dim: Dim) -> Option<f64> {
    use Dim::*;
    let out = match (dim, unit) {
        (_, "") => v,
        (Ratio, "dB") => db_to_linear(v),
        (Ratio, "lin" | "linear") => v,
        (Power, "W") => v,
        (Power, "mW") => v / 1e3,
        (Power, "kW") => v * 1e3,
        (Power, "dBm") => dbm_to_watts(v),
        (Power, "dBW") => db_to_linear(v),
        (Length, "m") => v,
        (Length, "km") => v * 1e3,
        (Time, "s") => v,
        (Time, "ms") => v / 1e3,
        (Time, "us" | "μs" | "µs") => v / 1e6,
        (Time, "ns") => v / 1e9,
        (Time, "min") => v * 60.0,
        (Frequency, "Hz") => v,
        (Frequency, "kHz") => v * 1e3,
        (Frequency, "MHz") => v * 1e6,
        (Frequency, "GHz") => v * 1e9,
        (Angle, "rad") => v,
        (Angle, "deg" | "°") => v.to_radians(),
        (Speed, "m/s") => v,
        (Speed, "km/h") => v / 3.6,
        (Force, "N") => v,
        (Force, "kg") => v * STANDARD_GRAVITY,
        (Temperature, "K") => v,
        (Energy, "J") => v,
        (Energy, "kJ") => v * 1e3,
        (Energy, "MJ") => v * 1e6,
        (Energy, "Wh") => v * 3600.0,
        (Energy, "kWh") => v * 3.6e6,
        (Area, "m2" | "m^2" | "m²") => v,
        _ => return None,
    };
    Some(out)
}
