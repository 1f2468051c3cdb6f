//! Physical quantities written with explicit unit suffixes, e.g. `90um`, `-2.0V_per_m`,
//! `3 mK`, `390kHz`.
//!
//! A bare number is rejected: every accepted string has exactly one reading. Suffixes are
//! case-sensitive (`mK` is millikelvin, `MHz` megahertz).

use std::fmt;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Length,
    Field,
    Temperature,
    Frequency,
    Voltage,
    Time,
    Rate,
    Mass,
    Angle,
}

impl Dimension {
    pub const ALL: [Dimension; 9] = [
        Dimension::Length,
        Dimension::Field,
        Dimension::Temperature,
        Dimension::Frequency,
        Dimension::Voltage,
        Dimension::Time,
        Dimension::Rate,
        Dimension::Mass,
        Dimension::Angle,
    ];

    /// Accepted suffixes with their factor to SI. The first entry is the SI unit.
    pub fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9)],
            Dimension::Field => &[("V_per_m", 1.0), ("V_per_cm", 1e2), ("mV_per_m", 1e-3)],
            Dimension::Temperature => &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6)],
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::Voltage => &[("V", 1.0), ("mV", 1e-3), ("kV", 1e3)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)],
            Dimension::Rate => &[("per_s", 1.0), ("per_ms", 1e3), ("per_us", 1e6)],
            Dimension::Mass => &[("kg", 1.0), ("u", crate::consts::ATOMIC_MASS_UNIT)],
            Dimension::Angle => &[("rad", 1.0), ("deg", std::f64::consts::PI / 180.0)],
        }
    }

    pub fn si_unit(self) -> &'static str {
        self.units()[0].0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Length => "length",
            Dimension::Field => "electric field",
            Dimension::Temperature => "temperature",
            Dimension::Frequency => "frequency",
            Dimension::Voltage => "voltage",
            Dimension::Time => "time",
            Dimension::Rate => "rate",
            Dimension::Mass => "mass",
            Dimension::Angle => "angle",
        };
        f.write_str(name)
    }
}

/// Numeric part: optional sign, digits with at most one point, optional exponent.
/// Stricter than `f64::from_str`, which also takes `inf`, `nan` and friends.
fn parse_number(s: &str) -> Option<f64> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let (mut digits, mut dot) = (0, false);
    while i < b.len() {
        match b[i] {
            b'0'..=b'9' => digits += 1,
            b'.' if !dot => dot = true,
            _ => break,
        }
        i += 1;
    }
    if digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// `v * factor`, dividing by the reciprocal for decimal sub-units so that `90um` is the
/// double nearest to 9e-5.
fn scale(v: f64, factor: f64) -> f64 {
    let inv = (1.0 / factor).round();
    if factor < 1.0 && inv * factor == 1.0 {
        v / inv
    } else {
        v * factor
    }
}

/// Every `(suffix, value in SI)` reading of `s` in the given dimension.
pub fn readings(s: &str, dim: Dimension) -> Vec<(&'static str, f64)> {
    let s = s.trim();
    dim.units()
        .iter()
        .filter_map(|&(unit, factor)| {
            let number = s.strip_suffix(unit)?;
            let number = number.strip_suffix(' ').unwrap_or(number);
            parse_number(number).map(|v| (unit, scale(v, factor)))
        })
        .filter(|(_, v)| v.is_finite())
        .collect()
}

/// Parses a quantity and returns it in SI units.
pub fn parse_quantity(s: &str, dim: Dimension) -> Result<f64> {
    match readings(s, dim).as_slice() {
        [(_, v)] => Ok(*v),
        [] => {
            let units: Vec<&str> = dim.units().iter().map(|u| u.0).collect();
            if parse_number(s.trim()).is_some() {
                Err(Error::Config(format!(
                    "'{s}' has no unit; {dim} needs one of {}",
                    units.join(", ")
                )))
            } else {
                Err(Error::Config(format!("cannot read '{s}' as a {dim} (units: {})", units.join(", "))))
            }
        }
        many => Err(Error::Config(format!("'{s}' is ambiguous: {} readings", many.len()))),
    }
}

/// Formats an SI value with the SI suffix so that it parses back to the same number.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value:e}{}", dim.si_unit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn common_values() {
        assert_eq!(parse_quantity("90um", Dimension::Length).unwrap(), 90e-6);
        assert_eq!(parse_quantity("-2.0V_per_m", Dimension::Field).unwrap(), -2.0);
        assert_eq!(parse_quantity("3 mK", Dimension::Temperature).unwrap(), 3e-3);
        assert_eq!(parse_quantity("390kHz", Dimension::Frequency).unwrap(), 390e3);
        assert_eq!(parse_quantity("1e4per_s", Dimension::Rate).unwrap(), 1e4);
        assert_eq!(parse_quantity("5.81MHz", Dimension::Frequency).unwrap(), 5.81e6);
        assert_eq!(parse_quantity("220V", Dimension::Voltage).unwrap(), 220.0);
        assert_eq!(parse_quantity("729nm", Dimension::Length).unwrap(), 729e-9);
    }

    #[test]
    fn rejects_unitless_and_foreign_units() {
        assert!(parse_quantity("90", Dimension::Length).is_err());
        assert!(parse_quantity("3mK", Dimension::Length).is_err());
        assert!(parse_quantity("infK", Dimension::Temperature).is_err());
        assert!(parse_quantity("nanK", Dimension::Temperature).is_err());
        assert!(parse_quantity("1e400m", Dimension::Length).is_err());
        assert!(parse_quantity("", Dimension::Length).is_err());
        assert!(parse_quantity("um", Dimension::Length).is_err());
        assert!(parse_quantity("1.2.3um", Dimension::Length).is_err());
    }

    #[test]
    fn format_round_trips() {
        for dim in Dimension::ALL {
            for v in [0.0, -1.5, 2.5e-7, 6.6e-26] {
                assert_eq!(parse_quantity(&format_quantity(v, dim), dim).unwrap(), v);
            }
        }
    }

    proptest! {
        #[test]
        fn accepted_strings_have_one_reading(s in "[-+0-9.eE ]{0,8}(m|mm|um|nm|K|mK|uK|Hz|kHz|MHz|V|mV|kV|s|ms|us|ns|u|kg|rad|deg|V_per_m|per_s|x)?") {
            for dim in Dimension::ALL {
                let all = readings(&s, dim);
                prop_assert!(all.len() <= 1, "{s:?} in {dim}: {all:?}");
                match parse_quantity(&s, dim) {
                    Ok(v) => prop_assert!(all.len() == 1 && all[0].1 == v),
                    Err(_) => prop_assert!(all.is_empty()),
                }
            }
        }

        #[test]
        fn numbers_with_units_parse(v in -1e6f64..1e6, dim_index in 0usize..9, unit_index in 0usize..4) {
            let dim = Dimension::ALL[dim_index];
            let (unit, factor) = dim.units()[unit_index % dim.units().len()];
            let got = parse_quantity(&format!("{v}{unit}"), dim).unwrap();
            prop_assert!((got - v * factor).abs() <= 1e-15 * (v * factor).abs(), "{got} vs {}", v * factor);
        }
    }
}
