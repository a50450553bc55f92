//! Quantities written as `"<number> <unit>"`, e.g. `"0.8 V"` or `"20 fF"`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

const PREFIXES: [(&str, i32); 10] = [
    ("f", -15),
    ("p", -12),
    ("n", -9),
    ("u", -6),
    ("µ", -6),
    ("m", -3),
    ("k", 3),
    ("M", 6),
    ("G", 9),
    ("", 0),
];

fn scale(value: f64, exp: i32) -> f64 {
    if exp < 0 {
        value / 10f64.powi(-exp)
    } else {
        value * 10f64.powi(exp)
    }
}

/// Parses `text` as a quantity of `base` unit and returns it in SI base units.
/// The space between number and unit is optional.
pub fn parse_quantity(text: &str, base: &str) -> Result<f64, String> {
    let text = text.trim().replace('\u{2212}', "-");
    let split = text
        .char_indices()
        .map(|(i, _)| i)
        .chain([text.len()])
        .rev()
        .find(|&i| text[..i].trim().parse::<f64>().is_ok())
        .ok_or_else(|| format!("{text:?} does not start with a number"))?;
    let (num, unit) = text.split_at(split);
    let value: f64 = num.trim().parse().expect("checked above");
    if !value.is_finite() {
        return Err(format!("{num:?} is not finite"));
    }
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(format!("{text:?} needs a unit, e.g. \"1 {base}\""));
    }
    for (p, exp) in PREFIXES {
        if unit.strip_prefix(p) == Some(base) {
            return Ok(scale(value, exp));
        }
    }
    Err(format!("unit {unit:?} is not a multiple of {base}"))
}

macro_rules! quantity {
    ($(#[$m:meta])* $name:ident, $base:literal) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub f64);

        impl $name {
            pub const UNIT: &'static str = $base;

            pub fn parse(text: &str) -> Result<Self, String> {
                parse_quantity(text, $base).map(Self)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.0, $base)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl Visitor<'_> for V {
                    type Value = $name;

                    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                        write!(f, "a string like \"1 {}\"", $base)
                    }

                    fn visit_str<E: de::Error>(self, s: &str) -> Result<$name, E> {
                        $name::parse(s).map_err(E::custom)
                    }
                }
                d.deserialize_str(V)
            }
        }
    };
}

quantity!(Voltage, "V");
quantity!(Time, "s");
quantity!(Capacitance, "F");
quantity!(Current, "A");
quantity!(Power, "W");
quantity!(Temperature, "K");
quantity!(
    /// Subthreshold swing, stored in volts per decade.
    Swing,
    "V/dec"
);
quantity!(
    /// Transconductance parameter, stored in A/V².
    Transconductance,
    "A/V^2"
);
