//! Parsing of unit-suffixed quantity strings ("10 mT", "9 MHz", "1 ms").
//!
//! Every physical quantity in a config file carries an explicit unit; a
//! bare number is accepted only for dimensionless fields (counts, seeds,
//! fractions given the `frac` suffix are also fine).

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// hertz
    Frequency,
    /// seconds
    Time,
    /// tesla
    Field,
    /// nanometers (domain convention)
    Length,
    /// radians
    Angle,
    /// hertz per second
    SweepRate,
    /// per cubic nanometer (domain convention)
    NumberDensity,
    /// kelvin
    Temperature,
    /// cubic meters
    Volume,
    /// unitless fraction; "%" divides by 100
    Fraction,
}

impl Dimension {
    fn label(&self) -> &'static str {
        match self {
            Dimension::Frequency => "frequency",
            Dimension::Time => "time",
            Dimension::Field => "magnetic field",
            Dimension::Length => "length",
            Dimension::Angle => "angle",
            Dimension::SweepRate => "sweep rate",
            Dimension::NumberDensity => "number density",
            Dimension::Temperature => "temperature",
            Dimension::Volume => "volume",
            Dimension::Fraction => "fraction",
        }
    }

    fn factor(&self, unit: &str) -> Option<f64> {
        match self {
            Dimension::Frequency => match unit {
                "Hz" => Some(1.0),
                "kHz" => Some(1e3),
                "MHz" => Some(1e6),
                "GHz" => Some(1e9),
                _ => None,
            },
            Dimension::Time => match unit {
                "s" => Some(1.0),
                "ms" => Some(1e-3),
                "us" => Some(1e-6),
                "ns" => Some(1e-9),
                _ => None,
            },
            Dimension::Field => match unit {
                "T" => Some(1.0),
                "mT" => Some(1e-3),
                "uT" => Some(1e-6),
                _ => None,
            },
            Dimension::Length => match unit {
                "nm" => Some(1.0),
                "um" => Some(1e3),
                _ => None,
            },
            Dimension::Angle => match unit {
                "rad" => Some(1.0),
                "deg" => Some(std::f64::consts::PI / 180.0),
                _ => None,
            },
            Dimension::SweepRate => match unit {
                "Hz/s" => Some(1.0),
                "kHz/s" => Some(1e3),
                "MHz/s" => Some(1e6),
                "GHz/s" => Some(1e9),
                "MHz/ms" => Some(1e9),
                "kHz/ms" => Some(1e6),
                _ => None,
            },
            Dimension::NumberDensity => match unit {
                "nm^-3" => Some(1.0),
                "m^-3" => Some(1e-27),
                _ => None,
            },
            Dimension::Temperature => match unit {
                "K" => Some(1.0),
                _ => None,
            },
            Dimension::Volume => match unit {
                "m^3" => Some(1.0),
                "mm^3" => Some(1e-9),
                _ => None,
            },
            Dimension::Fraction => match unit {
                "%" => Some(1e-2),
                "frac" => Some(1.0),
                _ => None,
            },
        }
    }
}

/// Parse `"<number> <unit>"` into the base unit of `dim`; `field` names
/// the config key for error messages.
pub fn parse_quantity(field: &str, raw: &str, dim: Dimension) -> Result<f64, CliError> {
    let invalid = |msg: String| CliError::validation_field(field, msg);
    let mut parts = raw.split_whitespace();
    let number = parts
        .next()
        .ok_or_else(|| invalid(format!("empty {} value", dim.label())))?;
    let unit = parts
        .next()
        .ok_or_else(|| invalid(format!("missing unit on {} \"{raw}\"", dim.label())))?;
    if parts.next().is_some() {
        return Err(invalid(format!("malformed quantity \"{raw}\"")));
    }
    let value: f64 = number
        .parse()
        .map_err(|_| invalid(format!("cannot parse number in \"{raw}\"")))?;
    let factor = dim
        .factor(unit)
        .ok_or_else(|| invalid(format!("unknown {} unit \"{unit}\"", dim.label())))?;
    Ok(value * factor)
}
