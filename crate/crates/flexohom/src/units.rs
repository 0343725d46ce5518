//! Unit strings and their factors into the internal µm–GPa–V–nC system.

use serde::Deserialize;

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Dimensionless,
    Length,
    Stress,
    Permittivity,
    Flexoelectric,
    Piezoelectric,
    ElectricField,
    ElectricDisplacement,
    Angle,
}

impl Quantity {
    fn name(self) -> &'static str {
        match self {
            Quantity::Dimensionless => "dimensionless",
            Quantity::Length => "length",
            Quantity::Stress => "stress",
            Quantity::Permittivity => "permittivity",
            Quantity::Flexoelectric => "flexoelectric coefficient",
            Quantity::Piezoelectric => "piezoelectric coefficient",
            Quantity::ElectricField => "electric field",
            Quantity::ElectricDisplacement => "electric displacement",
            Quantity::Angle => "angle",
        }
    }

    fn table(self) -> &'static [(&'static str, f64)] {
        match self {
            Quantity::Dimensionless => &[("1", 1.0), ("-", 1.0), ("", 1.0)],
            Quantity::Length => &[("m", 1e6), ("mm", 1e3), ("um", 1.0), ("nm", 1e-3)],
            Quantity::Stress => &[("Pa", 1e-9), ("kPa", 1e-6), ("MPa", 1e-3), ("GPa", 1.0)],
            Quantity::Permittivity => &[
                ("F/m", 1e3),
                ("C/Vm", 1e3),
                ("nF/m", 1e-6),
                ("nC/Vm", 1e-6),
                ("nC/V/m", 1e-6),
                ("pF/m", 1e-9),
                ("pC/Vm", 1e-9),
                ("nC/Vum", 1.0),
            ],
            Quantity::Flexoelectric => &[
                ("C/m", 1e3),
                ("uC/m", 1e-3),
                ("nC/m", 1e-6),
                ("pC/m", 1e-9),
                ("nC/um", 1.0),
            ],
            Quantity::Piezoelectric => &[("C/m^2", 1e-3), ("C/m2", 1e-3), ("nC/um^2", 1.0), ("nC/um2", 1.0)],
            Quantity::ElectricField => &[("V/m", 1e-6), ("kV/m", 1e-3), ("MV/m", 1.0), ("V/um", 1.0)],
            Quantity::ElectricDisplacement => &[("C/m^2", 1e-3), ("C/m2", 1e-3), ("nC/um^2", 1.0), ("nC/um2", 1.0)],
            Quantity::Angle => &[("deg", core::f64::consts::PI / 180.0), ("rad", 1.0)],
        }
    }
}

fn normalize(unit: &str) -> String {
    unit.chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, '*' | '·' | '(' | ')'))
        .map(|c| if c == 'µ' || c == 'μ' { 'u' } else { c })
        .collect()
}

/// Factor converting a value in `unit` into internal units.
pub fn factor(unit: &str, quantity: Quantity, field: &str) -> Result<f64, ConfigError> {
    let key = normalize(unit);
    quantity
        .table()
        .iter()
        .find(|(u, _)| *u == key)
        .map(|&(_, f)| f)
        .ok_or_else(|| {
            let known: Vec<_> = quantity.table().iter().map(|(u, _)| *u).filter(|u| !u.is_empty()).collect();
            ConfigError::field(field, format!("unknown {} unit '{unit}' (expected one of {})", quantity.name(), known.join(", ")))
        })
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scalar {
    pub value: f64,
    pub unit: String,
}

impl Scalar {
    pub fn internal(&self, quantity: Quantity, field: &str) -> Result<f64, ConfigError> {
        if !self.value.is_finite() {
            return Err(ConfigError::field(field, "value must be finite"));
        }
        Ok(self.value * factor(&self.unit, quantity, field)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vector {
    pub value: Vec<f64>,
    pub unit: String,
}

impl Vector {
    pub fn internal(&self, quantity: Quantity, field: &str) -> Result<Vec<f64>, ConfigError> {
        if self.value.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::field(field, "values must be finite"));
        }
        let f = factor(&self.unit, quantity, field)?;
        Ok(self.value.iter().map(|v| v * f).collect())
    }
}

/// Internal electric field (V/µm) to V/m.
pub const EFIELD_TO_SI: f64 = 1e6;
/// Internal electric displacement (nC/µm²) to C/m².
pub const DISPLACEMENT_TO_SI: f64 = 1e3;
/// Internal strain-per-field (µm/V) to pm/V.
pub const D_TO_PM_PER_V: f64 = 1e6;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_values_convert() {
        assert_relative_eq!(factor("nC/(V*m)", Quantity::Permittivity, "k").unwrap() * 45.0, 45e-6, max_relative = 1e-15);
        assert_relative_eq!(factor("nC/m", Quantity::Flexoelectric, "mu").unwrap() * 40.0, 4e-5, max_relative = 1e-15);
        assert_relative_eq!(factor("µC/m", Quantity::Flexoelectric, "mu").unwrap() * 1.21, 1.21e-3, max_relative = 1e-15);
        assert_relative_eq!(factor("nm", Quantity::Length, "l").unwrap() * 50.0, 0.05, max_relative = 1e-15);
        assert_eq!(factor("GPa", Quantity::Stress, "E").unwrap(), 1.0);
    }

    #[test]
    fn field_round_trip() {
        let e = factor("V/m", Quantity::ElectricField, "E").unwrap();
        assert_relative_eq!(1.6031 * e * EFIELD_TO_SI, 1.6031, max_relative = 1e-15);
        let d = factor("C/m^2", Quantity::ElectricDisplacement, "D").unwrap();
        assert_relative_eq!(0.25 * d * DISPLACEMENT_TO_SI, 0.25, max_relative = 1e-15);
    }

    #[test]
    fn unknown_unit_names_field() {
        let err = factor("furlong", Quantity::Length, "cell.lengths").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cell.lengths") && msg.contains("furlong"), "{msg}");
    }
}
