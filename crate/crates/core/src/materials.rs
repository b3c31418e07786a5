//! Material constants and the ambient environment.
//!
//! Everything is stored in the micrometer-kilogram-second-volt system:
//! lengths in um, pressures in MPa, powers in pW, energies in pJ, forces in uN.
//! In that system a convection coefficient in W/(m^2 K) has the same numeric
//! value in pW/(um^2 K), so `h = 20` means 20 W/(m^2 K).
//!
//! Electrical conductivity is the one exception: it is stored in S/um, and the
//! electric solver scales it by [`PICO`] so that currents come out in pA and
//! Joule power in pW.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 0 degC in kelvin.
pub const CELSIUS_OFFSET: f64 = 273.15;
/// 27 degC, the ambient and reference temperature of every simulation.
pub const DEFAULT_AMBIENT_K: f64 = 300.15;
/// Free air convection, W/(m^2 K).
pub const AIR_CONVECTION: f64 = 20.0;
/// Bulk gold, 4.10e7 S/m expressed in S/um.
pub const GOLD_BULK_CONDUCTIVITY: f64 = 41.0;
/// S -> pS, used to turn S/um into pA/(V um).
pub const PICO: f64 = 1.0e12;

pub const SU8: &str = "SU-8";
pub const SIO2: &str = "SiO2";
pub const GOLD: &str = "Gold";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialProps {
    pub name: String,
    /// kg/um^3
    pub density: f64,
    /// MPa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// 1/K
    pub tce: f64,
    /// pW/(um K)
    pub thermal_conductivity: f64,
    /// pJ/(kg K)
    pub specific_heat: f64,
    /// S/um; only conductors carry one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electrical_conductivity: Option<f64>,
}

impl MaterialProps {
    /// Lame parameters (lambda, mu) in MPa.
    pub fn lame(&self) -> (f64, f64) {
        let e = self.youngs_modulus;
        let nu = self.poisson_ratio;
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }

    pub fn is_conductor(&self) -> bool {
        self.electrical_conductivity.is_some()
    }
}

/// Table values for the three materials of the microgripper stack.
pub fn builtin_material(name: &str) -> Result<MaterialProps> {
    let props = match name {
        SU8 => MaterialProps {
            name: SU8.into(),
            density: 1.2e-15,
            youngs_modulus: 4.95e3,
            poisson_ratio: 0.22,
            tce: 5.2e-5,
            thermal_conductivity: 2.0e5,
            specific_heat: 1.675e15,
            electrical_conductivity: None,
        },
        SIO2 => MaterialProps {
            name: SIO2.into(),
            density: 2.15e-15,
            youngs_modulus: 70.0e3,
            poisson_ratio: 0.17,
            tce: 0.05e-5,
            thermal_conductivity: 14.0e5,
            specific_heat: 1.0e15,
            electrical_conductivity: None,
        },
        GOLD => MaterialProps {
            name: GOLD.into(),
            density: 19.3e-15,
            youngs_modulus: 57.0e3,
            poisson_ratio: 0.35,
            tce: 1.41e-5,
            thermal_conductivity: 2970.0e5,
            specific_heat: 0.129e15,
            electrical_conductivity: Some(GOLD_BULK_CONDUCTIVITY),
        },
        other => return Err(Error::UnknownMaterial(other.to_string())),
    };
    Ok(props)
}

/// One entry per violated invariant; empty when the material is usable.
pub fn validate_material(props: &MaterialProps) -> Vec<String> {
    let mut report = Vec::new();
    let positive = [
        ("density", props.density),
        ("youngs_modulus", props.youngs_modulus),
        ("thermal_conductivity", props.thermal_conductivity),
        ("specific_heat", props.specific_heat),
    ];
    for (field, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            report.push(format!("{field} must be > 0 (got {value})"));
        }
    }
    let nu = props.poisson_ratio;
    if !(nu >= 0.0) {
        report.push(format!("poisson_ratio must be >= 0 (got {nu})"));
    } else if !(nu < 0.5) {
        report.push("poisson_ratio must be < 0.5".to_string());
    }
    if !(props.tce >= 0.0 && props.tce.is_finite()) {
        report.push(format!("tce must be >= 0 (got {})", props.tce));
    }
    if let Some(sigma) = props.electrical_conductivity {
        if !(sigma > 0.0 && sigma.is_finite()) {
            report.push(format!("electrical_conductivity must be > 0 (got {sigma})"));
        }
    }
    report
}

/// Named set of materials a design draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct MaterialLibrary {
    pub materials: BTreeMap<String, MaterialProps>,
}

impl MaterialLibrary {
    pub fn builtin() -> Self {
        let mut materials = BTreeMap::new();
        for name in [SU8, SIO2, GOLD] {
            materials.insert(name.to_string(), builtin_material(name).expect("builtin"));
        }
        MaterialLibrary { materials }
    }

    pub fn get(&self, name: &str) -> Result<&MaterialProps> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn insert(&mut self, props: MaterialProps) {
        self.materials.insert(props.name.clone(), props);
    }

    /// Replaces the electrical conductivity of `name` (S/um).
    pub fn set_conductivity(&mut self, name: &str, sigma: f64) -> Result<()> {
        let m = self
            .materials
            .get_mut(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))?;
        m.electrical_conductivity = Some(sigma);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for props in self.materials.values() {
            let violations = validate_material(props);
            if !violations.is_empty() {
                return Err(Error::InvalidMaterial {
                    name: props.name.clone(),
                    violations,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    /// K
    pub ambient_temperature: f64,
    /// pW/(um^2 K), numerically equal to W/(m^2 K)
    pub convection_coefficient: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Environment::air()
    }
}

impl Environment {
    pub fn air() -> Self {
        Environment {
            ambient_temperature: DEFAULT_AMBIENT_K,
            convection_coefficient: AIR_CONVECTION,
        }
    }

    pub fn with_convection(self, h: f64) -> Self {
        Environment {
            convection_coefficient: h,
            ..self
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        if !(self.convection_coefficient >= 0.0 && self.convection_coefficient.is_finite()) {
            report.push(format!(
                "convection_coefficient must be >= 0 (got {})",
                self.convection_coefficient
            ));
        }
        if !(self.ambient_temperature > 0.0 && self.ambient_temperature.is_finite()) {
            report.push(format!(
                "ambient_temperature must be > 0 K (got {})",
                self.ambient_temperature
            ));
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn su8_matches_table() {
        let m = builtin_material("SU-8").unwrap();
        assert_eq!(m.density, 1.2e-15);
        assert_eq!(m.youngs_modulus, 4.95e3);
        assert_eq!(m.poisson_ratio, 0.22);
        assert_eq!(m.tce, 5.2e-5);
        assert_eq!(m.thermal_conductivity, 2e5);
        assert_eq!(m.specific_heat, 1.675e15);
        assert!(m.electrical_conductivity.is_none());
    }

    #[test]
    fn gold_matches_table_and_carries_conductivity() {
        let m = builtin_material("Gold").unwrap();
        assert_eq!(m.density, 19.3e-15);
        assert_eq!(m.youngs_modulus, 57e3);
        assert_eq!(m.poisson_ratio, 0.35);
        assert_eq!(m.tce, 1.41e-5);
        assert_eq!(m.thermal_conductivity, 2970e5);
        assert_eq!(m.specific_heat, 0.129e15);
        // 4.10e7 S/m * 1e-6 m/um
        assert_eq!(m.electrical_conductivity, Some(4.10e7 * 1e-6));
    }

    #[test]
    fn unknown_material_is_named() {
        let err = builtin_material("Copper").unwrap_err();
        assert!(err.to_string().contains("Copper"));
    }

    #[test]
    fn builtin_is_pure_and_valid() {
        for name in [SU8, SIO2, GOLD] {
            let a = builtin_material(name).unwrap();
            let b = builtin_material(name).unwrap();
            assert_eq!(a, b);
            assert!(validate_material(&a).is_empty(), "{name}");
        }
    }

    #[test]
    fn poisson_boundary_is_rejected() {
        let mut m = builtin_material(SU8).unwrap();
        m.poisson_ratio = 0.5;
        assert_eq!(validate_material(&m), vec!["poisson_ratio must be < 0.5"]);
    }

    #[test]
    fn negative_density_is_named() {
        let mut m = builtin_material(SU8).unwrap();
        m.density = -1.0;
        let report = validate_material(&m);
        assert_eq!(report.len(), 1);
        assert!(report[0].contains("density"));
    }

    #[test]
    fn zero_conductivity_is_rejected() {
        let mut m = builtin_material(GOLD).unwrap();
        m.electrical_conductivity = Some(0.0);
        assert_eq!(validate_material(&m).len(), 1);
    }

    #[test]
    fn environment_defaults_to_air_at_27c() {
        let env = Environment::default();
        assert_eq!(env.ambient_temperature, 27.0 + CELSIUS_OFFSET);
        assert_eq!(env.convection_coefficient, 20.0);
        assert!(env.validate().is_empty());
        assert_eq!(env.with_convection(-1.0).validate().len(), 1);
    }
}
