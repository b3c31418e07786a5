//! Study configuration files (TOML).
//!
//! Minimal file:
//!
//! ```toml
//! study = "simulate"
//! design = "model1"
//! voltage = 0.25
//! ```
//!
//! Everything else has a default. [`StudyConfig::to_toml`] writes the fully
//! resolved form, which parses back to the same value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::design::{build_design, DesignOverrides, GripperDesign, MetalPlacement, OVERRIDE_KEYS};
use crate::error::{Error, Result};
use crate::fem::SolveOptions;
use crate::materials::{Environment, MaterialLibrary, MaterialProps};
use crate::mesh::MeshSettings;
use crate::studies::{
    placement_label, DesignSpace, OptimizerMethod, SearchSpace, StudySettings, VariableRange, DEFAULT_H_GRID,
    VOLTAGE_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Simulate,
    Sweep,
    EnvSweep,
    Grip,
    Optimize,
    Compare,
    Verify,
    MeshInfo,
    DumpDesign,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Simulate => "simulate",
            StudyKind::Sweep => "sweep",
            StudyKind::EnvSweep => "env-sweep",
            StudyKind::Grip => "grip",
            StudyKind::Optimize => "optimize",
            StudyKind::Compare => "compare",
            StudyKind::Verify => "verify",
            StudyKind::MeshInfo => "mesh-info",
            StudyKind::DumpDesign => "dump-design",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Model1,
    Model2,
    /// Single buried conductor at `metal_offset` above the polymer midplane.
    Parametric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub model: ModelKind,
    /// Plan and stack parameters replacing the defaults.
    #[serde(default)]
    pub overrides: DesignOverrides,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDesign {
    Name(ModelKind),
    Table(DesignConfig),
}

/// Per-material replacements; omitted fields keep the built-in value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tce: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thermal_conductivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specific_heat: Option<f64>,
    /// S/um
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electrical_conductivity: Option<f64>,
}

impl MaterialOverride {
    fn full(p: &MaterialProps) -> MaterialOverride {
        MaterialOverride {
            density: Some(p.density),
            youngs_modulus: Some(p.youngs_modulus),
            poisson_ratio: Some(p.poisson_ratio),
            tce: Some(p.tce),
            thermal_conductivity: Some(p.thermal_conductivity),
            specific_heat: Some(p.specific_heat),
            electrical_conductivity: p.electrical_conductivity,
        }
    }

    fn apply(&self, p: &mut MaterialProps) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.density, self.density);
        set(&mut p.youngs_modulus, self.youngs_modulus);
        set(&mut p.poisson_ratio, self.poisson_ratio);
        set(&mut p.tce, self.tce);
        set(&mut p.thermal_conductivity, self.thermal_conductivity);
        set(&mut p.specific_heat, self.specific_heat);
        if self.electrical_conductivity.is_some() {
            p.electrical_conductivity = self.electrical_conductivity;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub method: OptimizerMethod,
    pub budget: usize,
    /// Explicit stacks to compare: "model1", "model2" or "offset=<um>".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placements: Option<Vec<String>>,
    /// Continuous variables, used when `placements` is absent.
    pub variables: Vec<VariableRange>,
    pub operating_voltage: f64,
    pub required_closure: f64,
    pub max_voltage: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            method: OptimizerMethod::Grid,
            budget: 5,
            placements: None,
            variables: vec![VariableRange {
                variable: crate::studies::StackVariable::MetalPlacementOffset,
                min: -8.0,
                max: 8.0,
            }],
            operating_voltage: 0.25,
            required_closure: 10.0,
            max_voltage: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    /// Any of "csv", "json", "vtk".
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

pub const OUTPUT_FORMATS: &[&str] = &["csv", "json", "vtk"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    study: Option<StudyKind>,
    design: Option<RawDesign>,
    #[serde(default)]
    materials: BTreeMap<String, MaterialOverride>,
    mesh: Option<MeshSettings>,
    solver: Option<SolveOptions>,
    environment: Option<Environment>,
    voltage: Option<f64>,
    voltages: Option<Vec<f64>>,
    h_values: Option<Vec<f64>>,
    object_diameter: Option<f64>,
    closure_targets: Option<Vec<f64>>,
    optimize: Option<OptimizeConfig>,
    output: Option<OutputConfig>,
}

/// Fully resolved study description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub design: DesignConfig,
    /// Every material of the library after overrides.
    pub materials: BTreeMap<String, MaterialOverride>,
    pub mesh: MeshSettings,
    pub solver: SolveOptions,
    pub environment: Environment,
    /// Operating voltage of simulate and grip, V.
    pub voltage: f64,
    /// Voltages of sweep, env-sweep and compare, V.
    pub voltages: Vec<f64>,
    /// Convection coefficients of env-sweep, W/(m^2 K).
    pub h_values: Vec<f64>,
    /// Object to grip, um.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_diameter: Option<f64>,
    /// Closures for the required-voltage table of env-sweep, um.
    pub closure_targets: Vec<f64>,
    pub optimize: OptimizeConfig,
    pub output: OutputConfig,
}

/// 0 to 0.3 V in 0.05 V steps.
pub fn default_voltages() -> Vec<f64> {
    (0..=6).map(|i| i as f64 / 20.0).collect()
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|s| s.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

/// Parses, applies defaults and validates a configuration file's text.
pub fn parse_config(text: &str) -> Result<StudyConfig> {
    parse_config_for(text, None)
}

/// As [`parse_config`] for a caller that already knows the study. The file
/// may then omit `study`, but must not name a different one.
pub fn parse_config_for(text: &str, study: Option<StudyKind>) -> Result<StudyConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        Error::ConfigSyntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    let design = match raw.design {
        None => DesignConfig {
            model: ModelKind::Model1,
            overrides: DesignOverrides::new(),
        },
        Some(RawDesign::Name(model)) => DesignConfig {
            model,
            overrides: DesignOverrides::new(),
        },
        Some(RawDesign::Table(t)) => t,
    };
    let mut library = MaterialLibrary::builtin();
    for (name, ov) in &raw.materials {
        let mut props = library
            .get(name)
            .map_err(|_| Error::Config(format!("unknown material '{name}' in [materials]")))?
            .clone();
        ov.apply(&mut props);
        library.insert(props);
    }
    let study = match (raw.study, study) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "file is a '{}' study but '{}' was requested",
                a.name(),
                b.name()
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Config("missing key 'study'".into())),
    };
    let cfg = StudyConfig {
        study,
        design,
        materials: library
            .materials
            .iter()
            .map(|(k, p)| (k.clone(), MaterialOverride::full(p)))
            .collect(),
        mesh: raw.mesh.unwrap_or_default(),
        solver: raw.solver.unwrap_or_default(),
        environment: raw.environment.unwrap_or_default(),
        voltage: raw.voltage.unwrap_or(0.25),
        voltages: raw.voltages.unwrap_or_else(default_voltages),
        h_values: raw.h_values.unwrap_or_else(|| DEFAULT_H_GRID.to_vec()),
        object_diameter: raw.object_diameter,
        closure_targets: raw.closure_targets.unwrap_or_else(|| vec![5.0, 10.0, 15.0]),
        optimize: raw.optimize.unwrap_or_default(),
        output: raw.output.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl StudyConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn library(&self) -> MaterialLibrary {
        let mut lib = MaterialLibrary::builtin();
        for (name, ov) in &self.materials {
            if let Ok(p) = lib.get(name) {
                let mut p = p.clone();
                ov.apply(&mut p);
                lib.insert(p);
            }
        }
        lib
    }

    pub fn placement(&self) -> MetalPlacement {
        match self.design.model {
            ModelKind::Model1 => MetalPlacement::BothFaces,
            ModelKind::Model2 => MetalPlacement::Midplane,
            ModelKind::Parametric => {
                MetalPlacement::ParametricOffset(self.design.overrides.get("metal_offset").copied().unwrap_or(0.0))
            }
        }
    }

    pub fn build_design(&self) -> Result<GripperDesign> {
        let id = match self.design.model {
            ModelKind::Model1 => "model1",
            ModelKind::Model2 => "model2",
            ModelKind::Parametric => "parametric",
        };
        build_design(id, self.placement(), Some(&self.design.overrides), self.library())
    }

    pub fn settings(&self) -> StudySettings {
        StudySettings {
            mesh: self.mesh,
            solver: self.solver,
            object_diameter: self.object_diameter,
        }
    }

    pub fn design_space(&self) -> Result<DesignSpace> {
        let o = &self.optimize;
        let space = match &o.placements {
            Some(list) => SearchSpace::Placements(list.iter().map(|s| parse_placement(s)).collect::<Result<_>>()?),
            None => SearchSpace::Continuous(o.variables.clone()),
        };
        let mut overrides = self.design.overrides.clone();
        overrides.remove("metal_offset");
        Ok(DesignSpace {
            space,
            overrides,
            materials: self.library(),
            operating_voltage: o.operating_voltage,
            environment: self.environment,
            required_closure: o.required_closure,
            max_voltage: o.max_voltage,
        })
    }

    fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for key in self.design.overrides.keys() {
            if !OVERRIDE_KEYS.contains(&key.as_str()) {
                bad.push(format!("unknown design parameter '{key}'"));
            }
        }
        if self.design.overrides.contains_key("metal_offset") && self.design.model != ModelKind::Parametric {
            bad.push("metal_offset only applies to model = \"parametric\"".into());
        }
        if let Err(e) = self.library().validate() {
            bad.push(e.to_string());
        }
        bad.extend(self.environment.validate());
        let in_range = |v: f64| (0.0..=VOLTAGE_LIMIT).contains(&v);
        if !in_range(self.voltage) {
            bad.push(format!("voltage {} outside [0, {VOLTAGE_LIMIT}]", self.voltage));
        }
        if self.voltages.is_empty() || !self.voltages.iter().all(|v| in_range(*v)) {
            bad.push(format!("voltages must be non-empty and inside [0, {VOLTAGE_LIMIT}]"));
        }
        if self.voltages.windows(2).any(|w| w[1] < w[0]) {
            bad.push("voltages must be sorted ascending".into());
        }
        if self.h_values.is_empty() || self.h_values.iter().any(|h| !(*h >= crate::materials::AIR_CONVECTION)) {
            bad.push("h_values must be non-empty and >= the air value 20".into());
        }
        if let Some(d) = self.object_diameter {
            if !(d > 0.0) {
                bad.push(format!("object_diameter must be > 0 (got {d})"));
            }
        }
        if self.closure_targets.iter().any(|t| !(*t > 0.0)) {
            bad.push("closure_targets must be > 0".into());
        }
        if self.optimize.budget < 3 {
            bad.push("optimize.budget must be >= 3".into());
        }
        if let Some(list) = &self.optimize.placements {
            for p in list {
                if let Err(e) = parse_placement(p) {
                    bad.push(e.to_string());
                }
            }
        }
        for f in &self.output.formats {
            if !OUTPUT_FORMATS.contains(&f.as_str()) {
                bad.push(format!("unknown output format '{f}'"));
            }
        }
        if let Err(e) = self.solver.validate() {
            bad.push(e.to_string());
        }
        if let Err(e) = self.mesh.validate() {
            bad.push(e.to_string());
        }
        if bad.is_empty() {
            if let Err(e) = self.build_design() {
                bad.push(e.to_string());
            }
            if let Err(e) = self.design_space().and_then(|s| s.validate()) {
                bad.push(e.to_string());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// "model1", "model2", "midplane", "both_faces" or "offset=<um>".
pub fn parse_placement(s: &str) -> Result<MetalPlacement> {
    match s {
        "model1" | "both_faces" => Ok(MetalPlacement::BothFaces),
        "model2" | "midplane" => Ok(MetalPlacement::Midplane),
        other => other
            .strip_prefix("offset=")
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .map(MetalPlacement::ParametricOffset)
            .ok_or_else(|| Error::Config(format!("unknown placement '{other}'"))),
    }
}

/// Inverse of [`parse_placement`].
pub fn placement_name(p: MetalPlacement) -> String {
    placement_label(p)
}
