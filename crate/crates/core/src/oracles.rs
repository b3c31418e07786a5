//! Closed-form references for the FEM stack and the suite that compares
//! them against meshed solutions.

use serde::Serialize;

use crate::design::{build_model1, LayerRole};
use crate::error::{Error, Result};
use crate::fem::{ElementOrder, QpField, SolveOptions};
use crate::materials::{builtin_material, Environment, MaterialLibrary, GOLD, SU8};
use crate::mesh::{generate_block_mesh, BlockModel, MeshSettings, Region};
use crate::physics::{ElectricOperator, MechanicalOperator, RegionTables, Simulator, ThermalOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FinTip {
    Insulated,
    /// Same convection coefficient on the end face as on the sides.
    Convective,
    FixedTemperature(f64),
}

/// Straight fin with uniform internal heating, base held at `base_temperature`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinParams {
    pub length: f64,
    pub cross_section_area: f64,
    pub perimeter: f64,
    pub conductivity: f64,
    pub convection: f64,
    pub ambient: f64,
    /// Volumetric heating, pW/um^3.
    pub heat_density: f64,
    pub base_temperature: f64,
    pub tip: FinTip,
}

impl FinParams {
    fn validate(&self) -> Result<()> {
        let named = [
            ("length", self.length),
            ("cross_section_area", self.cross_section_area),
            ("perimeter", self.perimeter),
            ("conductivity", self.conductivity),
            ("convection", self.convection),
            ("ambient", self.ambient),
            ("base_temperature", self.base_temperature),
        ];
        let mut bad: Vec<String> = named
            .iter()
            .filter(|(_, v)| !(*v > 0.0 && v.is_finite()))
            .map(|(n, v)| format!("{n} must be > 0 (got {v})"))
            .collect();
        if !(self.heat_density >= 0.0 && self.heat_density.is_finite()) {
            bad.push(format!("heat_density must be >= 0 (got {})", self.heat_density));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(bad.join("; ")))
        }
    }

    /// sqrt(hP / kA), 1/um.
    pub fn fin_parameter(&self) -> f64 {
        (self.convection * self.perimeter / (self.conductivity * self.cross_section_area)).sqrt()
    }

    /// Rise at which convection balances the source, qA/(hP).
    pub fn plateau_rise(&self) -> f64 {
        self.heat_density * self.cross_section_area / (self.convection * self.perimeter)
    }
}

/// Temperature at `x` along the fin.
///
/// Written as `plateau + a e^{-mx} + b e^{-m(L-x)}` so that long or strongly
/// cooled fins do not overflow.
pub fn fin_temperature(p: &FinParams, x: f64) -> Result<f64> {
    p.validate()?;
    if !(0.0..=p.length).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, {}] (got {x})", p.length)));
    }
    let (a, b) = fin_coefficients(p);
    let m = p.fin_parameter();
    let rise = p.plateau_rise() + a * (-m * x).exp() + b * (-m * (p.length - x)).exp();
    Ok(p.ambient + rise)
}

fn fin_coefficients(p: &FinParams) -> (f64, f64) {
    let m = p.fin_parameter();
    let e = (-m * p.length).exp();
    let plateau = p.plateau_rise();
    let base = p.base_temperature - p.ambient - plateau;
    // Base row: a + e b = base. Tip row: c1 a + c2 b = r.
    let (c1, c2, r) = match p.tip {
        FinTip::Insulated => (-e, 1.0, 0.0),
        FinTip::Convective => {
            let km = p.conductivity * m;
            let h = p.convection;
            (e * (km - h), -(km + h), h * plateau)
        }
        FinTip::FixedTemperature(t) => (e, 1.0, t - p.ambient - plateau),
    };
    let det = c2 - e * c1;
    ((base * c2 - e * r) / det, (r - c1 * base) / det)
}

/// Largest temperature along the fin, from a dense sample plus the ends.
pub fn fin_max_temperature(p: &FinParams) -> Result<f64> {
    let n = 20_000;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = p.length * i as f64 / n as f64;
        best = best.max(fin_temperature(p, x)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamLayer {
    pub youngs_modulus: f64,
    pub tce: f64,
    pub thickness: f64,
}

/// Two-layer strip, `bottom` at z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BimorphParams {
    pub bottom: BeamLayer,
    pub top: BeamLayer,
    pub width: f64,
    pub length: f64,
    pub temperature_change: f64,
}

impl BimorphParams {
    fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, l) in [("bottom", &self.bottom), ("top", &self.top)] {
            if !(l.thickness > 0.0 && l.youngs_modulus > 0.0 && l.tce >= 0.0) {
                bad.push(format!("{name} layer needs thickness > 0, modulus > 0, tce >= 0"));
            }
        }
        if !(self.width > 0.0 && self.length > 0.0) {
            bad.push("width and length must be > 0".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(bad.join("; ")))
        }
    }

    pub fn total_thickness(&self) -> f64 {
        self.bottom.thickness + self.top.thickness
    }

    /// Length over total thickness is below 10, where beam theory is doubtful.
    pub fn slenderness_warning(&self) -> bool {
        self.length / self.total_thickness() < 10.0
    }

    pub fn swapped(&self) -> BimorphParams {
        BimorphParams {
            bottom: self.top,
            top: self.bottom,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bending {
    /// 1/um, positive when the strip curls towards +z.
    pub curvature: f64,
    /// Tip rise of a cantilever clamped at one end, um.
    pub tip_deflection: f64,
}

/// Classical bimetallic-strip curvature.
pub fn bimorph_tip_deflection(p: &BimorphParams) -> Result<Bending> {
    p.validate()?;
    // Evaluate with the layers in a canonical order so that swapping them
    // flips the sign bit-for-bit.
    let key = |l: &BeamLayer| (l.thickness, l.youngs_modulus, l.tce);
    let (l1, l2, sign) = if key(&p.bottom) <= key(&p.top) {
        (p.bottom, p.top, 1.0)
    } else {
        (p.top, p.bottom, -1.0)
    };
    let m = l1.thickness / l2.thickness;
    let n = l1.youngs_modulus / l2.youngs_modulus;
    let h = l1.thickness + l2.thickness;
    let denom = h * (3.0 * (1.0 + m).powi(2) + (1.0 + m * n) * (m * m + 1.0 / (m * n)));
    let kappa = sign * 6.0 * (l1.tce - l2.tce) * p.temperature_change * (1.0 + m).powi(2) / denom;
    Ok(Bending {
        curvature: kappa,
        tip_deflection: kappa * p.length * p.length / 2.0,
    })
}

/// Same strip from force and moment balance of the laminate, with the
/// section integrals done by composite Simpson quadrature.
pub fn bimorph_layered_integration(p: &BimorphParams, panels_per_layer: usize) -> Result<Bending> {
    p.validate()?;
    let panels = panels_per_layer.max(2) & !1;
    let layers = [(0.0, p.bottom), (p.bottom.thickness, p.top)];
    // Section integrals of E, E z, E z^2, E alpha dT, E alpha dT z.
    let mut s = [0.0f64; 5];
    for (z0, layer) in layers {
        let dz = layer.thickness / panels as f64;
        for i in 0..=panels {
            let z = z0 + dz * i as f64;
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            } * dz
                / 3.0;
            let e = layer.youngs_modulus;
            let th = layer.tce * p.temperature_change;
            let f = [e, e * z, e * z * z, e * th, e * th * z];
            for (acc, v) in s.iter_mut().zip(f) {
                *acc += w * v;
            }
        }
    }
    // Strain e0 - z k: zero net force and zero net moment.
    let [a, b, d, nt, mt] = s;
    let det = -a * d + b * b;
    let kappa = (a * mt - b * nt) / det;
    Ok(Bending {
        curvature: kappa,
        tip_deflection: kappa * p.length * p.length / 2.0,
    })
}

/// R = L / (sigma A), ohms for sigma in S/um and lengths in um.
pub fn rod_resistance(length: f64, area: f64, conductivity: f64) -> Result<f64> {
    if !(length > 0.0 && area > 0.0 && conductivity > 0.0) {
        return Err(Error::Domain(format!(
            "length, area and conductivity must be > 0 (got {length}, {area}, {conductivity})"
        )));
    }
    Ok(length / (conductivity * area))
}

fn polymer(role: LayerRole) -> Region {
    Region {
        material: SU8.into(),
        role,
    }
}

/// FEM maximum temperature of a heated, anchored square rod and the fin
/// oracle for the same rod (convective end face).
pub fn fin_fem_comparison(length: f64, side: f64, heat_density: f64, settings: &MeshSettings) -> Result<(f64, f64)> {
    let lib = MaterialLibrary::builtin();
    let su8 = lib.get(SU8)?.clone();
    let env = Environment::air();
    let model = BlockModel::anchored_rod(length, side, side, polymer(LayerRole::StructuralPolymer));
    let mesh = generate_block_mesh(&model, settings)?;
    let tables = RegionTables::new(&mesh, &lib)?;
    let opts = SolveOptions::default();
    let op = ThermalOperator::new(&mesh, &tables, env.convection_coefficient, &opts)?;
    let nq = crate::fem::element::ReferenceHex::new(mesh.order).n_points();
    let source = QpField {
        points_per_element: nq,
        values: vec![heat_density; mesh.n_elements() * nq],
    };
    let sol = op.solve(&mesh, &source, env.ambient_temperature, &opts)?;
    let fem_max = sol.temperature.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p = FinParams {
        length,
        cross_section_area: side * side,
        perimeter: 4.0 * side,
        conductivity: su8.thermal_conductivity,
        convection: env.convection_coefficient,
        ambient: env.ambient_temperature,
        heat_density,
        base_temperature: env.ambient_temperature,
        tip: FinTip::Convective,
    };
    Ok((fem_max, fin_max_temperature(&p)?))
}

/// Default strip of the verification suite: 0.3 um gold under 20 um SU-8,
/// narrow enough that it bends as a beam rather than a plate.
pub fn su8_gold_strip() -> BimorphParams {
    let su8 = builtin_material(SU8).expect("builtin");
    let gold = builtin_material(GOLD).expect("builtin");
    BimorphParams {
        bottom: BeamLayer {
            youngs_modulus: gold.youngs_modulus,
            tce: gold.tce,
            thickness: 0.3,
        },
        top: BeamLayer {
            youngs_modulus: su8.youngs_modulus,
            tce: su8.tce,
            thickness: 20.0,
        },
        width: 5.0,
        length: 400.0,
        temperature_change: 100.0,
    }
}

/// Mesh for refinement `level` of the default strip; each level halves the
/// element size in every direction.
pub fn bimorph_refinement(level: u32) -> MeshSettings {
    let scale = 0.5f64.powi(level as i32);
    MeshSettings {
        resolution: 5.0 * scale,
        order: ElementOrder::Quadratic,
        thickness_resolution: Some(10.0 * scale),
    }
}

/// Mean vertical tip displacement of a meshed SU-8/Gold cantilever under a
/// uniform temperature change.
pub fn bimorph_fem_deflection(p: &BimorphParams, settings: &MeshSettings) -> Result<f64> {
    let gold = Region {
        material: GOLD.into(),
        role: LayerRole::StructuralPolymer,
    };
    let model = BlockModel::bilayer_cantilever(
        p.length,
        p.width,
        (gold, p.bottom.thickness),
        (polymer(LayerRole::StructuralPolymer), p.top.thickness),
    );
    let mesh = generate_block_mesh(&model, settings)?;
    let mut lib = MaterialLibrary::builtin();
    for (name, layer) in [(GOLD, p.bottom), (SU8, p.top)] {
        let mut m = lib.get(name)?.clone();
        m.youngs_modulus = layer.youngs_modulus;
        m.tce = layer.tce;
        lib.insert(m);
    }
    let tables = RegionTables::new(&mesh, &lib)?;
    let opts = SolveOptions::default();
    let op = MechanicalOperator::new(&mesh, &tables, &opts)?;
    let rise = vec![p.temperature_change; mesh.n_nodes()];
    let u = op.solve(&mesh, &rise, &opts)?;
    let tip: Vec<usize> = (0..mesh.n_nodes())
        .filter(|&a| (mesh.nodes[a][0] - p.length).abs() < 1e-9)
        .collect();
    Ok(tip.iter().map(|&a| u[3 * a + 2]).sum::<f64>() / tip.len() as f64)
}

/// FEM resistance V / I of a rod with end terminals at 1 V.
pub fn rod_fem_resistance(length: f64, side: f64, conductivity: f64, settings: &MeshSettings) -> Result<f64> {
    let mut lib = MaterialLibrary::builtin();
    lib.set_conductivity(GOLD, conductivity)?;
    let region = Region {
        material: GOLD.into(),
        role: LayerRole::Conductor,
    };
    let model = BlockModel::rod(length, side, side, region);
    let mesh = generate_block_mesh(&model, settings)?;
    let tables = RegionTables::new(&mesh, &lib)?;
    let opts = SolveOptions::default();
    let sol = ElectricOperator::new(&mesh, &tables, &opts)?.solve(&mesh, 1.0, &opts)?;
    // Current in pA; R in ohm = 1 V / (I * 1e-12 A).
    Ok(1.0 / (sol.total_current * 1e-12))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub computed: f64,
    pub reference: f64,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn relative(name: &str, computed: f64, reference: f64, tolerance: f64) -> OracleCheck {
        let error = if reference == 0.0 {
            computed.abs()
        } else {
            ((computed - reference) / reference).abs()
        };
        OracleCheck {
            name: name.into(),
            computed,
            reference,
            error,
            tolerance,
            passed: error <= tolerance,
        }
    }
}

/// Runs every FEM-vs-oracle comparison. Checks that cannot be evaluated are
/// reported as failures carrying the error text in their name.
pub fn verify_suite() -> Vec<OracleCheck> {
    let mut out = Vec::new();
    let mut push = |r: Result<OracleCheck>, name: &str| match r {
        Ok(c) => out.push(c),
        Err(e) => out.push(OracleCheck {
            name: format!("{name} ({e})"),
            computed: f64::NAN,
            reference: f64::NAN,
            error: f64::INFINITY,
            tolerance: 0.0,
            passed: false,
        }),
    };

    let fin = (|| {
        let (fem, oracle) = fin_fem_comparison(200.0, 5.0, 1.0e4, &MeshSettings::new(2.5, ElementOrder::Quadratic))?;
        let amb = Environment::air().ambient_temperature;
        Ok(OracleCheck::relative("fin max temperature rise", fem - amb, oracle - amb, 0.01))
    })();
    push(fin, "fin max temperature rise");

    let strip = su8_gold_strip();
    let dual = (|| {
        let a = bimorph_tip_deflection(&strip)?;
        let b = bimorph_layered_integration(&strip, 64)?;
        Ok(OracleCheck::relative("bimorph formula vs layered integration", a.tip_deflection, b.tip_deflection, 1e-3))
    })();
    push(dual, "bimorph formula vs layered integration");

    let fem_bimorph = (|| {
        let fem = bimorph_fem_deflection(&strip, &bimorph_refinement(2))?;
        let oracle = bimorph_tip_deflection(&strip)?;
        Ok(OracleCheck::relative("bimorph FEM tip deflection", fem, oracle.tip_deflection, 0.05))
    })();
    push(fem_bimorph, "bimorph FEM tip deflection");

    let rod = (|| {
        let fem = rod_fem_resistance(100.0, 3.0f64.sqrt(), 41.0, &MeshSettings::new(0.5, ElementOrder::Quadratic))?;
        Ok(OracleCheck::relative("rod resistance", fem, rod_resistance(100.0, 3.0, 41.0)?, 1e-8))
    })();
    push(rod, "rod resistance");

    let balance = (|| {
        let d = build_model1(None)?;
        let sim = Simulator::new(&d, &MeshSettings::default(), &SolveOptions::default())?;
        let s = sim.run(0.25, &Environment::air())?;
        Ok(vec![
            OracleCheck {
                name: "model 1 energy balance".into(),
                computed: s.convective_loss + s.base_heat_outflow,
                reference: s.joule_power_total,
                error: s.energy_imbalance(),
                tolerance: 1e-6,
                passed: s.energy_imbalance() <= 1e-6,
            },
            OracleCheck {
                name: "model 1 current balance".into(),
                computed: s.terminals.iter().map(|t| t.current).sum(),
                reference: 0.0,
                error: s.current_imbalance(),
                tolerance: 1e-10,
                passed: s.current_imbalance() <= 1e-10,
            },
        ])
    })();
    match balance {
        Ok(v) => out.extend(v),
        Err(e) => push(Err(e), "model 1 balances"),
    }
    out
}
