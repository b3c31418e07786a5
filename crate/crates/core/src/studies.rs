//! Voltage and environment sweeps, required-voltage search, heater
//! calibration, model comparison and stack optimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_design, DesignOverrides, GripperDesign, MetalPlacement};
use crate::error::{Error, Result};
use crate::fem::SolveOptions;
use crate::grip::{grip_with, GripOptions};
use crate::materials::{Environment, MaterialLibrary, AIR_CONVECTION};
use crate::mesh::MeshSettings;
use crate::physics::{Simulator, Solution};

/// Highest voltage any study will apply, V.
pub const VOLTAGE_LIMIT: f64 = 1.0;

/// Convection coefficients of the liquid sweep, W/(m^2 K).
pub const DEFAULT_H_GRID: [f64; 5] = [20.0, 100.0, 250.0, 500.0, 1000.0];

pub const CSV_HEADER: &str =
    "design_id,voltage_V,h_W_per_m2K,tip_gap_um,max_T_K,tip_T_K,out_of_plane_um,power_pW,grip_force_uN,grip_pressure_MPa";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub design_id: String,
    pub applied_voltage: f64,
    pub convection_coefficient: f64,
    pub tip_gap: f64,
    pub max_temperature: f64,
    pub tip_temperature: f64,
    pub out_of_plane_max: f64,
    pub joule_power_total: f64,
    /// Total normal force on the object, uN.
    pub grip_force: Option<f64>,
    /// Largest contact pressure, MPa.
    pub grip_pressure: Option<f64>,
}

impl SweepRecord {
    pub fn from_solution(id: &str, s: &Solution) -> SweepRecord {
        SweepRecord {
            design_id: id.to_string(),
            applied_voltage: s.applied_voltage,
            convection_coefficient: s.environment.convection_coefficient,
            tip_gap: s.tip_gap,
            max_temperature: s.max_temperature,
            tip_temperature: s.tip_temperature,
            out_of_plane_max: s.out_of_plane_max,
            joule_power_total: s.joule_power_total,
            grip_force: None,
            grip_pressure: None,
        }
    }

    /// One CSV line without the newline; floats use the shortest exact form.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.design_id,
            self.applied_voltage,
            self.convection_coefficient,
            self.tip_gap,
            self.max_temperature,
            self.tip_temperature,
            self.out_of_plane_max,
            self.joule_power_total,
            opt(self.grip_force),
            opt(self.grip_pressure)
        )
    }
}

/// Meshing and solver settings shared by every run of a study.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StudySettings {
    pub mesh: MeshSettings,
    pub solver: SolveOptions,
    /// Object to grip at every sweep point, um.
    pub object_diameter: Option<f64>,
}

fn check_voltages(voltages: &[f64]) -> Result<()> {
    if voltages.is_empty() {
        return Err(Error::Study("voltage list is empty".into()));
    }
    if let Some(v) = voltages.iter().find(|v| !(**v >= 0.0 && **v <= VOLTAGE_LIMIT)) {
        return Err(Error::Study(format!("voltage {v} V outside [0, {VOLTAGE_LIMIT}]")));
    }
    if voltages.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Study("voltages must be sorted ascending".into()));
    }
    Ok(())
}

fn run_point(sim: &Simulator, voltage: f64, env: &Environment, object: Option<f64>) -> Result<SweepRecord> {
    let wrap = |e: Error| Error::Sweep {
        voltage,
        convection: env.convection_coefficient,
        source: Box::new(e),
    };
    let s = sim.run(voltage, env).map_err(wrap)?;
    let mut rec = SweepRecord::from_solution(&sim.design.id, &s);
    if let Some(d) = object {
        let g = grip_with(sim, voltage, env, d, &GripOptions::default()).map_err(wrap)?;
        rec.grip_force = Some(g.total_normal_force);
        rec.grip_pressure = Some(g.max_contact_pressure);
    }
    Ok(rec)
}

/// Runs every (environment, voltage) job in parallel and returns records in
/// job order. The first failing job in that order is reported.
fn run_jobs(sim: &Simulator, jobs: &[(f64, Environment)], object: Option<f64>) -> Result<Vec<SweepRecord>> {
    jobs.par_iter()
        .map(|(v, env)| run_point(sim, *v, env, object))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// One coupled run per voltage, in input order.
pub fn voltage_sweep(sim: &Simulator, voltages: &[f64], env: &Environment, object: Option<f64>) -> Result<Vec<SweepRecord>> {
    check_voltages(voltages)?;
    let jobs: Vec<(f64, Environment)> = voltages.iter().map(|&v| (v, *env)).collect();
    run_jobs(sim, &jobs, object)
}

fn check_h_values(h_values: &[f64]) -> Result<()> {
    if h_values.is_empty() {
        return Err(Error::Study("convection list is empty".into()));
    }
    if let Some(h) = h_values.iter().find(|h| !(**h >= AIR_CONVECTION && h.is_finite())) {
        return Err(Error::Study(format!(
            "convection coefficient {h} is below the air value {AIR_CONVECTION}"
        )));
    }
    Ok(())
}

/// Cross product of convection values and voltages, grouped by h in input
/// order with the voltages in input order inside each group.
pub fn environment_sweep(
    sim: &Simulator,
    voltages: &[f64],
    h_values: &[f64],
    ambient_temperature: f64,
    object: Option<f64>,
) -> Result<Vec<SweepRecord>> {
    check_voltages(voltages)?;
    check_h_values(h_values)?;
    let mut jobs = Vec::new();
    for &h in h_values {
        let env = Environment {
            ambient_temperature,
            convection_coefficient: h,
        };
        for &v in voltages {
            jobs.push((v, env));
        }
    }
    run_jobs(sim, &jobs, object)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequiredVoltage {
    pub convection_coefficient: f64,
    /// Closure sought, um.
    pub target_closure: f64,
    /// `None` when the target needs more than the voltage limit.
    pub voltage: Option<f64>,
    /// Closure of the confirming run at that voltage.
    pub achieved_closure: Option<f64>,
}

/// Smallest voltage reaching `target_closure` in environment `env`.
///
/// Closure grows with the square of the voltage, so one probe run fixes the
/// answer; a second run at the answer confirms it.
pub fn required_voltage(
    sim: &Simulator,
    target_closure: f64,
    env: &Environment,
    max_voltage: f64,
) -> Result<RequiredVoltage> {
    if !(target_closure > 0.0 && target_closure < sim.design.tip_gap_open()) {
        return Err(Error::Study(format!(
            "closure target {target_closure} um must lie in (0, {})",
            sim.design.tip_gap_open()
        )));
    }
    let gap_open = sim.design.tip_gap_open();
    let probe_v = max_voltage.min(VOLTAGE_LIMIT);
    let probe = gap_open - sim.run(probe_v, env)?.tip_gap;
    let mut out = RequiredVoltage {
        convection_coefficient: env.convection_coefficient,
        target_closure,
        voltage: None,
        achieved_closure: None,
    };
    if probe < target_closure {
        return Ok(out);
    }
    let v = probe_v * (target_closure / probe).sqrt();
    let achieved = gap_open - sim.run(v, env)?.tip_gap;
    if ((achieved - target_closure) / target_closure).abs() > 1e-6 {
        return Err(Error::Study(format!(
            "closure is not quadratic in voltage: {achieved} um at {v} V for target {target_closure} um"
        )));
    }
    out.voltage = Some(v);
    out.achieved_closure = Some(achieved);
    Ok(out)
}

/// Required voltages for every (target, h) pair, targets outermost.
pub fn required_voltage_table(
    sim: &Simulator,
    targets: &[f64],
    h_values: &[f64],
    ambient_temperature: f64,
    max_voltage: f64,
) -> Result<Vec<RequiredVoltage>> {
    check_h_values(h_values)?;
    let jobs: Vec<(f64, f64)> = targets.iter().flat_map(|&t| h_values.iter().map(move |&h| (t, h))).collect();
    jobs.par_iter()
        .map(|&(t, h)| {
            let env = Environment {
                ambient_temperature,
                convection_coefficient: h,
            };
            required_voltage(sim, t, &env, max_voltage)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Metal conductivity (S/um) that makes `design` reach `target_gap` at
/// `voltage` without an object. Closure is proportional to conductivity at
/// fixed voltage, so the answer follows from one run and is then checked.
pub fn calibrate_conductivity(
    design: &GripperDesign,
    target_gap: f64,
    voltage: f64,
    env: &Environment,
    settings: &StudySettings,
) -> Result<f64> {
    let gap_open = design.tip_gap_open();
    if !(target_gap >= 0.0 && target_gap < gap_open) {
        return Err(Error::Study(format!("target gap {target_gap} um must lie in [0, {gap_open})")));
    }
    let metal = design.stack_params.metal_material.clone();
    let sigma0 = design
        .materials
        .get(&metal)?
        .electrical_conductivity
        .ok_or_else(|| Error::Study(format!("'{metal}' has no electrical conductivity")))?;
    let sim = Simulator::new(design, &settings.mesh, &settings.solver)?;
    let closure0 = gap_open - sim.run(voltage, env)?.tip_gap;
    if closure0 <= 0.0 {
        return Err(Error::Study(format!("no closure at {voltage} V; cannot calibrate")));
    }
    let sigma = sigma0 * (gap_open - target_gap) / closure0;
    let mut calibrated = design.clone();
    calibrated.materials.set_conductivity(&metal, sigma)?;
    let check = Simulator::from_mesh(&calibrated, sim.mesh.clone(), &settings.solver)?.run(voltage, env)?;
    if (check.tip_gap - target_gap).abs() > 1e-6 * gap_open {
        return Err(Error::Study(format!(
            "calibration check missed: gap {} um for target {target_gap} um",
            check.tip_gap
        )));
    }
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    /// (Model 1, Model 2) per voltage.
    pub pairs: Vec<(SweepRecord, SweepRecord)>,
    /// Model 2 gap >= Model 1 gap at every voltage.
    pub model2_closes_slower: bool,
    /// Model 2 out-of-plane <= Model 1 at every voltage.
    pub model2_out_of_plane_smaller: bool,
    /// Growth of Model 2's out-of-plane displacement from 0.05 V to 0.3 V,
    /// when both are sampled.
    pub model2_out_of_plane_growth: Option<f64>,
}

/// Both built-in models with the same materials over the same voltages.
pub fn compare_models(
    voltages: &[f64],
    env: &Environment,
    materials: &MaterialLibrary,
    overrides: Option<&DesignOverrides>,
    settings: &StudySettings,
) -> Result<ModelComparison> {
    let m1 = build_design("model1", MetalPlacement::BothFaces, overrides, materials.clone())?;
    let m2 = build_design("model2", MetalPlacement::Midplane, overrides, materials.clone())?;
    let r1 = voltage_sweep(&Simulator::new(&m1, &settings.mesh, &settings.solver)?, voltages, env, None)?;
    let r2 = voltage_sweep(&Simulator::new(&m2, &settings.mesh, &settings.solver)?, voltages, env, None)?;
    let pairs: Vec<(SweepRecord, SweepRecord)> = r1.into_iter().zip(r2).collect();
    let slack = 1e-9;
    let at = |v: f64| {
        pairs
            .iter()
            .find(|(_, b)| (b.applied_voltage - v).abs() < 1e-12)
            .map(|(_, b)| b.out_of_plane_max)
    };
    Ok(ModelComparison {
        model2_closes_slower: pairs.iter().all(|(a, b)| b.tip_gap >= a.tip_gap - slack),
        model2_out_of_plane_smaller: pairs.iter().all(|(a, b)| b.out_of_plane_max <= a.out_of_plane_max + slack),
        model2_out_of_plane_growth: at(0.05).zip(at(0.3)).map(|(lo, hi)| hi - lo),
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackVariable {
    /// Share of the polymer below a single buried conductor, in (0, 1).
    PolymerSplitFraction,
    /// um
    MetalThickness,
    /// Height of a single buried conductor above the polymer midplane, um.
    MetalPlacementOffset,
}

impl StackVariable {
    pub fn key(self) -> &'static str {
        match self {
            StackVariable::PolymerSplitFraction => "polymer_split_fraction",
            StackVariable::MetalThickness => "metal_thickness",
            StackVariable::MetalPlacementOffset => "metal_placement_offset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableRange {
    pub variable: StackVariable,
    pub min: f64,
    pub max: f64,
}

/// Stack layouts searched by [`optimize_design`]: either an explicit list of
/// placements or a box over continuous stack variables.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchSpace {
    Placements(Vec<MetalPlacement>),
    Continuous(Vec<VariableRange>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    pub space: SearchSpace,
    /// Plan and stack overrides applied to every candidate.
    pub overrides: DesignOverrides,
    pub materials: MaterialLibrary,
    pub operating_voltage: f64,
    pub environment: Environment,
    /// Closure the design must reach at `max_voltage`, um.
    pub required_closure: f64,
    pub max_voltage: f64,
}

impl DesignSpace {
    pub fn new(space: SearchSpace) -> DesignSpace {
        DesignSpace {
            space,
            overrides: DesignOverrides::new(),
            materials: MaterialLibrary::builtin(),
            operating_voltage: 0.25,
            environment: Environment::air(),
            required_closure: 10.0,
            max_voltage: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        match &self.space {
            SearchSpace::Placements(p) if p.is_empty() => bad.push("placement list is empty".to_string()),
            SearchSpace::Continuous(vars) => {
                if vars.is_empty() {
                    bad.push("no design variables".into());
                }
                for r in vars {
                    if !(r.min <= r.max && r.min.is_finite() && r.max.is_finite()) {
                        bad.push(format!("{} range [{}, {}] is empty", r.variable.key(), r.min, r.max));
                    }
                    if r.variable == StackVariable::PolymerSplitFraction && !(r.min > 0.0 && r.max < 1.0) {
                        bad.push("polymer_split_fraction must stay inside (0, 1)".into());
                    }
                    if r.variable == StackVariable::MetalThickness && r.min <= 0.0 {
                        bad.push("metal_thickness must be > 0".into());
                    }
                }
                let has = |v| vars.iter().any(|r| r.variable == v);
                if has(StackVariable::PolymerSplitFraction) && has(StackVariable::MetalPlacementOffset) {
                    bad.push("polymer_split_fraction and metal_placement_offset both place the conductor".into());
                }
                let mut keys: Vec<_> = vars.iter().map(|r| r.variable).collect();
                keys.sort();
                keys.dedup();
                if keys.len() != vars.len() {
                    bad.push("a design variable is listed twice".into());
                }
            }
            _ => {}
        }
        if !(self.max_voltage > 0.0 && self.max_voltage <= VOLTAGE_LIMIT) {
            bad.push(format!("max_voltage must lie in (0, {VOLTAGE_LIMIT}]"));
        }
        if !(self.operating_voltage >= 0.0 && self.operating_voltage <= VOLTAGE_LIMIT) {
            bad.push(format!("operating_voltage must lie in [0, {VOLTAGE_LIMIT}]"));
        }
        if !(self.required_closure >= 0.0) {
            bad.push("required_closure must be >= 0".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Study(bad.join("; ")))
        }
    }

    fn design_at(&self, point: &Point) -> Result<GripperDesign> {
        let mut ov = self.overrides.clone();
        let placement = match point {
            Point::Placement(p) => *p,
            Point::Vector(x) => {
                let SearchSpace::Continuous(vars) = &self.space else {
                    unreachable!("vector point in a placement space")
                };
                let mut placement = MetalPlacement::ParametricOffset(ov.remove("metal_offset").unwrap_or(0.0));
                let mut split = None;
                for (r, &v) in vars.iter().zip(x) {
                    match r.variable {
                        StackVariable::MetalThickness => {
                            ov.insert("metal_thickness".into(), v);
                        }
                        StackVariable::MetalPlacementOffset => placement = MetalPlacement::ParametricOffset(v),
                        StackVariable::PolymerSplitFraction => split = Some(v),
                    }
                }
                if let Some(f) = split {
                    let polymer = ov.get("polymer_thickness").copied().unwrap_or(20.0);
                    placement = MetalPlacement::ParametricOffset((f - 0.5) * polymer);
                }
                placement
            }
        };
        let id = match placement {
            MetalPlacement::BothFaces => "model1",
            MetalPlacement::Midplane => "model2",
            MetalPlacement::ParametricOffset(_) => "parametric",
        };
        build_design(id, placement, Some(&ov), self.materials.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerMethod {
    Grid,
    GoldenSection,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq)]
enum Point {
    Placement(MetalPlacement),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub index: usize,
    pub design_id: String,
    pub label: String,
    /// (variable, value) for continuous spaces.
    pub variables: Vec<(String, f64)>,
    /// Out-of-plane displacement at the operating voltage, um.
    pub objective: f64,
    /// Closure at the maximum voltage, um.
    pub closure: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimization {
    pub method: OptimizerMethod,
    pub trace: Vec<Evaluation>,
    /// Index into `trace` of the best feasible point.
    pub best: Option<usize>,
}

impl Optimization {
    /// The winning evaluation, or the infeasibility report naming the point
    /// that came closest to the closure constraint.
    pub fn best(&self, required_closure: f64) -> Result<&Evaluation> {
        if let Some(i) = self.best {
            return Ok(&self.trace[i]);
        }
        let closest = self
            .trace
            .iter()
            .max_by(|a, b| a.closure.total_cmp(&b.closure))
            .ok_or_else(|| Error::Study("no evaluations".into()))?;
        Err(Error::Infeasible {
            closest: closest.label.clone(),
            shortfall: required_closure - closest.closure,
        })
    }
}

struct Evaluator<'a> {
    space: &'a DesignSpace,
    settings: &'a StudySettings,
    trace: Vec<Evaluation>,
    budget: usize,
}

impl Evaluator<'_> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    fn label(&self, point: &Point) -> (String, Vec<(String, f64)>) {
        match (point, &self.space.space) {
            (Point::Placement(p), _) => (placement_label(*p), Vec::new()),
            (Point::Vector(x), SearchSpace::Continuous(vars)) => {
                let named: Vec<(String, f64)> = vars.iter().zip(x).map(|(r, &v)| (r.variable.key().to_string(), v)).collect();
                let label = named.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
                (label, named)
            }
            _ => unreachable!("vector point in a placement space"),
        }
    }

    /// Evaluates a batch in parallel, appending to the trace in batch order.
    /// Points past the budget are dropped.
    fn evaluate(&mut self, points: &[Point]) -> Result<Vec<Evaluation>> {
        let room = self.budget.saturating_sub(self.trace.len());
        let points = &points[..points.len().min(room)];
        let results: Vec<Result<(String, f64, f64)>> = points
            .par_iter()
            .map(|p| {
                let d = self.space.design_at(p)?;
                let sim = Simulator::new(&d, &self.settings.mesh, &self.settings.solver)?;
                let env = &self.space.environment;
                let objective = sim.run(self.space.operating_voltage, env)?.out_of_plane_max;
                let closure = d.tip_gap_open() - sim.run(self.space.max_voltage, env)?.tip_gap;
                Ok((d.id.clone(), objective, closure))
            })
            .collect();
        let mut out = Vec::new();
        for (p, r) in points.iter().zip(results) {
            let (design_id, objective, closure) = r?;
            let (label, variables) = self.label(p);
            let e = Evaluation {
                index: self.trace.len(),
                design_id,
                label,
                variables,
                objective,
                closure,
                feasible: closure >= self.space.required_closure,
            };
            self.trace.push(e.clone());
            out.push(e);
        }
        Ok(out)
    }

    /// Objective for the search itself: infeasible points are pushed above
    /// every feasible one by their shortfall.
    fn merit(&self, e: &Evaluation) -> f64 {
        if e.feasible {
            e.objective
        } else {
            1.0e6 + (self.space.required_closure - e.closure)
        }
    }
}

pub fn placement_label(p: MetalPlacement) -> String {
    match p {
        MetalPlacement::BothFaces => "both_faces".into(),
        MetalPlacement::Midplane => "midplane".into(),
        MetalPlacement::ParametricOffset(o) => format!("offset={o}"),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Tensor grid with at most `budget` points.
fn grid_points(vars: &[VariableRange], budget: usize) -> Vec<Vec<f64>> {
    let k = vars.len() as u32;
    let mut per = 1usize;
    while (per + 1).pow(k) <= budget {
        per += 1;
    }
    let axes: Vec<Vec<f64>> = vars.iter().map(|r| linspace(r.min, r.max, if r.min == r.max { 1 } else { per })).collect();
    let mut pts = vec![Vec::new()];
    for axis in &axes {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    pts
}

/// Minimizes out-of-plane displacement over `space` subject to the closure
/// constraint, spending at most `budget` coupled evaluations.
pub fn optimize_design(
    space: &DesignSpace,
    method: OptimizerMethod,
    budget: usize,
    seed: u64,
    settings: &StudySettings,
) -> Result<Optimization> {
    if budget < 3 {
        return Err(Error::Study(format!("budget must be >= 3 (got {budget})")));
    }
    space.validate()?;
    let mut ev = Evaluator {
        space,
        settings,
        trace: Vec::new(),
        budget,
    };
    match (&space.space, method) {
        (SearchSpace::Placements(list), _) => {
            let pts: Vec<Point> = list.iter().map(|p| Point::Placement(*p)).collect();
            ev.evaluate(&pts)?;
        }
        (SearchSpace::Continuous(vars), OptimizerMethod::Grid) => {
            let pts: Vec<Point> = grid_points(vars, budget).into_iter().map(Point::Vector).collect();
            ev.evaluate(&pts)?;
        }
        (SearchSpace::Continuous(vars), OptimizerMethod::GoldenSection) => {
            if vars.len() != 1 {
                return Err(Error::Study("golden-section search needs exactly one variable".into()));
            }
            golden_section(&mut ev, vars[0])?;
        }
        (SearchSpace::Continuous(vars), OptimizerMethod::NelderMead) => {
            nelder_mead(&mut ev, vars, seed)?;
        }
    }
    let best = ev
        .trace
        .iter()
        .filter(|e| e.feasible)
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.index.cmp(&b.index)))
        .map(|e| e.index);
    Ok(Optimization {
        method,
        trace: ev.trace,
        best,
    })
}

fn golden_section(ev: &mut Evaluator, range: VariableRange) -> Result<()> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (range.min, range.max);
    let eval1 = |ev: &mut Evaluator, x: f64| -> Result<f64> {
        let e = ev.evaluate(&[Point::Vector(vec![x])])?;
        Ok(e.first().map(|e| ev.merit(e)).unwrap_or(f64::INFINITY))
    };
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = eval1(ev, c)?;
    let mut fd = eval1(ev, d)?;
    while !ev.exhausted() && (b - a) > 1e-9 * (1.0 + range.max.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval1(ev, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval1(ev, d)?;
        }
    }
    Ok(())
}

/// Grid-seeded Nelder-Mead in coordinates scaled to the unit box, with one
/// restart from the best point found, its simplex jittered by `seed`.
fn nelder_mead(ev: &mut Evaluator, vars: &[VariableRange], seed: u64) -> Result<()> {
    let k = vars.len();
    let to_real = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(vars)
            .map(|(&t, r)| r.min + t.clamp(0.0, 1.0) * (r.max - r.min))
            .collect()
    };
    // Coarse grid first: 3 points per axis, capped at half the budget.
    let grid_budget = (ev.budget / 2).max(1).min(3usize.pow(k as u32));
    let unit: Vec<VariableRange> = vars
        .iter()
        .map(|r| VariableRange {
            variable: r.variable,
            min: 0.0,
            max: 1.0,
        })
        .collect();
    let grid = grid_points(&unit, grid_budget);
    let evals = ev.evaluate(&grid.iter().map(|u| Point::Vector(to_real(u))).collect::<Vec<_>>())?;
    let mut best_u = grid[evals
        .iter()
        .enumerate()
        .min_by(|a, b| ev.merit(a.1).total_cmp(&ev.merit(b.1)))
        .map(|(i, _)| i)
        .unwrap_or(0)]
    .clone();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for restart in 0..2 {
        let step = if restart == 0 { 0.25 } else { 0.1 * rng.random_range(0.5..1.5) };
        let mut simplex = vec![best_u.clone()];
        for i in 0..k {
            let mut p = best_u.clone();
            p[i] = if p[i] + step <= 1.0 { p[i] + step } else { p[i] - step };
            simplex.push(p);
        }
        best_u = run_simplex(ev, simplex, &to_real)?;
        if ev.exhausted() {
            break;
        }
    }
    Ok(())
}

fn run_simplex(ev: &mut Evaluator, mut simplex: Vec<Vec<f64>>, to_real: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
    let k = simplex.len() - 1;
    let mut f = Vec::new();
    for p in &simplex {
        match ev.evaluate(&[Point::Vector(to_real(p))])?.first() {
            Some(e) => f.push(ev.merit(e)),
            None => return Ok(simplex[0].clone()),
        }
    }
    let eval = |ev: &mut Evaluator, p: &[f64]| -> Result<Option<f64>> {
        Ok(ev.evaluate(&[Point::Vector(to_real(p))])?.first().map(|e| ev.merit(e)))
    };
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| (x + t * (y - x)).clamp(0.0, 1.0)).collect()
    };
    while !ev.exhausted() {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        f = order.iter().map(|&i| f[i]).collect();
        let spread = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < 1e-6 {
            break;
        }
        let centroid: Vec<f64> = (0..k).map(|j| simplex[..k].iter().map(|p| p[j]).sum::<f64>() / k as f64).collect();
        let worst = simplex[k].clone();
        let reflected = lerp(&centroid, &worst, -1.0);
        let Some(fr) = eval(ev, &reflected)? else { break };
        if fr < f[0] {
            let expanded = lerp(&centroid, &worst, -2.0);
            let Some(fe) = eval(ev, &expanded)? else { break };
            (simplex[k], f[k]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < f[k - 1] {
            (simplex[k], f[k]) = (reflected, fr);
        } else {
            let contracted = lerp(&centroid, &worst, 0.5);
            let Some(fc) = eval(ev, &contracted)? else { break };
            if fc < f[k] {
                (simplex[k], f[k]) = (contracted, fc);
            } else {
                for i in 1..=k {
                    simplex[i] = lerp(&simplex[0], &simplex[i], 0.5);
                    let Some(fi) = eval(ev, &simplex[i].clone())? else { return Ok(simplex[0].clone()) };
                    f[i] = fi;
                }
            }
        }
    }
    let best = (0..simplex.len()).min_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap_or(0);
    Ok(simplex[best].clone())
}
