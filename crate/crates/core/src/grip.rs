//! Gripping force on a rigid cylindrical object held between the tips.
//!
//! The cylinder stands vertically at the tip centre. Tip nodes that would
//! penetrate it get a normal penalty spring. Springs only touch a handful of
//! dofs, so each solve reuses the cached mechanical factorization through the
//! compliance of the candidate nodes instead of refactoring.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

use crate::design::{ArmSide, GripperDesign};
use crate::error::{Error, Result, Stage};
use crate::materials::Environment;
use crate::fem::element::FaceTables;
use crate::fem::SolveOptions;
use crate::mesh::{FacetTag, MeshSettings};
use crate::physics::Simulator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GripOptions {
    /// First penalty, contact pressure per unit penetration (MPa/um);
    /// `None` picks one from the polymer modulus and the mesh size.
    pub initial_penalty: Option<f64>,
    /// Relative force change that stops the penalty continuation.
    pub force_tolerance: f64,
    pub max_doublings: usize,
    pub max_active_set_iterations: usize,
}

impl Default for GripOptions {
    fn default() -> Self {
        GripOptions {
            initial_penalty: None,
            force_tolerance: 0.005,
            max_doublings: 40,
            max_active_set_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GripResult {
    pub object_diameter: f64,
    pub applied_voltage: f64,
    pub contact: bool,
    /// Sum of the normal forces on both tips, uN.
    pub total_normal_force: f64,
    pub left_force: f64,
    pub right_force: f64,
    /// Total force over engaged facet area, MPa.
    pub mean_contact_pressure: f64,
    /// Largest nodal force over its tributary facet area, MPa.
    pub max_contact_pressure: f64,
    /// Area of tip facets touching an active spring, both tips, um^2.
    pub contact_area: f64,
    /// Closure without the object, um.
    pub unconstrained_closure: f64,
    pub penalty: f64,
    /// Total force after each penalty level.
    pub force_history: Vec<f64>,
}

impl GripResult {
    fn open(object_diameter: f64, applied_voltage: f64, closure: f64) -> GripResult {
        GripResult {
            object_diameter,
            applied_voltage,
            contact: false,
            total_normal_force: 0.0,
            left_force: 0.0,
            right_force: 0.0,
            mean_contact_pressure: 0.0,
            max_contact_pressure: 0.0,
            contact_area: 0.0,
            unconstrained_closure: closure,
            penalty: 0.0,
            force_history: Vec::new(),
        }
    }
}

struct Candidate {
    node: usize,
    side: ArmSide,
    normal: [f64; 3],
    /// Normal displacement at which the node reaches the cylinder.
    target: f64,
    /// Consistent share of the tip surface, um^2.
    area: f64,
}

/// Meshes `d`, runs the chain and resolves contact with the object.
pub fn estimate_grip(
    d: &GripperDesign,
    applied_voltage: f64,
    env: &Environment,
    object_diameter: f64,
    mesh: &MeshSettings,
    solver: &SolveOptions,
) -> Result<GripResult> {
    let sim = Simulator::new(d, mesh, solver)?;
    grip_with(&sim, applied_voltage, env, object_diameter, &GripOptions::default())
}

/// As [`estimate_grip`] on an existing simulator.
pub fn grip_with(
    sim: &Simulator,
    applied_voltage: f64,
    env: &Environment,
    object_diameter: f64,
    opts: &GripOptions,
) -> Result<GripResult> {
    let gap_open = sim.design.tip_gap_open();
    if !(object_diameter > 0.0 && object_diameter < gap_open) {
        return Err(Error::Domain(format!(
            "object diameter must lie in (0, {gap_open}) um (got {object_diameter})"
        )));
    }
    let free = sim.run(applied_voltage, env)?;
    let closure = gap_open - free.tip_gap;
    if closure < gap_open - object_diameter {
        return Ok(GripResult::open(object_diameter, applied_voltage, closure));
    }
    contact_solve(sim, &free.displacement, applied_voltage, object_diameter, closure, opts)
        .map_err(|e| e.in_stage(Stage::Contact))
}

fn candidates(sim: &Simulator, radius: f64) -> Vec<Candidate> {
    let mesh = &sim.mesh;
    let (cx, cy) = sim.design.grip_center();
    let faces = FaceTables::new(mesh.order);
    let mut seen = std::collections::BTreeMap::new();
    for f in &mesh.facets {
        if let FacetTag::Tip(side) = f.tag {
            let table = faces.get(f.face);
            let da = table.area_elements(&mesh.facet_coords(f));
            for (k, &a) in f.nodes.iter().enumerate() {
                let w: f64 = da.iter().zip(&table.values).map(|(d, v)| d * v[k]).sum();
                seen.entry(a).or_insert((side, 0.0)).1 += w;
            }
        }
    }
    seen.into_iter()
        .map(|(node, (side, area))| {
            let p = mesh.nodes[node];
            let (dx, dy) = (p[0] - cx, p[1] - cy);
            let r = dx.hypot(dy);
            Candidate {
                node,
                side,
                normal: [dx / r, dy / r, 0.0],
                target: -(r - radius),
                area,
            }
        })
        .collect()
}

fn contact_solve(
    sim: &Simulator,
    u0: &[f64],
    applied_voltage: f64,
    object_diameter: f64,
    closure: f64,
    opts: &GripOptions,
) -> Result<GripResult> {
    let mech = sim.mechanical()?;
    let cands = candidates(sim, object_diameter / 2.0);
    let m = cands.len();

    // Column j: displacement of every candidate along its normal under a
    // unit force along candidate j's normal.
    let dofs = mech.dofs();
    let mut compliance = vec![vec![0.0; m]; m];
    for (j, c) in cands.iter().enumerate() {
        let mut rhs = vec![0.0; dofs.n_free()];
        for k in 0..3 {
            if let Some(i) = dofs.free_index(3 * c.node + k) {
                rhs[i] = c.normal[k];
            }
        }
        let u = mech.solve_free(&rhs, &sim.solver)?;
        for (i, ci) in cands.iter().enumerate() {
            compliance[i][j] = (0..3).map(|k| ci.normal[k] * u[3 * ci.node + k]).sum();
        }
    }
    let w0: Vec<f64> = cands
        .iter()
        .map(|c| (0..3).map(|k| c.normal[k] * u0[3 * c.node + k]).sum())
        .collect();

    let mut penalty = opts.initial_penalty.unwrap_or_else(|| default_penalty(sim));
    let mut active: Vec<bool> = (0..m).map(|i| w0[i] < cands[i].target).collect();
    let mut history = Vec::new();
    for _ in 0..=opts.max_doublings {
        let forces = active_set(&compliance, &w0, &cands, penalty, &mut active, opts)?;
        let total: f64 = forces.iter().sum();
        let converged = history
            .last()
            .is_some_and(|prev: &f64| (total - prev).abs() <= opts.force_tolerance * total.abs().max(1e-300));
        history.push(total);
        if converged {
            return Ok(summarize(
                sim,
                &cands,
                &forces,
                applied_voltage,
                object_diameter,
                closure,
                penalty,
                history,
            ));
        }
        penalty *= 2.0;
    }
    Err(Error::ContactNotConverged { history })
}

/// Polymer modulus over the typical facet edge.
fn default_penalty(sim: &Simulator) -> f64 {
    let mesh = &sim.mesh;
    let tips: Vec<f64> = mesh
        .facets
        .iter()
        .filter(|f| matches!(f.tag, FacetTag::Tip(_)))
        .map(|f| f.area.sqrt())
        .collect();
    let edge = tips.iter().sum::<f64>() / tips.len().max(1) as f64;
    let modulus = sim
        .design
        .materials
        .get(&sim.design.stack_params.polymer_material)
        .map(|m| m.youngs_modulus)
        .unwrap_or(1.0e3);
    modulus / edge
}

/// Spring forces (>= 0) for one penalty, iterating the active set.
fn active_set(
    compliance: &[Vec<f64>],
    w0: &[f64],
    cands: &[Candidate],
    penalty: f64,
    active: &mut [bool],
    opts: &GripOptions,
) -> Result<Vec<f64>> {
    let m = cands.len();
    let mut history = Vec::new();
    for _ in 0..opts.max_active_set_iterations {
        let idx: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
        let n = idx.len();
        // Force f_i = k_i (t_i - w_i) with w = w0 + C f on the active set:
        // (K^-1 + C) f = t - w0.
        let a = Mat::from_fn(n, n, |r, c| {
            let spring = if r == c { 1.0 / (penalty * cands[idx[r]].area) } else { 0.0 };
            compliance[idx[r]][idx[c]] + spring
        });
        let b = Mat::from_fn(n, 1, |r, _| cands[idx[r]].target - w0[idx[r]]);
        let f_act = if n > 0 { a.partial_piv_lu().solve(&b) } else { Mat::zeros(0, 1) };
        let mut forces = vec![0.0; m];
        for (r, &i) in idx.iter().enumerate() {
            forces[i] = f_act[(r, 0)];
        }
        let w: Vec<f64> = (0..m)
            .map(|i| w0[i] + (0..m).map(|j| compliance[i][j] * forces[j]).sum::<f64>())
            .collect();
        let mut changed = false;
        for i in 0..m {
            let want = if active[i] { forces[i] > 0.0 } else { w[i] < cands[i].target };
            if want != active[i] {
                active[i] = want;
                changed = true;
            }
        }
        history.push(forces.iter().sum());
        if !changed {
            return Ok(forces);
        }
    }
    Err(Error::ContactNotConverged { history })
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    sim: &Simulator,
    cands: &[Candidate],
    forces: &[f64],
    applied_voltage: f64,
    object_diameter: f64,
    closure: f64,
    penalty: f64,
    history: Vec<f64>,
) -> GripResult {
    let mesh = &sim.mesh;
    let mut node_force = std::collections::BTreeMap::new();
    let (mut left, mut right) = (0.0, 0.0);
    for (c, &f) in cands.iter().zip(forces) {
        if f > 0.0 {
            node_force.insert(c.node, f);
            match c.side {
                ArmSide::Left => left += f,
                ArmSide::Right => right += f,
            }
        }
    }
    let engaged: Vec<&crate::mesh::Facet> = mesh
        .facets
        .iter()
        .filter(|f| matches!(f.tag, FacetTag::Tip(_)) && f.nodes.iter().any(|a| node_force.contains_key(a)))
        .collect();
    let max_pressure = cands
        .iter()
        .zip(forces)
        .filter(|(_, f)| **f > 0.0)
        .map(|(c, f)| f / c.area)
        .fold(0.0, f64::max);
    let area: f64 = engaged.iter().map(|f| f.area).sum();
    let total = left + right;
    GripResult {
        object_diameter,
        applied_voltage,
        contact: true,
        total_normal_force: total,
        left_force: left,
        right_force: right,
        mean_contact_pressure: if area > 0.0 { total / area } else { 0.0 },
        max_contact_pressure: max_pressure,
        contact_area: area,
        unconstrained_closure: closure,
        penalty,
        force_history: history,
    }
}
