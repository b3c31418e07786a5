//! Electric, thermal and thermoelastic solves and the one-way chain that
//! couples them.
//!
//! Temperatures are solved as the rise over ambient, which is also the
//! stress-free reference, so the thermal and mechanical constraints are
//! homogeneous and their factorizations can be reused across loads.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::design::{ArmSide, GripperDesign, LayerRole, Polarity};
use crate::error::{Error, Result, Stage};
use crate::fem::assemble::{assemble, assemble_rhs, residual};
use crate::fem::element::{element_geometry, FaceTables, ReferenceHex};
use crate::fem::{Conduction, CsrMatrix, DofMap, ElasticProps, Elasticity, Factorization, Kernel, QpField, Robin, SolveOptions, SolverKind};
use crate::materials::{Environment, MaterialLibrary, PICO};
use crate::mesh::{generate_mesh_with, FacetTag, Mesh, MeshSettings};

/// Per-region coefficient tables resolved from a material library.
#[derive(Debug, Clone)]
pub struct RegionTables {
    /// Electrical conductivity in pA/(V um), conductors only.
    pub electric: Vec<Option<f64>>,
    pub thermal: Vec<Option<f64>>,
    pub elastic: Vec<Option<ElasticProps>>,
}

impl RegionTables {
    pub fn new(mesh: &Mesh, lib: &MaterialLibrary) -> Result<RegionTables> {
        let mut t = RegionTables {
            electric: Vec::new(),
            thermal: Vec::new(),
            elastic: Vec::new(),
        };
        for region in &mesh.regions {
            let m = lib.get(&region.material)?;
            let sigma = if region.role == LayerRole::Conductor {
                match m.electrical_conductivity {
                    Some(s) if s > 0.0 && s.is_finite() => Some(s * PICO),
                    other => {
                        return Err(Error::InvalidMaterial {
                            name: m.name.clone(),
                            violations: vec![format!(
                                "conductor needs electrical_conductivity > 0 (got {other:?})"
                            )],
                        })
                    }
                }
            } else {
                None
            };
            t.electric.push(sigma);
            t.thermal.push(Some(m.thermal_conductivity));
            t.elastic.push(Some(ElasticProps::from_engineering(
                m.youngs_modulus,
                m.poisson_ratio,
                m.tce,
            )));
        }
        Ok(t)
    }
}

fn solve_cached(f: &Factorization, rhs: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    match opts.kind {
        SolverKind::Direct => f.solve(rhs, opts.rel_tol),
        SolverKind::Cg => crate::fem::solve::pcg(f.matrix(), rhs, opts.rel_tol, opts.max_iterations),
    }
}

fn factor(matrix: &crate::fem::CsrMatrix, opts: &SolveOptions) -> Result<Option<Factorization>> {
    if matrix.n == 0 {
        return Ok(None);
    }
    match opts.kind {
        SolverKind::Direct => Factorization::new(matrix).map(Some),
        // CG only needs the matrix; keep it behind the same handle.
        SolverKind::Cg => Ok(Some(Factorization::unfactored(matrix.clone()))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalCurrent {
    pub id: String,
    pub arm: ArmSide,
    pub polarity: Polarity,
    /// Current entering the conductor through this terminal, pA.
    pub current: f64,
}

#[derive(Debug, Clone)]
pub struct ElectricSolution {
    /// Nodal potential, V (zero off the conductor).
    pub voltage: Vec<f64>,
    /// Joule heat density at Gauss points, pW/um^3.
    pub joule: QpField,
    pub terminals: Vec<TerminalCurrent>,
    /// Sum of supply currents, pA.
    pub total_current: f64,
    /// Integral of the Joule density, pW.
    pub power: f64,
}

/// Potential problem on the conductor elements with the supply terminals
/// held at unit voltage; scaled per solve.
pub struct ElectricOperator {
    conductor: Vec<bool>,
    dofs: DofMap,
    rhs_unit: Vec<f64>,
    factor: Option<Factorization>,
    sigma: Vec<Option<f64>>,
    /// Unconstrained operator over the conductor nodes with each diagonal
    /// reset to minus its row's off-diagonal sum, so constants lie exactly
    /// in its null space.
    flux: CsrMatrix,
    flux_dofs: DofMap,
}

impl ElectricOperator {
    pub fn new(mesh: &Mesh, tables: &RegionTables, opts: &SolveOptions) -> Result<ElectricOperator> {
        crate::mesh::check_conductor_topology(mesh)?;
        let conductor: Vec<bool> = (0..mesh.n_elements()).map(|e| mesh.is_conductor(e)).collect();
        let mut active = vec![false; mesh.n_nodes()];
        for e in 0..mesh.n_elements() {
            if conductor[e] {
                for &a in mesh.element(e) {
                    active[a] = true;
                }
            }
        }
        let mut cons = BTreeMap::new();
        for f in &mesh.facets {
            if let FacetTag::Terminal(t) = f.tag {
                let v = match mesh.terminals[t].polarity {
                    Polarity::Supply => 1.0,
                    Polarity::Return => 0.0,
                };
                for &a in &f.nodes {
                    if let Some(old) = cons.insert(a, v) {
                        if old != v {
                            return Err(Error::Topology(format!("node {a} touches a supply and a return terminal")));
                        }
                    }
                }
            }
        }
        let cons: Vec<(usize, f64)> = cons.into_iter().collect();
        let dofs = DofMap::new(mesh.n_nodes(), 1, Some(&active), &cons)?;
        let kernel = Kernel::Conduction(Conduction {
            coefficient: &tables.electric,
            elements: Some(&conductor),
            source: None,
            robin: None,
        });
        let sys = assemble(mesh, &kernel, &dofs)?;
        let factor = factor(&sys.matrix, opts)?;
        let flux_dofs = DofMap::new(mesh.n_nodes(), 1, Some(&active), &[])?;
        let mut flux = assemble(mesh, &kernel, &flux_dofs)?.matrix;
        for i in 0..flux.n {
            let range = flux.row_ptr[i]..flux.row_ptr[i + 1];
            let off: f64 = range.clone().filter(|&k| flux.col_idx[k] != i).map(|k| flux.values[k]).sum();
            for k in range {
                if flux.col_idx[k] == i {
                    flux.values[k] = -off;
                }
            }
        }
        Ok(ElectricOperator {
            conductor,
            dofs,
            rhs_unit: sys.rhs,
            factor,
            sigma: tables.electric.clone(),
            flux,
            flux_dofs,
        })
    }

    /// Net current leaving each node, pA, summed from potential differences
    /// between neighbours so that roundoff scales with the local drop rather
    /// than the absolute potential.
    fn nodal_currents(&self, voltage: &[f64]) -> Vec<f64> {
        let mut node_of = vec![0usize; self.flux.n];
        for a in 0..voltage.len() {
            if let Some(i) = self.flux_dofs.free_index(a) {
                node_of[i] = a;
            }
        }
        let mut out = vec![0.0; voltage.len()];
        for i in 0..self.flux.n {
            let ua = voltage[node_of[i]];
            out[node_of[i]] = (self.flux.row_ptr[i]..self.flux.row_ptr[i + 1])
                .filter(|&k| self.flux.col_idx[k] != i)
                .map(|k| self.flux.values[k] * (voltage[node_of[self.flux.col_idx[k]]] - ua))
                .sum();
        }
        out
    }

    pub fn solve(&self, mesh: &Mesh, applied_voltage: f64, opts: &SolveOptions) -> Result<ElectricSolution> {
        if !(applied_voltage >= 0.0 && applied_voltage.is_finite()) {
            return Err(Error::Domain(format!("applied voltage must be >= 0 (got {applied_voltage})")));
        }
        let rhs: Vec<f64> = self.rhs_unit.iter().map(|r| r * applied_voltage).collect();
        let free = match &self.factor {
            Some(f) => solve_cached(f, &rhs, opts)?,
            None => Vec::new(),
        };
        let mut voltage = self.dofs.expand_scaled(&free, applied_voltage);
        let mut r = self.nodal_currents(&voltage);
        // Refine against the conservative operator; a few passes take the
        // interior imbalance to roundoff in the local potential drops.
        if let Some(f) = &self.factor {
            let free_norm = |r: &[f64]| -> f64 {
                (0..r.len()).filter_map(|a| self.dofs.free_index(a).map(|_| r[a] * r[a])).sum::<f64>().sqrt()
            };
            let mut current = free_norm(&r);
            for _ in 0..3 {
                if current == 0.0 {
                    break;
                }
                let mut rhs = vec![0.0; self.dofs.n_free()];
                for (a, ra) in r.iter().enumerate() {
                    if let Some(i) = self.dofs.free_index(a) {
                        rhs[i] = -ra;
                    }
                }
                let dx = solve_cached(f, &rhs, opts)?;
                let mut trial = voltage.clone();
                for (a, v) in trial.iter_mut().enumerate() {
                    if let Some(i) = self.dofs.free_index(a) {
                        *v += dx[i];
                    }
                }
                let tr = self.nodal_currents(&trial);
                let next = free_norm(&tr);
                if next >= current {
                    break;
                }
                voltage = trial;
                r = tr;
                current = next;
            }
        }

        let mut terminals: Vec<TerminalCurrent> = mesh
            .terminals
            .iter()
            .map(|t| TerminalCurrent {
                id: t.id.clone(),
                arm: t.arm,
                polarity: t.polarity,
                current: 0.0,
            })
            .collect();
        let mut owner = BTreeMap::new();
        for f in &mesh.facets {
            if let FacetTag::Terminal(t) = f.tag {
                for &a in &f.nodes {
                    owner.insert(a, t);
                }
            }
        }
        for (a, t) in owner {
            terminals[t].current += r[a];
        }
        let total_current = terminals
            .iter()
            .filter(|t| t.polarity == Polarity::Supply)
            .map(|t| t.current)
            .sum();

        let reference = ReferenceHex::new(mesh.order);
        let nq = reference.n_points();
        let mut joule = QpField::zeros(mesh.n_elements(), nq);
        let mut power = 0.0;
        for e in 0..mesh.n_elements() {
            if !self.conductor[e] {
                continue;
            }
            let sigma = self.sigma[mesh.element_region[e]].unwrap_or(0.0);
            let geo = element_geometry(&reference, &mesh.element_coords(e))?;
            let nodes = mesh.element(e);
            for (q, g) in geo.iter().enumerate() {
                let mut grad = [0.0; 3];
                for (k, &a) in nodes.iter().enumerate() {
                    for i in 0..3 {
                        grad[i] += voltage[a] * g.gradients[k][i];
                    }
                }
                let qd = sigma * (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]);
                joule.values[e * nq + q] = qd;
                power += qd * g.dv;
            }
        }
        Ok(ElectricSolution {
            voltage,
            joule,
            terminals,
            total_current,
            power,
        })
    }
}

/// Potential, Joule heating, terminal currents and power for one voltage.
pub fn solve_electric(
    mesh: &Mesh,
    mats: &MaterialLibrary,
    applied_voltage: f64,
    opts: &SolveOptions,
) -> Result<ElectricSolution> {
    let tables = RegionTables::new(mesh, mats)?;
    ElectricOperator::new(mesh, &tables, opts)?.solve(mesh, applied_voltage, opts)
}

#[derive(Debug, Clone)]
pub struct ThermalSolution {
    /// Nodal temperature, K.
    pub temperature: Vec<f64>,
    /// Heat leaving through convection, pW.
    pub convective_loss: f64,
    /// Heat leaving through the held base, pW.
    pub base_outflow: f64,
    /// Volume integral of the source, pW.
    pub heat_input: f64,
}

pub struct ThermalOperator {
    h: f64,
    dofs: DofMap,
    robin_facets: Vec<usize>,
    factor: Option<Factorization>,
    conductivity: Vec<Option<f64>>,
}

impl ThermalOperator {
    pub fn new(mesh: &Mesh, tables: &RegionTables, h: f64, opts: &SolveOptions) -> Result<ThermalOperator> {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::Domain(format!("convection coefficient must be >= 0 (got {h})")));
        }
        let fixed = mesh.tagged_nodes(|t| t == FacetTag::FixedBase);
        if h == 0.0 && fixed.is_empty() {
            return Err(Error::Singular(
                "no convection and no held-temperature facets: temperature is unbounded".into(),
            ));
        }
        let cons: Vec<(usize, f64)> = fixed.iter().map(|&a| (a, 0.0)).collect();
        let dofs = DofMap::new(mesh.n_nodes(), 1, None, &cons)?;
        let robin_facets: Vec<usize> = (0..mesh.facets.len())
            .filter(|&i| mesh.facets[i].tag != FacetTag::FixedBase)
            .collect();
        let kernel = Kernel::Conduction(Conduction {
            coefficient: &tables.thermal,
            elements: None,
            source: None,
            robin: Some(Robin {
                facets: &robin_facets,
                h,
            }),
        });
        let sys = assemble(mesh, &kernel, &dofs)?;
        let factor = factor(&sys.matrix, opts)?;
        Ok(ThermalOperator {
            h,
            dofs,
            robin_facets,
            factor,
            conductivity: tables.thermal.clone(),
        })
    }

    pub fn solve(&self, mesh: &Mesh, source: &QpField, ambient: f64, opts: &SolveOptions) -> Result<ThermalSolution> {
        let load_kernel = Kernel::Conduction(Conduction {
            coefficient: &self.conductivity,
            elements: None,
            source: Some(source),
            robin: None,
        });
        let rhs = assemble_rhs(mesh, &load_kernel, &self.dofs)?;
        let free = match &self.factor {
            Some(f) => solve_cached(f, &rhs, opts)?,
            None => Vec::new(),
        };
        let rise = self.dofs.expand(&free);

        let full_kernel = Kernel::Conduction(Conduction {
            coefficient: &self.conductivity,
            elements: None,
            source: Some(source),
            robin: Some(Robin {
                facets: &self.robin_facets,
                h: self.h,
            }),
        });
        let r = residual(mesh, &full_kernel, &rise)?;
        let base_outflow = -self.dofs.constrained_dofs().map(|d| r[d]).sum::<f64>();
        let faces = FaceTables::new(mesh.order);
        let convective_loss: f64 = self
            .robin_facets
            .iter()
            .map(|&f| self.h * facet_integral(mesh, &faces, f, &rise))
            .sum();
        let heat_input = volume_integral(mesh, source)?;
        Ok(ThermalSolution {
            temperature: rise.iter().map(|t| t + ambient).collect(),
            convective_loss,
            base_outflow,
            heat_input,
        })
    }
}

/// Integral of a nodal field over one boundary facet.
pub fn facet_integral(mesh: &Mesh, faces: &FaceTables, facet: usize, nodal: &[f64]) -> f64 {
    let f = &mesh.facets[facet];
    let table = faces.get(f.face);
    let da = table.area_elements(&mesh.facet_coords(f));
    da.iter()
        .enumerate()
        .map(|(q, w)| {
            let v: f64 = table.values[q].iter().zip(&f.nodes).map(|(n, &a)| n * nodal[a]).sum();
            w * v
        })
        .sum()
}

fn volume_integral(mesh: &Mesh, field: &QpField) -> Result<f64> {
    let reference = ReferenceHex::new(mesh.order);
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let vals = field.element(e);
        if vals.iter().all(|v| *v == 0.0) {
            continue;
        }
        let geo = element_geometry(&reference, &mesh.element_coords(e))?;
        total += geo.iter().zip(vals).map(|(g, v)| g.dv * v).sum::<f64>();
    }
    Ok(total)
}

/// Steady conduction with Robin loss on every facet but the held base.
pub fn solve_thermal(
    mesh: &Mesh,
    mats: &MaterialLibrary,
    joule: &QpField,
    env: &Environment,
    opts: &SolveOptions,
) -> Result<ThermalSolution> {
    let tables = RegionTables::new(mesh, mats)?;
    ThermalOperator::new(mesh, &tables, env.convection_coefficient, opts)?.solve(
        mesh,
        joule,
        env.ambient_temperature,
        opts,
    )
}

pub struct MechanicalOperator {
    dofs: DofMap,
    factor: Option<Factorization>,
    elastic: Vec<Option<ElasticProps>>,
}

impl MechanicalOperator {
    /// Clamps every node on the fixed base.
    pub fn new(mesh: &Mesh, tables: &RegionTables, opts: &SolveOptions) -> Result<MechanicalOperator> {
        let fixed = mesh.tagged_nodes(|t| t == FacetTag::FixedBase);
        if fixed.is_empty() {
            return Err(Error::Singular("no fixed facets: rigid-body motion is unconstrained".into()));
        }
        let cons: Vec<(usize, f64)> = fixed
            .iter()
            .flat_map(|&a| (0..3).map(move |c| (3 * a + c, 0.0)))
            .collect();
        Self::with_constraints(mesh, tables, &cons, opts)
    }

    /// Homogeneous constraints on an arbitrary dof list.
    pub fn with_constraints(
        mesh: &Mesh,
        tables: &RegionTables,
        constrained: &[(usize, f64)],
        opts: &SolveOptions,
    ) -> Result<MechanicalOperator> {
        let dofs = DofMap::new(mesh.n_nodes(), 3, None, constrained)?;
        let kernel = Kernel::Elasticity(Elasticity {
            materials: &tables.elastic,
            temperature_rise: None,
            springs: &[],
        });
        let sys = assemble(mesh, &kernel, &dofs)?;
        let factor = factor(&sys.matrix, opts)?;
        Ok(MechanicalOperator {
            dofs,
            factor,
            elastic: tables.elastic.clone(),
        })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// Full displacement for a load given on the free dofs.
    pub fn solve_free(&self, rhs: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
        let free = match &self.factor {
            Some(f) => solve_cached(f, rhs, opts)?,
            None => Vec::new(),
        };
        Ok(self.dofs.expand(&free))
    }

    /// Displacement (3 per node) for a nodal temperature rise.
    pub fn solve(&self, mesh: &Mesh, temperature_rise: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
        let kernel = Kernel::Elasticity(Elasticity {
            materials: &self.elastic,
            temperature_rise: Some(temperature_rise),
            springs: &[],
        });
        let rhs = assemble_rhs(mesh, &kernel, &self.dofs)?;
        let free = match &self.factor {
            Some(f) => solve_cached(f, &rhs, opts)?,
            None => Vec::new(),
        };
        Ok(self.dofs.expand(&free))
    }
}

/// Linear thermoelasticity with the fixed base clamped.
pub fn solve_mechanical(
    mesh: &Mesh,
    mats: &MaterialLibrary,
    temperature: &[f64],
    reference_temperature: f64,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let tables = RegionTables::new(mesh, mats)?;
    let rise: Vec<f64> = temperature.iter().map(|t| t - reference_temperature).collect();
    MechanicalOperator::new(mesh, &tables, opts)?.solve(mesh, &rise, opts)
}

/// As [`solve_mechanical`] with caller-chosen homogeneous constraints
/// (dof = 3 * node + component) instead of the fixed base.
pub fn solve_mechanical_constrained(
    mesh: &Mesh,
    mats: &MaterialLibrary,
    temperature: &[f64],
    reference_temperature: f64,
    constrained_dofs: &[usize],
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let tables = RegionTables::new(mesh, mats)?;
    let cons: Vec<(usize, f64)> = constrained_dofs.iter().map(|&d| (d, 0.0)).collect();
    let rise: Vec<f64> = temperature.iter().map(|t| t - reference_temperature).collect();
    MechanicalOperator::with_constraints(mesh, &tables, &cons, opts)?.solve(mesh, &rise, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TipMetrics {
    /// Area-weighted inward lateral displacement of each tip face
    /// (left, right), um.
    pub inward: [f64; 2],
    /// Lateral distance between the undeformed tip faces, um.
    pub gap_open: f64,
    pub gap: f64,
    /// Area-weighted mean temperature over both tip faces, K.
    pub temperature: f64,
}

/// Tip quantities from the facets tagged `tip:left` and `tip:right`.
pub fn tip_metrics(mesh: &Mesh, temperature: &[f64], displacement: &[f64]) -> Result<TipMetrics> {
    let faces = FaceTables::new(mesh.order);
    let uy: Vec<f64> = (0..mesh.n_nodes()).map(|a| displacement[3 * a + 1]).collect();
    let mut inward = [0.0; 2];
    let mut face_y = [0.0; 2];
    let (mut t_int, mut t_area) = (0.0, 0.0);
    for (k, side) in [ArmSide::Left, ArmSide::Right].into_iter().enumerate() {
        let (mut u_int, mut area) = (0.0, 0.0);
        for (i, f) in mesh.facets.iter().enumerate() {
            if f.tag != FacetTag::Tip(side) {
                continue;
            }
            u_int += facet_integral(mesh, &faces, i, &uy);
            t_int += facet_integral(mesh, &faces, i, temperature);
            area += f.area;
            face_y[k] = f.centroid[1];
        }
        if area == 0.0 {
            return Err(Error::Topology(format!("mesh has no tip:{} facets", side.label())));
        }
        t_area += area;
        // Left arm sits at larger y and closes towards -y.
        inward[k] = -side.sign() * u_int / area;
    }
    let gap_open = face_y[0] - face_y[1];
    Ok(TipMetrics {
        inward,
        gap_open,
        gap: gap_open - (inward[0] + inward[1]),
        temperature: t_int / t_area,
    })
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub voltage: Vec<f64>,
    pub temperature: Vec<f64>,
    pub displacement: Vec<f64>,
    pub joule: QpField,
    pub joule_power_total: f64,
    pub terminals: Vec<TerminalCurrent>,
    pub total_current: f64,
    pub convective_loss: f64,
    pub base_heat_outflow: f64,
    pub tip_gap: f64,
    pub tip_inward: [f64; 2],
    pub max_temperature: f64,
    /// Part label of an element at the hottest node.
    pub max_temperature_location: String,
    pub tip_temperature: f64,
    pub out_of_plane_max: f64,
    pub applied_voltage: f64,
    pub environment: Environment,
}

impl Solution {
    /// (power - outflow) / power, zero when nothing is dissipated.
    pub fn energy_imbalance(&self) -> f64 {
        let out = self.convective_loss + self.base_heat_outflow;
        if self.joule_power_total == 0.0 {
            out.abs()
        } else {
            (self.joule_power_total - out).abs() / self.joule_power_total
        }
    }

    /// |sum of terminal currents| / supply current.
    pub fn current_imbalance(&self) -> f64 {
        let net: f64 = self.terminals.iter().map(|t| t.current).sum();
        if self.total_current == 0.0 {
            net.abs()
        } else {
            net.abs() / self.total_current.abs()
        }
    }
}

/// A meshed design with lazily built, reusable operators. Safe to share
/// between threads running different voltages or environments.
pub struct Simulator {
    pub design: GripperDesign,
    pub mesh: Mesh,
    pub solver: SolveOptions,
    tables: RegionTables,
    electric: Mutex<Option<Arc<ElectricOperator>>>,
    thermal: Mutex<BTreeMap<u64, Arc<ThermalOperator>>>,
    mechanical: Mutex<Option<Arc<MechanicalOperator>>>,
}

impl Simulator {
    pub fn new(design: &GripperDesign, mesh: &MeshSettings, solver: &SolveOptions) -> Result<Simulator> {
        solver.validate()?;
        let m = generate_mesh_with(design, mesh)?;
        Self::from_mesh(design, m, solver)
    }

    pub fn from_mesh(design: &GripperDesign, mesh: Mesh, solver: &SolveOptions) -> Result<Simulator> {
        let tables = RegionTables::new(&mesh, &design.materials)?;
        Ok(Simulator {
            design: design.clone(),
            mesh,
            solver: *solver,
            tables,
            electric: Mutex::new(None),
            thermal: Mutex::new(BTreeMap::new()),
            mechanical: Mutex::new(None),
        })
    }

    pub fn tables(&self) -> &RegionTables {
        &self.tables
    }

    pub fn electric(&self) -> Result<Arc<ElectricOperator>> {
        let mut slot = self.electric.lock().expect("electric cache");
        if let Some(op) = slot.as_ref() {
            return Ok(op.clone());
        }
        let op = Arc::new(ElectricOperator::new(&self.mesh, &self.tables, &self.solver)?);
        *slot = Some(op.clone());
        Ok(op)
    }

    pub fn thermal(&self, h: f64) -> Result<Arc<ThermalOperator>> {
        let mut cache = self.thermal.lock().expect("thermal cache");
        if let Some(op) = cache.get(&h.to_bits()) {
            return Ok(op.clone());
        }
        let op = Arc::new(ThermalOperator::new(&self.mesh, &self.tables, h, &self.solver)?);
        cache.insert(h.to_bits(), op.clone());
        Ok(op)
    }

    pub fn mechanical(&self) -> Result<Arc<MechanicalOperator>> {
        let mut slot = self.mechanical.lock().expect("mechanical cache");
        if let Some(op) = slot.as_ref() {
            return Ok(op.clone());
        }
        let op = Arc::new(MechanicalOperator::new(&self.mesh, &self.tables, &self.solver)?);
        *slot = Some(op.clone());
        Ok(op)
    }

    /// Electric, thermal and mechanical solves in sequence.
    pub fn run(&self, applied_voltage: f64, env: &Environment) -> Result<Solution> {
        let issues = env.validate();
        if !issues.is_empty() {
            return Err(Error::Domain(issues.join("; ")));
        }
        let mesh = &self.mesh;
        let opts = &self.solver;
        let electric = self
            .electric()
            .and_then(|op| op.solve(mesh, applied_voltage, opts))
            .map_err(|e| e.in_stage(Stage::Electric))?;
        let thermal = self
            .thermal(env.convection_coefficient)
            .and_then(|op| op.solve(mesh, &electric.joule, env.ambient_temperature, opts))
            .map_err(|e| e.in_stage(Stage::Thermal))?;
        let rise: Vec<f64> = thermal
            .temperature
            .iter()
            .map(|t| t - env.ambient_temperature)
            .collect();
        let displacement = self
            .mechanical()
            .and_then(|op| op.solve(mesh, &rise, opts))
            .map_err(|e| e.in_stage(Stage::Mechanical))?;
        self.collect(applied_voltage, env, electric, thermal, displacement)
    }

    fn collect(
        &self,
        applied_voltage: f64,
        env: &Environment,
        electric: ElectricSolution,
        thermal: ThermalSolution,
        displacement: Vec<f64>,
    ) -> Result<Solution> {
        let mesh = &self.mesh;
        let tip = tip_metrics(mesh, &thermal.temperature, &displacement)?;
        let (hot, max_temperature) = thermal
            .temperature
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (a, t)| if t > best.1 { (a, t) } else { best });
        let location = (0..mesh.n_elements())
            .find(|&e| mesh.element(e).contains(&hot))
            .map(|e| mesh.parts[mesh.element_part[e]].name.clone())
            .unwrap_or_default();
        let mut free_node = vec![false; mesh.n_nodes()];
        for e in 0..mesh.n_elements() {
            if mesh.is_free(e) {
                for &a in mesh.element(e) {
                    free_node[a] = true;
                }
            }
        }
        let out_of_plane_max = (0..mesh.n_nodes())
            .filter(|&a| free_node[a])
            .map(|a| displacement[3 * a + 2].abs())
            .fold(0.0, f64::max);
        Ok(Solution {
            voltage: electric.voltage,
            temperature: thermal.temperature,
            displacement,
            joule: electric.joule,
            joule_power_total: electric.power,
            terminals: electric.terminals,
            total_current: electric.total_current,
            convective_loss: thermal.convective_loss,
            base_heat_outflow: thermal.base_outflow,
            tip_gap: self.design.tip_gap_open() - (tip.inward[0] + tip.inward[1]),
            tip_inward: tip.inward,
            max_temperature,
            max_temperature_location: location,
            tip_temperature: tip.temperature,
            out_of_plane_max,
            applied_voltage,
            environment: *env,
        })
    }
}

/// Meshes `d` and runs the coupled chain once.
pub fn run_coupled(
    d: &GripperDesign,
    applied_voltage: f64,
    env: &Environment,
    mesh: &MeshSettings,
    solver: &SolveOptions,
) -> Result<Solution> {
    Simulator::new(d, mesh, solver)?.run(applied_voltage, env)
}
