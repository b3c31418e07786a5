//! Galerkin assembly of conduction and thermoelastic operators with Dirichlet
//! elimination.

use rayon::prelude::*;

use super::element::{element_geometry, FaceTables, ReferenceHex};
use super::solve::{solve_matrix, SolveOptions};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

const FREE_NONE: usize = usize::MAX;
const INACTIVE: usize = usize::MAX - 1;
const BATCH: usize = 512;

/// Maps (node, component) to an equation number, or marks it prescribed or
/// outside the solved subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub comps: usize,
    pub n_nodes: usize,
    index: Vec<usize>,
    /// Prescribed value per dof (zero where not constrained).
    pub prescribed: Vec<f64>,
    n_free: usize,
}

impl DofMap {
    /// `active` restricts the unknowns to a node subset (all nodes when
    /// `None`); `constraints` are (dof, value) with dof = node * comps + c.
    pub fn new(
        n_nodes: usize,
        comps: usize,
        active: Option<&[bool]>,
        constraints: &[(usize, f64)],
    ) -> Result<DofMap> {
        let n = n_nodes * comps;
        let mut index = vec![0usize; n];
        let mut prescribed = vec![0.0; n];
        if let Some(mask) = active {
            for (node, &on) in mask.iter().enumerate() {
                if !on {
                    for c in 0..comps {
                        index[node * comps + c] = INACTIVE;
                    }
                }
            }
        }
        for &(dof, value) in constraints {
            if dof >= n {
                return Err(Error::Assembly(format!("constrained dof {dof} out of range")));
            }
            if index[dof] == INACTIVE {
                return Err(Error::Assembly(format!("constrained dof {dof} lies outside the solved subdomain")));
            }
            if index[dof] == FREE_NONE && prescribed[dof] != value {
                return Err(Error::Assembly(format!(
                    "dof {dof} constrained to both {} and {value}",
                    prescribed[dof]
                )));
            }
            index[dof] = FREE_NONE;
            prescribed[dof] = value;
        }
        let mut n_free = 0;
        for slot in index.iter_mut() {
            if *slot == 0 {
                *slot = n_free;
                n_free += 1;
            }
        }
        Ok(DofMap {
            comps,
            n_nodes,
            index,
            prescribed,
            n_free,
        })
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_dofs(&self) -> usize {
        self.index.len()
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        let i = self.index[dof];
        (i < INACTIVE).then_some(i)
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.index[dof] == FREE_NONE
    }

    pub fn is_active(&self, dof: usize) -> bool {
        self.index[dof] != INACTIVE
    }

    pub fn constrained_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.index.len()).filter(|&d| self.is_constrained(d))
    }

    /// Full-length vector from the free unknowns.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        self.expand_scaled(free, 1.0)
    }

    /// As [`DofMap::expand`] with the prescribed values multiplied by `scale`.
    pub fn expand_scaled(&self, free: &[f64], scale: f64) -> Vec<f64> {
        self.index
            .iter()
            .enumerate()
            .map(|(d, &i)| match i {
                FREE_NONE => self.prescribed[d] * scale,
                INACTIVE => 0.0,
                i => free[i],
            })
            .collect()
    }
}

/// Values at the Gauss points of each element, element-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QpField {
    pub points_per_element: usize,
    pub values: Vec<f64>,
}

impl QpField {
    pub fn zeros(n_elements: usize, points_per_element: usize) -> QpField {
        QpField {
            points_per_element,
            values: vec![0.0; n_elements * points_per_element],
        }
    }

    pub fn element(&self, e: usize) -> &[f64] {
        let n = self.points_per_element;
        &self.values[e * n..(e + 1) * n]
    }
}

/// Convective boundary term `h * theta` on the listed facets.
#[derive(Debug, Clone, Copy)]
pub struct Robin<'a> {
    pub facets: &'a [usize],
    pub h: f64,
}

/// Scalar diffusion `-div(c grad u) = s`.
#[derive(Debug, Clone, Copy)]
pub struct Conduction<'a> {
    /// Coefficient per mesh region; `None` where undefined.
    pub coefficient: &'a [Option<f64>],
    /// Elements taking part; all when `None`.
    pub elements: Option<&'a [bool]>,
    pub source: Option<&'a QpField>,
    pub robin: Option<Robin<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticProps {
    pub lambda: f64,
    pub mu: f64,
    /// Linear expansion coefficient, 1/K.
    pub alpha: f64,
}

impl ElasticProps {
    pub fn from_engineering(e: f64, nu: f64, alpha: f64) -> ElasticProps {
        ElasticProps {
            lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            mu: e / (2.0 * (1.0 + nu)),
            alpha,
        }
    }

    /// Thermal stress per kelvin, (3 lambda + 2 mu) alpha.
    pub fn thermal_modulus(&self) -> f64 {
        (3.0 * self.lambda + 2.0 * self.mu) * self.alpha
    }
}

/// Small-strain isotropic elasticity with thermal strain `alpha * theta`.
#[derive(Debug, Clone, Copy)]
pub struct Elasticity<'a> {
    pub materials: &'a [Option<ElasticProps>],
    /// Nodal temperature rise over the stress-free reference.
    pub temperature_rise: Option<&'a [f64]>,
    /// Penalty springs `k * n n^T` on nodes with a load `k * g * n`:
    /// (node, normal, stiffness, gap target).
    pub springs: &'a [NodalSpring],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalSpring {
    pub node: usize,
    pub normal: [f64; 3],
    pub stiffness: f64,
    /// Displacement along `normal` the spring pulls the node towards.
    pub target: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum Kernel<'a> {
    Conduction(Conduction<'a>),
    Elasticity(Elasticity<'a>),
}

impl Kernel<'_> {
    pub fn comps(&self) -> usize {
        match self {
            Kernel::Conduction(_) => 1,
            Kernel::Elasticity(_) => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

impl SparseSystem {
    pub fn solve(&self, opts: &SolveOptions) -> Result<Vec<f64>> {
        solve_matrix(&self.matrix, &self.rhs, opts)
    }
}

/// Solves and returns the free unknowns; `rel_tol` as in [`SolveOptions`].
pub fn solve_spd(system: &SparseSystem, rel_tol: f64) -> Result<Vec<f64>> {
    let opts = SolveOptions {
        rel_tol,
        ..SolveOptions::default()
    };
    opts.validate()?;
    system.solve(&opts)
}

/// A local contribution: global nodes, dense matrix and load over their dofs.
struct Local {
    nodes: Vec<usize>,
    ke: Vec<f64>,
    fe: Vec<f64>,
}

fn mirror_upper(ke: &mut [f64], m: usize) {
    for r in 0..m {
        for c in 0..r {
            ke[r * m + c] = ke[c * m + r];
        }
    }
}

fn conduction_local(
    mesh: &Mesh,
    reference: &ReferenceHex,
    e: usize,
    c: f64,
    source: Option<&QpField>,
    with_matrix: bool,
) -> Result<Local> {
    let geo = element_geometry(reference, &mesh.element_coords(e))?;
    let n = reference.values[0].len();
    let mut ke = vec![0.0; if with_matrix { n * n } else { 0 }];
    let mut fe = vec![0.0; n];
    for (q, g) in geo.iter().enumerate() {
        let w = g.dv * c;
        for a in 0..n {
            if !with_matrix {
                break;
            }
            let ga = g.gradients[a];
            for b in a..n {
                let gb = g.gradients[b];
                ke[a * n + b] += w * (ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2]);
            }
        }
        if let Some(src) = source {
            let s = src.element(e)[q];
            if s != 0.0 {
                for a in 0..n {
                    fe[a] += g.dv * s * reference.values[q][a];
                }
            }
        }
    }
    if with_matrix {
        mirror_upper(&mut ke, n);
    }
    Ok(Local {
        nodes: mesh.element(e).to_vec(),
        ke,
        fe,
    })
}

fn robin_local(mesh: &Mesh, faces: &FaceTables, facet: usize, h: f64) -> Local {
    let f = &mesh.facets[facet];
    let table = faces.get(f.face);
    let da = table.area_elements(&mesh.facet_coords(f));
    let n = f.nodes.len();
    let mut ke = vec![0.0; n * n];
    for (q, w) in da.iter().enumerate() {
        let v = &table.values[q];
        for a in 0..n {
            for b in a..n {
                ke[a * n + b] += h * w * v[a] * v[b];
            }
        }
    }
    mirror_upper(&mut ke, n);
    Local {
        nodes: f.nodes.clone(),
        ke,
        fe: vec![0.0; n],
    }
}

fn elastic_local(
    mesh: &Mesh,
    reference: &ReferenceHex,
    e: usize,
    p: ElasticProps,
    theta: Option<&[f64]>,
    with_matrix: bool,
) -> Result<Local> {
    let geo = element_geometry(reference, &mesh.element_coords(e))?;
    let nodes = mesh.element(e);
    let n = nodes.len();
    let m = 3 * n;
    let mut ke = vec![0.0; if with_matrix { m * m } else { 0 }];
    let mut fe = vec![0.0; m];
    let beta = p.thermal_modulus();
    for (q, g) in geo.iter().enumerate() {
        let (lw, mw) = (p.lambda * g.dv, p.mu * g.dv);
        for a in 0..n {
            if !with_matrix {
                break;
            }
            let ga = g.gradients[a];
            for b in a..n {
                let gb = g.gradients[b];
                let dot = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
                for i in 0..3 {
                    let row = (3 * a + i) * m + 3 * b;
                    for j in 0..3 {
                        let mut v = lw * ga[i] * gb[j] + mw * ga[j] * gb[i];
                        if i == j {
                            v += mw * dot;
                        }
                        ke[row + j] += v;
                    }
                }
            }
        }
        if let Some(t) = theta {
            let tq: f64 = reference.values[q].iter().zip(nodes).map(|(nv, &a)| nv * t[a]).sum();
            if tq != 0.0 {
                let s = beta * tq * g.dv;
                for a in 0..n {
                    for i in 0..3 {
                        fe[3 * a + i] += s * g.gradients[a][i];
                    }
                }
            }
        }
    }
    // Blocks with a < b were filled whole; copy them and the lower half of
    // diagonal blocks across so the matrix is bitwise symmetric.
    if with_matrix {
        for r in 0..m {
            for c in 0..m {
                if r / 3 > c / 3 || (r / 3 == c / 3 && r > c) {
                    ke[r * m + c] = ke[c * m + r];
                }
            }
        }
    }
    Ok(Local {
        nodes: nodes.to_vec(),
        ke,
        fe,
    })
}

fn region_coefficient<T: Copy>(mesh: &Mesh, e: usize, table: &[Option<T>]) -> Result<T> {
    let r = mesh.element_region[e];
    table.get(r).copied().flatten().ok_or_else(|| {
        Error::Assembly(format!(
            "no coefficient for region {r} (material '{}')",
            mesh.regions[r].material
        ))
    })
}

fn selected_elements(mesh: &Mesh, kernel: &Kernel) -> Vec<usize> {
    match kernel {
        Kernel::Conduction(c) => match c.elements {
            Some(mask) => (0..mesh.n_elements()).filter(|&e| mask[e]).collect(),
            None => (0..mesh.n_elements()).collect(),
        },
        Kernel::Elasticity(_) => (0..mesh.n_elements()).collect(),
    }
}

/// Visits every local contribution in a fixed order. Element work runs in
/// parallel batches; `visit` is called sequentially.
fn for_each_local(mesh: &Mesh, kernel: &Kernel, with_matrix: bool, mut visit: impl FnMut(&Local)) -> Result<()> {
    let reference = ReferenceHex::new(mesh.order);
    let elements = selected_elements(mesh, kernel);
    for batch in elements.chunks(BATCH) {
        let locals: Vec<Result<Local>> = batch
            .par_iter()
            .map(|&e| match kernel {
                Kernel::Conduction(c) => {
                    let k = region_coefficient(mesh, e, c.coefficient)?;
                    conduction_local(mesh, &reference, e, k, c.source, with_matrix)
                }
                Kernel::Elasticity(el) => {
                    let p = region_coefficient(mesh, e, el.materials)?;
                    elastic_local(mesh, &reference, e, p, el.temperature_rise, with_matrix)
                }
            })
            .collect();
        for l in locals {
            visit(&l?);
        }
    }
    if let Kernel::Conduction(Conduction { robin: Some(r), .. }) = kernel {
        if r.h != 0.0 && with_matrix {
            let faces = FaceTables::new(mesh.order);
            for &f in r.facets {
                visit(&robin_local(mesh, &faces, f, r.h));
            }
        }
    }
    Ok(())
}

fn spring_terms(el: &Elasticity, mut visit: impl FnMut(usize, [[f64; 3]; 3], [f64; 3])) {
    for s in el.springs {
        let n = s.normal;
        let mut k = [[0.0; 3]; 3];
        let mut f = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = s.stiffness * n[i] * n[j];
            }
            f[i] = s.stiffness * s.target * n[i];
        }
        visit(s.node, k, f);
    }
}

/// Node adjacency expanded to the free dofs of `dofs`.
fn build_pattern(mesh: &Mesh, kernel: &Kernel, dofs: &DofMap) -> CsrMatrix {
    let comps = dofs.comps;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_nodes()];
    for e in selected_elements(mesh, kernel) {
        let nodes = mesh.element(e);
        for &a in nodes {
            adj[a].extend_from_slice(nodes);
        }
    }
    for row in adj.iter_mut() {
        row.sort_unstable();
        row.dedup();
    }
    let n = dofs.n_free();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for node in 0..mesh.n_nodes() {
        for ci in 0..comps {
            if dofs.free_index(node * comps + ci).is_none() {
                continue;
            }
            for &b in &adj[node] {
                for cj in 0..comps {
                    if let Some(j) = dofs.free_index(b * comps + cj) {
                        col_idx.push(j);
                    }
                }
            }
            // Spring-only or isolated dofs still need a diagonal slot.
            let start = *row_ptr.last().unwrap();
            let own = dofs.free_index(node * comps + ci).unwrap();
            if !col_idx[start..].contains(&own) {
                col_idx.push(own);
                col_idx[start..].sort_unstable();
            }
            row_ptr.push(col_idx.len());
        }
    }
    let nnz = col_idx.len();
    CsrMatrix {
        n,
        row_ptr,
        col_idx,
        values: vec![0.0; nnz],
    }
}

/// Assembles `kernel` over `mesh` with the constraints of `dofs` eliminated.
pub fn assemble(mesh: &Mesh, kernel: &Kernel, dofs: &DofMap) -> Result<SparseSystem> {
    let comps = kernel.comps();
    if dofs.comps != comps || dofs.n_nodes != mesh.n_nodes() {
        return Err(Error::Assembly(format!(
            "dof map ({} nodes x {}) does not fit the mesh ({} nodes x {comps})",
            dofs.n_nodes,
            dofs.comps,
            mesh.n_nodes()
        )));
    }
    let mut matrix = build_pattern(mesh, kernel, dofs);
    let mut rhs = vec![0.0; dofs.n_free()];
    let mut gdofs: Vec<usize> = Vec::new();
    for_each_local(mesh, kernel, true, |l| {
        gdofs.clear();
        for &a in &l.nodes {
            for c in 0..comps {
                gdofs.push(a * comps + c);
            }
        }
        let m = gdofs.len();
        for (r, &gr) in gdofs.iter().enumerate() {
            let Some(i) = dofs.free_index(gr) else { continue };
            rhs[i] += l.fe[r];
            for (c, &gc) in gdofs.iter().enumerate() {
                let k = l.ke[r * m + c];
                match dofs.free_index(gc) {
                    Some(j) => matrix.add(i, j, k),
                    None => rhs[i] -= k * dofs.prescribed[gc],
                }
            }
        }
    })?;
    if let Kernel::Elasticity(el) = kernel {
        spring_terms(el, |node, k, f| {
            for i in 0..3 {
                let Some(fi) = dofs.free_index(node * 3 + i) else { continue };
                rhs[fi] += f[i];
                for j in 0..3 {
                    match dofs.free_index(node * 3 + j) {
                        Some(fj) => matrix.add(fi, fj, k[i][j]),
                        None => rhs[fi] -= k[i][j] * dofs.prescribed[node * 3 + j],
                    }
                }
            }
        });
    }
    Ok(SparseSystem { matrix, rhs, dofs: dofs.clone() })
}

/// Load vector alone, for reuse with a cached factorization. Only valid
/// when every prescribed value is zero (nothing couples into the rhs).
pub fn assemble_rhs(mesh: &Mesh, kernel: &Kernel, dofs: &DofMap) -> Result<Vec<f64>> {
    if dofs.prescribed.iter().any(|v| *v != 0.0) {
        return Err(Error::Assembly("assemble_rhs needs homogeneous constraints".into()));
    }
    let comps = kernel.comps();
    let mut rhs = vec![0.0; dofs.n_free()];
    for_each_local(mesh, kernel, false, |l| {
        for (k, &a) in l.nodes.iter().enumerate() {
            for c in 0..comps {
                if let Some(i) = dofs.free_index(a * comps + c) {
                    rhs[i] += l.fe[k * comps + c];
                }
            }
        }
    })?;
    if let Kernel::Elasticity(el) = kernel {
        spring_terms(el, |node, _, f| {
            for (i, fi) in f.iter().enumerate() {
                if let Some(j) = dofs.free_index(node * 3 + i) {
                    rhs[j] += fi;
                }
            }
        });
    }
    Ok(rhs)
}

/// `K u - f` over every dof of the unconstrained operator, evaluated element
/// by element. Nonzero entries at constrained dofs are the reactions.
pub fn residual(mesh: &Mesh, kernel: &Kernel, full: &[f64]) -> Result<Vec<f64>> {
    let comps = kernel.comps();
    let mut r = vec![0.0; mesh.n_nodes() * comps];
    let mut gdofs: Vec<usize> = Vec::new();
    for_each_local(mesh, kernel, true, |l| {
        gdofs.clear();
        for &a in &l.nodes {
            for c in 0..comps {
                gdofs.push(a * comps + c);
            }
        }
        let m = gdofs.len();
        for (row, &gr) in gdofs.iter().enumerate() {
            let mut s = -l.fe[row];
            for (col, &gc) in gdofs.iter().enumerate() {
                s += l.ke[row * m + col] * full[gc];
            }
            r[gr] += s;
        }
    })?;
    if let Kernel::Elasticity(el) = kernel {
        spring_terms(el, |node, k, f| {
            for i in 0..3 {
                let mut s = -f[i];
                for j in 0..3 {
                    s += k[i][j] * full[node * 3 + j];
                }
                r[node * 3 + i] += s;
            }
        });
    }
    Ok(r)
}

/// Stress (xx, yy, zz, yz, xz, xy) at the Gauss points of element `e`.
pub fn element_stresses(
    mesh: &Mesh,
    e: usize,
    props: ElasticProps,
    displacement: &[f64],
    temperature_rise: Option<&[f64]>,
) -> Result<Vec<[f64; 6]>> {
    let reference = ReferenceHex::new(mesh.order);
    let geo = element_geometry(&reference, &mesh.element_coords(e))?;
    let nodes = mesh.element(e);
    let mut out = Vec::with_capacity(geo.len());
    for (q, g) in geo.iter().enumerate() {
        let mut grad = [[0.0; 3]; 3];
        for (a, &node) in nodes.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    grad[i][j] += displacement[node * 3 + i] * g.gradients[a][j];
                }
            }
        }
        let theta = temperature_rise.map_or(0.0, |t| {
            reference.values[q].iter().zip(nodes).map(|(v, &a)| v * t[a]).sum()
        });
        let tr = grad[0][0] + grad[1][1] + grad[2][2];
        let iso = p_iso(props, tr, theta);
        out.push([
            iso + 2.0 * props.mu * grad[0][0],
            iso + 2.0 * props.mu * grad[1][1],
            iso + 2.0 * props.mu * grad[2][2],
            props.mu * (grad[1][2] + grad[2][1]),
            props.mu * (grad[0][2] + grad[2][0]),
            props.mu * (grad[0][1] + grad[1][0]),
        ]);
    }
    Ok(out)
}

fn p_iso(p: ElasticProps, trace: f64, theta: f64) -> f64 {
    p.lambda * trace - p.thermal_modulus() * theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::LayerRole;
    use crate::fem::shape::ElementOrder;
    use crate::mesh::{generate_block_mesh, BlockModel, MeshSettings, Region};

    fn region() -> Region {
        Region {
            material: "M".into(),
            role: LayerRole::StructuralPolymer,
        }
    }

    fn cube_mesh(size: [f64; 3], res: f64, order: ElementOrder) -> Mesh {
        generate_block_mesh(&BlockModel::brick(size, region()), &MeshSettings::new(res, order)).unwrap()
    }

    fn plane_constraints(mesh: &Mesh, axis: usize, lo: f64, hi: f64) -> Vec<(usize, f64)> {
        let mut c = Vec::new();
        for (a, p) in mesh.nodes.iter().enumerate() {
            if p[axis].abs() < 1e-12 {
                c.push((a, lo));
            } else if (p[axis] - 1.0).abs() < 1e-12 {
                c.push((a, hi));
            }
        }
        c
    }

    #[test]
    fn single_cube_conducts_unit_flux() {
        for order in [ElementOrder::Linear, ElementOrder::Quadratic] {
            let mesh = cube_mesh([1.0; 3], 1.0, order);
            let cons = plane_constraints(&mesh, 0, 0.0, 1.0);
            let dofs = DofMap::new(mesh.n_nodes(), 1, None, &cons).unwrap();
            let coef = [Some(1.0)];
            let kernel = Kernel::Conduction(Conduction {
                coefficient: &coef,
                elements: None,
                source: None,
                robin: None,
            });
            let sys = assemble(&mesh, &kernel, &dofs).unwrap();
            let full = if sys.dofs.n_free() > 0 {
                dofs.expand(&solve_spd(&sys, 1e-12).unwrap())
            } else {
                dofs.expand(&[])
            };
            let r = residual(&mesh, &kernel, &full).unwrap();
            let inflow: f64 = (0..mesh.n_nodes()).filter(|&a| mesh.nodes[a][0] > 0.5).map(|a| r[a]).sum();
            assert!((inflow - 1.0).abs() < 1e-12, "{order:?}: {inflow}");
        }
    }

    #[test]
    fn missing_region_coefficient_is_named() {
        let mesh = cube_mesh([1.0; 3], 1.0, ElementOrder::Linear);
        let dofs = DofMap::new(mesh.n_nodes(), 1, None, &[(0, 0.0)]).unwrap();
        let kernel = Kernel::Conduction(Conduction {
            coefficient: &[None],
            elements: None,
            source: None,
            robin: None,
        });
        let err = assemble(&mesh, &kernel, &dofs).unwrap_err();
        assert!(err.to_string().contains("'M'"), "{err}");
    }

    #[test]
    fn conflicting_constraints_are_rejected() {
        assert!(DofMap::new(2, 1, None, &[(0, 1.0), (0, 2.0)]).is_err());
        assert!(DofMap::new(2, 1, Some(&[true, false]), &[(1, 0.0)]).is_err());
        let d = DofMap::new(3, 1, Some(&[true, false, true]), &[(0, 4.0)]).unwrap();
        assert_eq!(d.n_free(), 1);
        assert_eq!(d.expand(&[7.0]), vec![4.0, 0.0, 7.0]);
    }

    #[test]
    fn elasticity_matrix_is_bitwise_symmetric() {
        let mesh = cube_mesh([2.0, 1.0, 1.0], 0.5, ElementOrder::Quadratic);
        let dofs = DofMap::new(mesh.n_nodes(), 3, None, &[(0, 0.0), (1, 0.0), (2, 0.0)]).unwrap();
        let mats = [Some(ElasticProps::from_engineering(4.95e3, 0.22, 5.2e-5))];
        let sys = assemble(
            &mesh,
            &Kernel::Elasticity(Elasticity {
                materials: &mats,
                temperature_rise: None,
                springs: &[],
            }),
            &dofs,
        )
        .unwrap();
        assert_eq!(sys.matrix.symmetry_error(), 0.0);
    }
}
