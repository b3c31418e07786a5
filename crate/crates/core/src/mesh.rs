//! Structured hexahedral meshing of rectilinear block models.
//!
//! A [`BlockModel`] is a list of axis-aligned boxes, each carrying a material
//! region and a part label. All block faces become planes of one global
//! tensor-product grid, so the mesh conforms across blocks by construction.
//! Where blocks overlap the later one owns the cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::design::{ArmSide, GripperDesign, LayerRole, Polarity, Rect};
use crate::error::{Error, Result};
use crate::fem::element::{jacobian_determinants, ReferenceHex};
use crate::fem::shape::{face_local_nodes, ElementOrder, Face};

const TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub material: String,
    pub role: LayerRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartInfo {
    pub name: String,
    /// Released (movable) rather than anchored.
    pub free: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub region: usize,
    pub part: usize,
}

impl Block {
    pub fn new(rect: Rect, z0: f64, z1: f64, region: usize, part: usize) -> Block {
        Block {
            lo: [rect.x0, rect.y0, z0],
            hi: [rect.x1, rect.y1, z1],
            region,
            part,
        }
    }

    pub fn from_bounds(lo: [f64; 3], hi: [f64; 3], region: usize, part: usize) -> Block {
        Block { lo, hi, region, part }
    }
}

/// Axis-aligned planar window: the plane `x[axis] = coord` restricted to
/// `lo..hi` over the two tangent axes (ascending axis order). `positive`
/// is the side the outward normal must point to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceSelector {
    pub axis: usize,
    pub positive: bool,
    pub coord: f64,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl FaceSelector {
    fn matches(&self, face: Face, centroid: [f64; 3]) -> bool {
        if face.axis != self.axis || face.positive != self.positive {
            return false;
        }
        if (centroid[self.axis] - self.coord).abs() > TOL {
            return false;
        }
        let (u, v) = face.tangent_axes();
        within(centroid[u], self.lo[0], self.hi[0]) && within(centroid[v], self.lo[1], self.hi[1])
    }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo - TOL && x <= hi + TOL
}

/// Box in which boundary facets of conductor elements become a terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSpec {
    pub id: String,
    pub arm: ArmSide,
    pub polarity: Polarity,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipSpec {
    pub side: ArmSide,
    pub selector: FaceSelector,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockModel {
    pub regions: Vec<Region>,
    pub parts: Vec<PartInfo>,
    pub blocks: Vec<Block>,
    pub fixed: Vec<FaceSelector>,
    pub terminals: Vec<TerminalSpec>,
    pub tips: Vec<TipSpec>,
    pub midline: Option<f64>,
}

impl BlockModel {
    /// Index of `region`, adding it if new.
    pub fn region(&mut self, region: Region) -> usize {
        match self.regions.iter().position(|r| *r == region) {
            Some(i) => i,
            None => {
                self.regions.push(region);
                self.regions.len() - 1
            }
        }
    }

    pub fn part(&mut self, part: PartInfo) -> usize {
        match self.parts.iter().position(|p| *p == part) {
            Some(i) => i,
            None => {
                self.parts.push(part);
                self.parts.len() - 1
            }
        }
    }

    /// One brick `[0, size]` of a single region, not anchored anywhere.
    pub fn brick(size: [f64; 3], region: Region) -> BlockModel {
        let mut m = BlockModel::default();
        let r = m.region(region);
        let p = m.part(PartInfo {
            name: "body".into(),
            free: true,
        });
        m.blocks.push(Block::from_bounds([0.0; 3], size, r, p));
        m
    }

    /// Brick anchored on its `z = 0` face.
    pub fn anchored_brick(size: [f64; 3], region: Region) -> BlockModel {
        let mut m = BlockModel::brick(size, region);
        m.fixed.push(FaceSelector {
            axis: 2,
            positive: false,
            coord: 0.0,
            lo: [0.0, 0.0],
            hi: [size[0], size[1]],
        });
        m
    }

    /// Straight bar along x with its `x = 0` end anchored.
    pub fn anchored_rod(length: f64, width: f64, height: f64, region: Region) -> BlockModel {
        let mut m = BlockModel::brick([length, width, height], region);
        m.fixed.push(FaceSelector {
            axis: 0,
            positive: false,
            coord: 0.0,
            lo: [0.0, 0.0],
            hi: [width, height],
        });
        m
    }

    /// Straight bar along x with a terminal on each end face (supply at
    /// x = 0).
    pub fn rod(length: f64, width: f64, height: f64, region: Region) -> BlockModel {
        let mut m = BlockModel::brick([length, width, height], region);
        for (id, x, polarity) in [("supply", 0.0, Polarity::Supply), ("return", length, Polarity::Return)] {
            m.terminals.push(TerminalSpec {
                id: id.into(),
                arm: ArmSide::Left,
                polarity,
                lo: [x, 0.0, 0.0],
                hi: [x, width, height],
            });
        }
        m
    }

    /// Two-layer cantilever along x, clamped on its `x = 0` face.
    pub fn bilayer_cantilever(
        length: f64,
        width: f64,
        bottom: (Region, f64),
        top: (Region, f64),
    ) -> BlockModel {
        let mut m = BlockModel::default();
        let p = m.part(PartInfo {
            name: "beam".into(),
            free: true,
        });
        let rb = m.region(bottom.0);
        let rt = m.region(top.0);
        let h = bottom.1 + top.1;
        m.blocks.push(Block::from_bounds([0.0; 3], [length, width, bottom.1], rb, p));
        m.blocks.push(Block::from_bounds([0.0, 0.0, bottom.1], [length, width, h], rt, p));
        m.fixed.push(FaceSelector {
            axis: 0,
            positive: false,
            coord: 0.0,
            lo: [0.0, 0.0],
            hi: [width, h],
        });
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FacetTag {
    FixedBase,
    Convection,
    /// Index into [`Mesh::terminals`].
    Terminal(usize),
    Tip(ArmSide),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub element: usize,
    pub face: Face,
    /// Global node ids in face-local order.
    pub nodes: Vec<usize>,
    pub tag: FacetTag,
    pub centroid: [f64; 3],
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSettings {
    /// Target element edge length, um.
    pub resolution: f64,
    pub order: ElementOrder,
    /// Element size through the stack; defaults to `resolution`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thickness_resolution: Option<f64>,
}

impl Default for MeshSettings {
    fn default() -> Self {
        MeshSettings {
            resolution: 10.0,
            order: ElementOrder::Quadratic,
            thickness_resolution: None,
        }
    }
}

impl MeshSettings {
    pub fn new(resolution: f64, order: ElementOrder) -> Self {
        MeshSettings {
            resolution,
            order,
            thickness_resolution: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::Mesh(format!("resolution must be > 0 (got {})", self.resolution)));
        }
        if let Some(t) = self.thickness_resolution {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Mesh(format!("thickness_resolution must be > 0 (got {t})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub order: ElementOrder,
    pub nodes: Vec<[f64; 3]>,
    /// Flat connectivity, `order.nodes_per_element()` entries per element in
    /// lexicographic local order.
    pub connectivity: Vec<usize>,
    pub element_region: Vec<usize>,
    pub element_part: Vec<usize>,
    pub regions: Vec<Region>,
    pub parts: Vec<PartInfo>,
    pub facets: Vec<Facet>,
    pub terminals: Vec<TerminalSpec>,
    pub midline: Option<f64>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.element_region.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.order.nodes_per_element()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let n = self.nodes_per_element();
        &self.connectivity[e * n..(e + 1) * n]
    }

    pub fn element_coords(&self, e: usize) -> Vec<[f64; 3]> {
        self.element(e).iter().map(|&a| self.nodes[a]).collect()
    }

    pub fn facet_coords(&self, f: &Facet) -> Vec<[f64; 3]> {
        f.nodes.iter().map(|&a| self.nodes[a]).collect()
    }

    pub fn region_of(&self, e: usize) -> &Region {
        &self.regions[self.element_region[e]]
    }

    pub fn is_conductor(&self, e: usize) -> bool {
        self.region_of(e).role == LayerRole::Conductor
    }

    pub fn is_free(&self, e: usize) -> bool {
        self.parts[self.element_part[e]].free
    }

    pub fn facets_tagged(&self, pred: impl Fn(FacetTag) -> bool) -> impl Iterator<Item = &Facet> {
        self.facets.iter().filter(move |f| pred(f.tag))
    }

    pub fn tag_label(&self, tag: FacetTag) -> String {
        match tag {
            FacetTag::FixedBase => "fixed_base".into(),
            FacetTag::Convection => "convection".into(),
            FacetTag::Terminal(i) => format!("terminal:{}", self.terminals[i].id),
            FacetTag::Tip(side) => format!("tip:{}", side.label()),
        }
    }

    /// Nodes on facets with the given tag, sorted and unique.
    pub fn tagged_nodes(&self, pred: impl Fn(FacetTag) -> bool) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .facets_tagged(pred)
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Axis-aligned bounding box of the node cloud.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }
}

impl fmt::Display for FacetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FacetTag::FixedBase => f.write_str("fixed_base"),
            FacetTag::Convection => f.write_str("convection"),
            FacetTag::Terminal(i) => write!(f, "terminal:{i}"),
            FacetTag::Tip(side) => write!(f, "tip:{}", side.label()),
        }
    }
}

/// One grid axis: block breakpoints, their subdivision and lattice coords.
struct Axis {
    breaks: Vec<f64>,
    /// First cell of each breakpoint interval; last entry is the cell count.
    cell_start: Vec<usize>,
    lattice: Vec<f64>,
}

impl Axis {
    fn new(mut values: Vec<f64>, resolution: f64, degree: usize) -> Axis {
        values.sort_by(f64::total_cmp);
        let mut breaks: Vec<f64> = Vec::new();
        for v in values {
            if breaks.last().is_none_or(|&b| v - b > TOL) {
                breaks.push(v);
            }
        }
        let mut cell_start = vec![0];
        let mut lattice = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = (((b - a) / resolution) - 1e-9).ceil().max(1.0) as usize;
            let m = n * degree;
            for j in 0..m {
                lattice.push(a + (b - a) * (j as f64 / m as f64));
            }
            cell_start.push(cell_start.last().unwrap() + n);
        }
        lattice.push(*breaks.last().unwrap());
        Axis {
            breaks,
            cell_start,
            lattice,
        }
    }

    fn n_cells(&self) -> usize {
        *self.cell_start.last().unwrap()
    }

    fn break_index(&self, v: f64) -> usize {
        self.breaks
            .iter()
            .position(|&b| (b - v).abs() <= TOL)
            .expect("block bound is a breakpoint")
    }

    fn cell_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        self.cell_start[self.break_index(lo)]..self.cell_start[self.break_index(hi)]
    }
}

/// Meshes a gripper design.
pub fn generate_mesh(d: &GripperDesign, resolution: f64, order: ElementOrder) -> Result<Mesh> {
    generate_mesh_with(d, &MeshSettings::new(resolution, order))
}

pub fn generate_mesh_with(d: &GripperDesign, settings: &MeshSettings) -> Result<Mesh> {
    generate_block_mesh(&d.to_block_model()?, settings)
}

pub fn generate_block_mesh(model: &BlockModel, settings: &MeshSettings) -> Result<Mesh> {
    settings.validate()?;
    if model.blocks.is_empty() {
        return Err(Error::Geometry("block model is empty".into()));
    }
    let mut feature = f64::INFINITY;
    for (i, b) in model.blocks.iter().enumerate() {
        let d = [b.hi[0] - b.lo[0], b.hi[1] - b.lo[1], b.hi[2] - b.lo[2]];
        if d.iter().any(|x| !(*x > TOL)) {
            let part = model.parts.get(b.part).map_or("?", |p| p.name.as_str());
            return Err(Error::Geometry(format!("degenerate polygon in block {i} (part '{part}')")));
        }
        feature = feature.min(d[0].min(d[1]));
    }
    if settings.resolution > feature * (1.0 + 1e-9) {
        return Err(Error::Mesh(format!(
            "resolution {} um is coarser than the smallest feature ({feature} um); use resolution <= {feature}",
            settings.resolution
        )));
    }

    let p = settings.order.degree();
    let n1 = settings.order.nodes_1d();
    let axes: Vec<Axis> = (0..3)
        .map(|a| {
            let res = if a == 2 {
                settings.thickness_resolution.unwrap_or(settings.resolution)
            } else {
                settings.resolution
            };
            let vals = model.blocks.iter().flat_map(|b| [b.lo[a], b.hi[a]]).collect();
            Axis::new(vals, res, p)
        })
        .collect();
    let nc = [axes[0].n_cells(), axes[1].n_cells(), axes[2].n_cells()];
    let cell_id = |i: usize, j: usize, k: usize| i + nc[0] * (j + nc[1] * k);

    const EMPTY: u32 = u32::MAX;
    let mut owner = vec![EMPTY; nc[0] * nc[1] * nc[2]];
    for (bi, b) in model.blocks.iter().enumerate() {
        let rx = axes[0].cell_range(b.lo[0], b.hi[0]);
        let ry = axes[1].cell_range(b.lo[1], b.hi[1]);
        let rz = axes[2].cell_range(b.lo[2], b.hi[2]);
        for k in rz {
            for j in ry.clone() {
                for i in rx.clone() {
                    owner[cell_id(i, j, k)] = bi as u32;
                }
            }
        }
    }

    let nl = [axes[0].lattice.len(), axes[1].lattice.len(), axes[2].lattice.len()];
    let lat_id = |i: usize, j: usize, k: usize| i + nl[0] * (j + nl[1] * k);
    let mut cells = Vec::new();
    for k in 0..nc[2] {
        for j in 0..nc[1] {
            for i in 0..nc[0] {
                if owner[cell_id(i, j, k)] != EMPTY {
                    cells.push([i, j, k]);
                }
            }
        }
    }
    let local = |c: &[usize; 3], a: usize| -> usize {
        let (li, lj, lk) = (a % n1, (a / n1) % n1, a / (n1 * n1));
        lat_id(c[0] * p + li, c[1] * p + lj, c[2] * p + lk)
    };
    let npe = settings.order.nodes_per_element();
    let mut node_of = vec![usize::MAX; nl[0] * nl[1] * nl[2]];
    for c in &cells {
        for a in 0..npe {
            node_of[local(c, a)] = 0;
        }
    }
    let mut nodes = Vec::new();
    for k in 0..nl[2] {
        for j in 0..nl[1] {
            for i in 0..nl[0] {
                let id = lat_id(i, j, k);
                if node_of[id] == 0 {
                    node_of[id] = nodes.len();
                    nodes.push([axes[0].lattice[i], axes[1].lattice[j], axes[2].lattice[k]]);
                }
            }
        }
    }
    let mut connectivity = Vec::with_capacity(cells.len() * npe);
    let mut element_region = Vec::with_capacity(cells.len());
    let mut element_part = Vec::with_capacity(cells.len());
    for c in &cells {
        for a in 0..npe {
            connectivity.push(node_of[local(c, a)]);
        }
        let b = &model.blocks[owner[cell_id(c[0], c[1], c[2])] as usize];
        element_region.push(b.region);
        element_part.push(b.part);
    }

    let face_nodes: Vec<Vec<usize>> = Face::ALL
        .iter()
        .map(|&f| face_local_nodes(settings.order, f))
        .collect();
    let mut facets = Vec::new();
    for (e, c) in cells.iter().enumerate() {
        for (fi, &face) in Face::ALL.iter().enumerate() {
            let ax = face.axis;
            let neighbor_empty = if face.positive {
                c[ax] + 1 >= nc[ax] || {
                    let mut d = *c;
                    d[ax] += 1;
                    owner[cell_id(d[0], d[1], d[2])] == EMPTY
                }
            } else {
                c[ax] == 0 || {
                    let mut d = *c;
                    d[ax] -= 1;
                    owner[cell_id(d[0], d[1], d[2])] == EMPTY
                }
            };
            if !neighbor_empty {
                continue;
            }
            let ids: Vec<usize> = face_nodes[fi]
                .iter()
                .map(|&a| connectivity[e * npe + a])
                .collect();
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &id in &ids {
                for a in 0..3 {
                    lo[a] = lo[a].min(nodes[id][a]);
                    hi[a] = hi[a].max(nodes[id][a]);
                }
            }
            let centroid = [
                0.5 * (lo[0] + hi[0]),
                0.5 * (lo[1] + hi[1]),
                0.5 * (lo[2] + hi[2]),
            ];
            let (u, v) = face.tangent_axes();
            let area = (hi[u] - lo[u]) * (hi[v] - lo[v]);
            let region = &model.regions[element_region[e]];
            let tag = classify(model, region, face, centroid);
            facets.push(Facet {
                element: e,
                face,
                nodes: ids,
                tag,
                centroid,
                area,
            });
        }
    }

    let mesh = Mesh {
        order: settings.order,
        nodes,
        connectivity,
        element_region,
        element_part,
        regions: model.regions.clone(),
        parts: model.parts.clone(),
        facets,
        terminals: model.terminals.clone(),
        midline: model.midline,
    };
    if !mesh.terminals.is_empty() {
        check_conductor_topology(&mesh)?;
    }
    Ok(mesh)
}

fn classify(model: &BlockModel, region: &Region, face: Face, centroid: [f64; 3]) -> FacetTag {
    if model.fixed.iter().any(|s| s.matches(face, centroid)) {
        return FacetTag::FixedBase;
    }
    if region.role == LayerRole::Conductor {
        for (i, t) in model.terminals.iter().enumerate() {
            if (0..3).all(|a| within(centroid[a], t.lo[a], t.hi[a])) {
                return FacetTag::Terminal(i);
            }
        }
    }
    for tip in &model.tips {
        if tip.selector.matches(face, centroid) {
            return FacetTag::Tip(tip.side);
        }
    }
    FacetTag::Convection
}

/// Connected components of the conductor elements (sharing any node).
/// Returns the component id per node, `usize::MAX` off the conductor.
pub fn conductor_components(mesh: &Mesh) -> (Vec<usize>, usize) {
    let n = mesh.n_nodes();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut on = vec![false; n];
    for e in 0..mesh.n_elements() {
        if !mesh.is_conductor(e) {
            continue;
        }
        let nodes = mesh.element(e);
        for &a in nodes {
            on[a] = true;
        }
        let r0 = find(&mut parent, nodes[0]);
        for &a in &nodes[1..] {
            let r = find(&mut parent, a);
            if r != r0 {
                let (lo, hi) = (r.min(r0), r.max(r0));
                parent[hi] = lo;
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut ids = BTreeMap::new();
    for a in 0..n {
        if on[a] {
            let r = find(&mut parent, a);
            let next = ids.len();
            comp[a] = *ids.entry(r).or_insert(next);
        }
    }
    (comp, ids.len())
}

/// Every conductor component must touch a supply and a return terminal, and
/// every terminal must be present in the mesh.
pub fn check_conductor_topology(mesh: &Mesh) -> Result<()> {
    let (comp, ncomp) = conductor_components(mesh);
    if ncomp == 0 {
        return Err(Error::Topology("mesh has no conductor elements".into()));
    }
    let mut supply = vec![false; ncomp];
    let mut ret = vec![false; ncomp];
    let mut seen = vec![false; mesh.terminals.len()];
    for f in &mesh.facets {
        if let FacetTag::Terminal(t) = f.tag {
            seen[t] = true;
            let c = comp[f.nodes[0]];
            match mesh.terminals[t].polarity {
                Polarity::Supply => supply[c] = true,
                Polarity::Return => ret[c] = true,
            }
        }
    }
    if let Some(t) = seen.iter().position(|s| !s) {
        return Err(Error::Topology(format!(
            "terminal '{}' has no conductor facets",
            mesh.terminals[t].id
        )));
    }
    for c in 0..ncomp {
        if !(supply[c] && ret[c]) {
            return Err(Error::Topology(format!(
                "disconnected conductor: component {c} of {ncomp} does not connect a supply and a return terminal"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshQuality {
    pub min_jacobian: f64,
    pub element_count: usize,
    pub node_count: usize,
    /// Summed facet area per tag label, um^2.
    pub tag_areas: BTreeMap<String, f64>,
}

pub fn mesh_quality(m: &Mesh) -> MeshQuality {
    let reference = ReferenceHex::new(m.order);
    let mut min_jacobian = f64::INFINITY;
    for e in 0..m.n_elements() {
        for d in jacobian_determinants(&reference, &m.element_coords(e)) {
            min_jacobian = min_jacobian.min(d);
        }
    }
    let mut tag_areas = BTreeMap::new();
    for f in &m.facets {
        *tag_areas.entry(m.tag_label(f.tag)).or_insert(0.0) += f.area;
    }
    MeshQuality {
        min_jacobian,
        element_count: m.n_elements(),
        node_count: m.n_nodes(),
        tag_areas,
    }
}
