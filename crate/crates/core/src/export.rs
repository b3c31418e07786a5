//! Legacy ASCII VTK and CSV output, plus a standalone VTK reader used to
//! check what was written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::element::{element_geometry, ReferenceHex};
use crate::fem::ElementOrder;
use crate::mesh::Mesh;
use crate::physics::Solution;
use crate::studies::{RequiredVoltage, SweepRecord, CSV_HEADER};

const VTK_HEXAHEDRON: u8 = 12;
const VTK_TRIQUADRATIC_HEXAHEDRON: u8 = 29;

/// Position in our lexicographic element numbering of each VTK local node.
fn vtk_order(order: ElementOrder) -> Vec<usize> {
    match order {
        ElementOrder::Linear => vec![0, 1, 3, 2, 4, 5, 7, 6],
        ElementOrder::Quadratic => {
            let ijk: [(usize, usize, usize); 27] = [
                (0, 0, 0), (2, 0, 0), (2, 2, 0), (0, 2, 0),
                (0, 0, 2), (2, 0, 2), (2, 2, 2), (0, 2, 2),
                (1, 0, 0), (2, 1, 0), (1, 2, 0), (0, 1, 0),
                (1, 0, 2), (2, 1, 2), (1, 2, 2), (0, 1, 2),
                (0, 0, 1), (2, 0, 1), (2, 2, 1), (0, 2, 1),
                (0, 1, 1), (2, 1, 1), (1, 0, 1), (1, 2, 1), (1, 1, 0), (1, 1, 2),
                (1, 1, 1),
            ];
            ijk.iter().map(|&(i, j, k)| i + 3 * j + 9 * k).collect()
        }
    }
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.8e}");
}

/// Nodal fields to export. Any field may be absent (written as zeros).
pub struct VtkFields<'a> {
    pub voltage: Option<&'a [f64]>,
    pub temperature: Option<&'a [f64]>,
    pub displacement: Option<&'a [f64]>,
    /// Per-element Joule density, pW/um^3.
    pub joule_density: Option<Vec<f64>>,
}

impl<'a> VtkFields<'a> {
    pub fn empty() -> VtkFields<'a> {
        VtkFields {
            voltage: None,
            temperature: None,
            displacement: None,
            joule_density: None,
        }
    }

    pub fn from_solution(mesh: &Mesh, s: &'a Solution) -> Result<VtkFields<'a>> {
        let reference = ReferenceHex::new(mesh.order);
        let nq = s.joule.points_per_element;
        let mut density = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let values = &s.joule.values[e * nq..(e + 1) * nq];
            if values.iter().all(|v| *v == 0.0) {
                density.push(0.0);
                continue;
            }
            let geo = element_geometry(&reference, &mesh.element_coords(e))?;
            let (mut q, mut v) = (0.0, 0.0);
            for (g, val) in geo.iter().zip(values) {
                q += val * g.dv;
                v += g.dv;
            }
            density.push(q / v);
        }
        Ok(VtkFields {
            voltage: Some(&s.voltage),
            temperature: Some(&s.temperature),
            displacement: Some(&s.displacement),
            joule_density: Some(density),
        })
    }
}

/// Material names in id order.
pub fn material_ids(mesh: &Mesh) -> Vec<String> {
    let mut names: Vec<String> = mesh.regions.iter().map(|r| r.material.clone()).collect();
    names.sort();
    names.dedup();
    names
}

/// Legacy ASCII unstructured grid with 9 significant digits.
pub fn vtk_string(mesh: &Mesh, fields: &VtkFields) -> Result<String> {
    let n = mesh.n_nodes();
    let ne = mesh.n_elements();
    let check = |name: &str, len: Option<usize>, want: usize| -> Result<()> {
        match len {
            Some(l) if l != want => Err(Error::Domain(format!("{name} has {l} values for {want} slots"))),
            _ => Ok(()),
        }
    };
    check("voltage", fields.voltage.map(|v| v.len()), n)?;
    check("temperature", fields.temperature.map(|v| v.len()), n)?;
    check("displacement", fields.displacement.map(|v| v.len()), 3 * n)?;
    check("joule_density", fields.joule_density.as_ref().map(|v| v.len()), ne)?;

    let names = material_ids(mesh);
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let legend: Vec<String> = names.iter().enumerate().map(|(i, m)| format!("{i}={m}")).collect();
    let _ = writeln!(out, "microgrip material ids {}", legend.join(" "));
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {n} double");
    for p in &mesh.nodes {
        num(&mut out, p[0]);
        out.push(' ');
        num(&mut out, p[1]);
        out.push(' ');
        num(&mut out, p[2]);
        out.push('\n');
    }
    let npe = mesh.nodes_per_element();
    let perm = vtk_order(mesh.order);
    let _ = writeln!(out, "CELLS {ne} {}", ne * (npe + 1));
    for e in 0..ne {
        let nodes = mesh.element(e);
        let _ = write!(out, "{npe}");
        for &k in &perm {
            let _ = write!(out, " {}", nodes[k]);
        }
        out.push('\n');
    }
    let cell_type = match mesh.order {
        ElementOrder::Linear => VTK_HEXAHEDRON,
        ElementOrder::Quadratic => VTK_TRIQUADRATIC_HEXAHEDRON,
    };
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(out, "{cell_type}");
    }

    let _ = writeln!(out, "POINT_DATA {n}");
    for (name, values) in [("voltage", fields.voltage), ("temperature", fields.temperature)] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for a in 0..n {
            num(&mut out, values.map_or(0.0, |v| v[a]));
            out.push('\n');
        }
    }
    out.push_str("VECTORS displacement double\n");
    for a in 0..n {
        for k in 0..3 {
            if k > 0 {
                out.push(' ');
            }
            num(&mut out, fields.displacement.map_or(0.0, |u| u[3 * a + k]));
        }
        out.push('\n');
    }

    let _ = writeln!(out, "CELL_DATA {ne}");
    out.push_str("SCALARS material_id int 1\nLOOKUP_TABLE default\n");
    for e in 0..ne {
        let m = &mesh.regions[mesh.element_region[e]].material;
        let id = names.iter().position(|x| x == m).unwrap_or(0);
        let _ = writeln!(out, "{id}");
    }
    out.push_str("SCALARS joule_density double 1\nLOOKUP_TABLE default\n");
    for e in 0..ne {
        num(&mut out, fields.joule_density.as_ref().map_or(0.0, |v| v[e]));
        out.push('\n');
    }
    Ok(out)
}

pub fn export_vtk(mesh: &Mesh, fields: &VtkFields, path: &Path) -> Result<()> {
    let text = vtk_string(mesh, fields)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkFile {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_scalars: BTreeMap<String, Vec<f64>>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 3]>>,
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
}

struct Tokens<'a> {
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    pending: std::collections::VecDeque<(usize, &'a str)>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        loop {
            if let Some(t) = self.pending.pop_front() {
                return Some(t);
            }
            let (i, line) = self.iter.next()?;
            self.pending.extend(line.split_whitespace().map(|t| (i + 1, t)));
        }
    }

    fn word(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| Error::Parse(format!("unexpected end of file, expected {what}")))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (line, t) = self.word(what)?;
        t.parse()
            .map_err(|_| Error::Parse(format!("line {line}: expected {what}, found '{t}'")))
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let (line, t) = self.word(keyword)?;
        if t.eq_ignore_ascii_case(keyword) {
            Ok(())
        } else {
            Err(Error::Parse(format!("line {line}: expected {keyword}, found '{t}'")))
        }
    }
}

/// Largest count the reader accepts from a header, against hostile input.
const MAX_COUNT: usize = 50_000_000;

fn count(t: &mut Tokens, what: &str) -> Result<usize> {
    let n: usize = t.number(what)?;
    if n > MAX_COUNT {
        return Err(Error::Parse(format!("{what} {n} is implausibly large")));
    }
    Ok(n)
}

/// Reads the subset of legacy ASCII VTK that [`vtk_string`] writes:
/// an unstructured grid with SCALARS and VECTORS sections.
pub fn parse_vtk(text: &str) -> Result<VtkFile> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    if !first.starts_with("# vtk DataFile") {
        return Err(Error::Parse("missing '# vtk DataFile' header".into()));
    }
    lines.next();
    let rest_start = text
        .match_indices('\n')
        .nth(1)
        .map(|(i, _)| i + 1)
        .unwrap_or(text.len());
    let mut t = Tokens {
        iter: text[rest_start..].lines().enumerate().peekable(),
        pending: Default::default(),
    };
    t.expect("ASCII")?;
    t.expect("DATASET")?;
    t.expect("UNSTRUCTURED_GRID")?;
    let mut f = VtkFile::default();
    // 0: none yet, 1: point data, 2: cell data
    let mut section = 0;
    while let Some((line, kw)) = t.next() {
        match kw.to_ascii_uppercase().as_str() {
            "POINTS" => {
                let n = count(&mut t, "point count")?;
                t.word("point type")?;
                for _ in 0..n {
                    f.points.push([t.number("x")?, t.number("y")?, t.number("z")?]);
                }
            }
            "CELLS" => {
                let n = count(&mut t, "cell count")?;
                let total = count(&mut t, "cell list size")?;
                let mut used = 0;
                for _ in 0..n {
                    let k = count(&mut t, "cell size")?;
                    used += k + 1;
                    if used > total {
                        return Err(Error::Parse(format!("line {line}: cell list exceeds its declared size")));
                    }
                    let mut ids = Vec::with_capacity(k.min(64));
                    for _ in 0..k {
                        let id: usize = t.number("point index")?;
                        if id >= f.points.len() {
                            return Err(Error::Parse(format!("point index {id} out of range")));
                        }
                        ids.push(id);
                    }
                    f.cells.push(ids);
                }
            }
            "CELL_TYPES" => {
                let n = count(&mut t, "cell type count")?;
                for _ in 0..n {
                    f.cell_types.push(t.number("cell type")?);
                }
            }
            "POINT_DATA" => {
                let n = count(&mut t, "point data count")?;
                if n != f.points.len() {
                    return Err(Error::Parse(format!("POINT_DATA {n} does not match {} points", f.points.len())));
                }
                section = 1;
            }
            "CELL_DATA" => {
                let n = count(&mut t, "cell data count")?;
                if n != f.cells.len() {
                    return Err(Error::Parse(format!("CELL_DATA {n} does not match {} cells", f.cells.len())));
                }
                section = 2;
            }
            "SCALARS" => {
                let (_, name) = t.word("field name")?;
                t.word("field type")?;
                let (_, next) = t.word("LOOKUP_TABLE or component count")?;
                if next.eq_ignore_ascii_case("LOOKUP_TABLE") {
                    t.word("table name")?;
                } else {
                    t.expect("LOOKUP_TABLE")?;
                    t.word("table name")?;
                }
                let n = match section {
                    1 => f.points.len(),
                    2 => f.cells.len(),
                    _ => return Err(Error::Parse(format!("line {line}: SCALARS before POINT_DATA/CELL_DATA"))),
                };
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(t.number("value")?);
                }
                let map = if section == 1 { &mut f.point_scalars } else { &mut f.cell_scalars };
                map.insert(name.to_string(), v);
            }
            "VECTORS" => {
                let (_, name) = t.word("field name")?;
                t.word("field type")?;
                if section != 1 {
                    return Err(Error::Parse(format!("line {line}: VECTORS outside POINT_DATA")));
                }
                let mut v = Vec::with_capacity(f.points.len());
                for _ in 0..f.points.len() {
                    v.push([t.number("x")?, t.number("y")?, t.number("z")?]);
                }
                f.point_vectors.insert(name.to_string(), v);
            }
            other => return Err(Error::Parse(format!("line {line}: unexpected '{other}'"))),
        }
    }
    if f.cell_types.len() != f.cells.len() {
        return Err(Error::Parse(format!(
            "{} cell types for {} cells",
            f.cell_types.len(),
            f.cells.len()
        )));
    }
    Ok(f)
}

pub fn csv_string(records: &[SweepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub const REQUIRED_VOLTAGE_HEADER: &str = "h_W_per_m2K,target_closure_um,voltage_V,achieved_closure_um";

/// Required-voltage table; unreachable targets leave the voltage blank.
pub fn required_voltage_csv(rows: &[RequiredVoltage]) -> String {
    let opt = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from(REQUIRED_VOLTAGE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.convection_coefficient,
            r.target_closure,
            opt(r.voltage),
            opt(r.achieved_closure)
        );
    }
    s
}

pub fn export_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(records)).map_err(|e| Error::io(path, e))
}
