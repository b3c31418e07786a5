//! Checks shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use microgrip::design::{GripperDesign, LayerRole};
use microgrip::fem::assemble::{assemble, element_stresses, Conduction, DofMap, ElasticProps, Elasticity, Kernel, QpField};
use microgrip::fem::element::{element_geometry, ReferenceHex};
use microgrip::fem::{ElementOrder, SolveOptions};
use microgrip::materials::{Environment, MaterialLibrary};
use microgrip::mesh::{generate_block_mesh, BlockModel, Mesh, MeshSettings, Region};
use microgrip::studies::{calibrate_conductivity, StudySettings};

pub fn region() -> Region {
    Region {
        material: "M".into(),
        role: LayerRole::StructuralPolymer,
    }
}

pub fn brick(size: f64, resolution: f64, order: ElementOrder) -> Mesh {
    generate_block_mesh(&BlockModel::brick([size; 3], region()), &MeshSettings::new(resolution, order)).unwrap()
}

/// 2x2x2 elements on [0, 2]^3 with the shared centre vertex pulled off
/// centre. The map is trilinear inside each element, so edges stay straight.
pub fn patch_mesh(order: ElementOrder) -> Mesh {
    let mut m = brick(2.0, 1.0, order);
    let shift = [0.13, -0.07, 0.09];
    for p in &mut m.nodes {
        let hat: f64 = p.iter().map(|x| (1.0 - (x - 1.0).abs()).max(0.0)).product();
        for k in 0..3 {
            p[k] += shift[k] * hat;
        }
    }
    m
}

fn on_boundary(p: &[f64; 3], size: f64) -> bool {
    p.iter().any(|x| x.abs() < 1e-12 || (x - size).abs() < 1e-12)
}

fn tight() -> SolveOptions {
    SolveOptions {
        rel_tol: 1e-13,
        ..SolveOptions::default()
    }
}

/// Largest nodal error of u = 1 + 2x - 3y + 0.5z with its boundary values
/// prescribed, relative to the largest |u|.
pub fn conduction_patch_error(order: ElementOrder) -> f64 {
    let m = patch_mesh(order);
    let exact = |p: &[f64; 3]| 1.0 + 2.0 * p[0] - 3.0 * p[1] + 0.5 * p[2];
    let fixed: Vec<(usize, f64)> = m
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| on_boundary(p, 2.0))
        .map(|(a, p)| (a, exact(p)))
        .collect();
    let dofs = DofMap::new(m.n_nodes(), 1, None, &fixed).unwrap();
    let coef = [Some(1.7)];
    let kernel = Kernel::Conduction(Conduction {
        coefficient: &coef,
        elements: None,
        source: None,
        robin: None,
    });
    let sys = assemble(&m, &kernel, &dofs).unwrap();
    let u = dofs.expand(&sys.solve(&tight()).unwrap());
    let scale = m.nodes.iter().map(|p| exact(p).abs()).fold(0.0, f64::max);
    m.nodes.iter().zip(&u).map(|(p, v)| (v - exact(p)).abs()).fold(0.0, f64::max) / scale
}

/// Largest deviation of any Gauss-point stress component from the exact
/// uniform stress of an affine displacement, relative to the largest
/// exact component.
pub fn elasticity_patch_error(order: ElementOrder) -> f64 {
    let m = patch_mesh(order);
    let grad = [[1e-3, 2e-4, -1e-4], [3e-4, -5e-4, 2e-4], [-2e-4, 1e-4, 7e-4]];
    let exact = |p: &[f64; 3], i: usize| 0.01 * i as f64 + (0..3).map(|j| grad[i][j] * p[j]).sum::<f64>();
    let mut fixed = Vec::new();
    for (a, p) in m.nodes.iter().enumerate() {
        if on_boundary(p, 2.0) {
            for i in 0..3 {
                fixed.push((3 * a + i, exact(p, i)));
            }
        }
    }
    let props = ElasticProps::from_engineering(2000.0, 0.3, 0.0);
    let mats = [Some(props)];
    let kernel = Kernel::Elasticity(Elasticity {
        materials: &mats,
        temperature_rise: None,
        springs: &[],
    });
    let dofs = DofMap::new(m.n_nodes(), 3, None, &fixed).unwrap();
    let sys = assemble(&m, &kernel, &dofs).unwrap();
    let u = dofs.expand(&sys.solve(&tight()).unwrap());

    let tr = grad[0][0] + grad[1][1] + grad[2][2];
    let s = |i: usize, j: usize| {
        let sym = props.mu * (grad[i][j] + grad[j][i]);
        if i == j {
            props.lambda * tr + sym
        } else {
            sym
        }
    };
    let want = [s(0, 0), s(1, 1), s(2, 2), s(1, 2), s(0, 2), s(0, 1)];
    let scale = want.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut worst = 0.0f64;
    for e in 0..m.n_elements() {
        for sigma in element_stresses(&m, e, props, &u, None).unwrap() {
            for k in 0..6 {
                worst = worst.max((sigma[k] - want[k]).abs() / scale);
            }
        }
    }
    worst
}

/// L2 error of -lap u = 3 pi^2 u on the unit cube with
/// u = sin(pi x) sin(pi y) sin(pi z) and zero boundary values, at
/// `cells` elements per edge.
pub fn manufactured_l2_error(order: ElementOrder, cells: usize) -> f64 {
    let m = brick(1.0, 1.0 / cells as f64, order);
    let u_exact = |p: [f64; 3]| (PI * p[0]).sin() * (PI * p[1]).sin() * (PI * p[2]).sin();
    let at = |reference: &ReferenceHex, coords: &[[f64; 3]], q: usize| {
        let mut x = [0.0; 3];
        for (v, c) in reference.values[q].iter().zip(coords) {
            for k in 0..3 {
                x[k] += v * c[k];
            }
        }
        x
    };

    let reference = ReferenceHex::new(order);
    let nq = reference.n_points();
    let mut source = QpField::zeros(m.n_elements(), nq);
    for e in 0..m.n_elements() {
        let coords = m.element_coords(e);
        for q in 0..nq {
            source.values[e * nq + q] = 3.0 * PI * PI * u_exact(at(&reference, &coords, q));
        }
    }
    let fixed: Vec<(usize, f64)> = m
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| on_boundary(p, 1.0))
        .map(|(a, _)| (a, 0.0))
        .collect();
    let dofs = DofMap::new(m.n_nodes(), 1, None, &fixed).unwrap();
    let coef = [Some(1.0)];
    let kernel = Kernel::Conduction(Conduction {
        coefficient: &coef,
        elements: None,
        source: Some(&source),
        robin: None,
    });
    let sys = assemble(&m, &kernel, &dofs).unwrap();
    let u = dofs.expand(&sys.solve(&SolveOptions::default()).unwrap());

    let fine = ReferenceHex::with_points(order, 5);
    let mut err2 = 0.0;
    for e in 0..m.n_elements() {
        let coords = m.element_coords(e);
        let nodes = m.element(e);
        let geo = element_geometry(&fine, &coords).unwrap();
        for (q, g) in geo.iter().enumerate() {
            let uh: f64 = fine.values[q].iter().zip(nodes).map(|(v, &a)| v * u[a]).sum();
            err2 += (uh - u_exact(at(&fine, &coords, q))).powi(2) * g.dv;
        }
    }
    err2.sqrt()
}

/// Closure target of the calibration: Model 1's tip gap at 0.25 V in air.
pub const CALIBRATION_GAP: f64 = 4.0;
pub const OPERATING_VOLTAGE: f64 = 0.25;
pub const OBJECT_DIAMETER: f64 = 5.0;

pub fn desk_settings() -> StudySettings {
    StudySettings::default()
}

/// Built-in materials with the metal conductivity that brings Model 1 to
/// the calibration gap, and that conductivity.
pub fn calibrated_library(settings: &StudySettings) -> (MaterialLibrary, f64) {
    let m1 = microgrip::design::build_model1(None).unwrap();
    let sigma = calibrate_conductivity(&m1, CALIBRATION_GAP, OPERATING_VOLTAGE, &Environment::air(), settings).unwrap();
    let mut lib = MaterialLibrary::builtin();
    lib.set_conductivity(&m1.stack_params.metal_material, sigma).unwrap();
    (lib, sigma)
}

pub fn with_library(mut d: GripperDesign, lib: &MaterialLibrary) -> GripperDesign {
    d.materials = lib.clone();
    d
}
