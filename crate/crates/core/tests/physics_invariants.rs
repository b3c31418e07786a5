use std::collections::HashMap;
use std::sync::OnceLock;

use microgrip::design::{build_model1, LayerRole};
use microgrip::error::Error;
use microgrip::fem::assemble::QpField;
use microgrip::fem::{ElementOrder, SolveOptions};
use microgrip::materials::{Environment, MaterialLibrary, PICO};
use microgrip::mesh::{generate_block_mesh, Block, BlockModel, Mesh, MeshSettings, Region};
use microgrip::physics::{
    solve_electric, solve_mechanical, solve_mechanical_constrained, solve_thermal, Simulator, Solution,
};
use proptest::prelude::*;

fn gold() -> Region {
    Region {
        material: "Gold".into(),
        role: LayerRole::Conductor,
    }
}

fn su8() -> Region {
    Region {
        material: "SU-8".into(),
        role: LayerRole::StructuralPolymer,
    }
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn coarse() -> MeshSettings {
    MeshSettings::new(10.0, ElementOrder::Linear)
}

fn sim() -> &'static Simulator {
    static SIM: OnceLock<Simulator> = OnceLock::new();
    SIM.get_or_init(|| Simulator::new(&build_model1(None).unwrap(), &coarse(), &opts()).unwrap())
}

fn run(v: f64, h: f64) -> Solution {
    sim().run(v, &Environment::air().with_convection(h)).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[test]
fn bar_matches_hand_resistance() {
    let (length, width, height) = (100.0, 1.5, 2.0);
    let mesh = generate_block_mesh(&BlockModel::rod(length, width, height, gold()), &MeshSettings::new(1.5, ElementOrder::Quadratic)).unwrap();
    let lib = MaterialLibrary::builtin();
    let sigma = lib.get("Gold").unwrap().electrical_conductivity.unwrap();
    let v = 0.1;
    let s = solve_electric(&mesh, &lib, v, &opts()).unwrap();

    let current = v * sigma * PICO * width * height / length;
    assert!((s.total_current - current).abs() <= 1e-8 * current, "{} vs {current}", s.total_current);
    assert!((s.power - v * s.total_current).abs() <= 1e-8 * s.power);
    let q = sigma * PICO * (v / length).powi(2);
    for &x in &s.joule.values {
        assert!((x - q).abs() <= 1e-8 * q);
    }
}

#[test]
fn electric_response_is_quadratic_in_voltage() {
    let mesh = generate_block_mesh(&BlockModel::rod(50.0, 2.0, 2.0, gold()), &MeshSettings::new(2.0, ElementOrder::Linear)).unwrap();
    let lib = MaterialLibrary::builtin();
    let zero = solve_electric(&mesh, &lib, 0.0, &opts()).unwrap();
    assert_eq!(zero.power, 0.0);
    assert!(zero.voltage.iter().chain(&zero.joule.values).all(|&x| x == 0.0));

    let one = solve_electric(&mesh, &lib, 0.05, &opts()).unwrap();
    let two = solve_electric(&mesh, &lib, 0.1, &opts()).unwrap();
    assert!((two.power / one.power - 4.0).abs() < 1e-10);
    assert!((two.total_current / one.total_current - 2.0).abs() < 1e-10);
}

#[test]
fn disconnected_conductor_is_rejected() {
    let mut model = BlockModel::rod(40.0, 2.0, 2.0, gold());
    model.blocks.push(Block::from_bounds([0.0, 0.0, 6.0], [10.0, 2.0, 8.0], 0, 0));
    let err = generate_block_mesh(&model, &MeshSettings::new(2.0, ElementOrder::Linear)).unwrap_err();
    assert!(matches!(err, Error::Topology(_)), "{err}");
}

#[test]
fn conductor_without_conductivity_is_rejected() {
    let mut model = BlockModel::rod(20.0, 2.0, 2.0, su8());
    model.regions[0].role = LayerRole::Conductor;
    let mesh = generate_block_mesh(&model, &MeshSettings::new(2.0, ElementOrder::Linear)).unwrap();
    let err = solve_electric(&mesh, &MaterialLibrary::builtin(), 0.1, &opts()).unwrap_err();
    assert!(matches!(err, Error::InvalidMaterial { .. }), "{err}");
}

#[test]
fn no_heat_leaves_ambient_temperature() {
    let mesh = generate_block_mesh(&BlockModel::anchored_brick([10.0, 10.0, 10.0], su8()), &MeshSettings::new(5.0, ElementOrder::Quadratic)).unwrap();
    let nq = microgrip::fem::element::ReferenceHex::new(mesh.order).n_points();
    let env = Environment::air();
    let t = solve_thermal(&mesh, &MaterialLibrary::builtin(), &QpField::zeros(mesh.n_elements(), nq), &env, &opts()).unwrap();
    assert!(t.temperature.iter().all(|&x| (x - env.ambient_temperature).abs() < 1e-9));
}

#[test]
fn insulated_floating_body_is_singular() {
    let mesh = generate_block_mesh(&BlockModel::brick([10.0; 3], su8()), &MeshSettings::new(5.0, ElementOrder::Linear)).unwrap();
    let nq = microgrip::fem::element::ReferenceHex::new(mesh.order).n_points();
    let env = Environment::air().with_convection(0.0);
    let src = QpField::zeros(mesh.n_elements(), nq);
    assert!(solve_thermal(&mesh, &MaterialLibrary::builtin(), &src, &env, &opts()).is_err());
}

#[test]
fn mechanics_needs_a_clamp() {
    let mesh = generate_block_mesh(&BlockModel::brick([10.0; 3], su8()), &MeshSettings::new(5.0, ElementOrder::Linear)).unwrap();
    let t = vec![310.0; mesh.n_nodes()];
    assert!(solve_mechanical(&mesh, &MaterialLibrary::builtin(), &t, 300.0, &opts()).is_err());
}

#[test]
fn reference_temperature_gives_no_displacement() {
    let mesh = generate_block_mesh(&BlockModel::anchored_brick([10.0, 4.0, 6.0], su8()), &MeshSettings::new(2.0, ElementOrder::Linear)).unwrap();
    let t = vec![300.15; mesh.n_nodes()];
    let u = solve_mechanical(&mesh, &MaterialLibrary::builtin(), &t, 300.15, &opts()).unwrap();
    assert!(u.iter().all(|&x| x == 0.0));
}

fn node_at(mesh: &Mesh, p: [f64; 3]) -> usize {
    mesh.nodes.iter().position(|q| (0..3).all(|k| (q[k] - p[k]).abs() < 1e-12)).unwrap()
}

#[test]
fn uniform_heating_expands_without_stress() {
    let size = [8.0, 6.0, 4.0];
    let mesh = generate_block_mesh(&BlockModel::brick(size, su8()), &MeshSettings::new(2.0, ElementOrder::Quadratic)).unwrap();
    // Pin the origin, keep the x axis on its line and the xy plane in place.
    let o = node_at(&mesh, [0.0; 3]);
    let x = node_at(&mesh, [size[0], 0.0, 0.0]);
    let y = node_at(&mesh, [0.0, size[1], 0.0]);
    let cons = [3 * o, 3 * o + 1, 3 * o + 2, 3 * x + 1, 3 * x + 2, 3 * y + 2];
    let rise = 25.0;
    let t = vec![300.0 + rise; mesh.n_nodes()];
    let tight = SolveOptions {
        rel_tol: 1e-13,
        ..opts()
    };
    let lib = MaterialLibrary::builtin();
    let u = solve_mechanical_constrained(&mesh, &lib, &t, 300.0, &cons, &tight).unwrap();
    let strain = lib.get("SU-8").unwrap().tce * rise;
    for (a, p) in mesh.nodes.iter().enumerate() {
        for k in 0..3 {
            assert!((u[3 * a + k] - strain * p[k]).abs() <= 1e-10 * strain * 8.0, "node {a} dir {k}");
        }
    }
}

#[test]
fn no_voltage_no_actuation() {
    let s = run(0.0, 20.0);
    assert!((s.tip_gap - 20.0).abs() < 1e-12);
    assert!((s.max_temperature - 300.15).abs() < 1e-9);
    assert_eq!(max_abs(&s.displacement), 0.0);
}

#[test]
fn solution_scalars_are_ordered() {
    let s = run(0.2, 20.0);
    let amb = s.environment.ambient_temperature;
    assert!(s.joule_power_total > 0.0);
    assert!(s.tip_gap < 20.0);
    assert!(s.max_temperature >= s.tip_temperature && s.tip_temperature >= amb);
    assert!(s.energy_imbalance() <= 1e-6, "{:e}", s.energy_imbalance());
    assert!(s.current_imbalance() <= 1e-10, "{:e}", s.current_imbalance());
}

#[test]
fn displacement_is_mirror_antisymmetric() {
    let mesh = &sim().mesh;
    let c = mesh.midline.expect("gripper has a midline");
    let key = |p: [f64; 3]| p.map(|x| (x * 1e6).round() as i64);
    let index: HashMap<_, _> = mesh.nodes.iter().enumerate().map(|(a, p)| (key(*p), a)).collect();
    let s = run(0.25, 20.0);
    let u = &s.displacement;
    let scale = max_abs(u);
    for (a, p) in mesh.nodes.iter().enumerate() {
        let b = index[&key([p[0], 2.0 * c - p[1], p[2]])];
        assert!((u[3 * a + 1] + u[3 * b + 1]).abs() <= 1e-8 * scale);
        assert!((u[3 * a] - u[3 * b]).abs() <= 1e-8 * scale);
        assert!((u[3 * a + 2] - u[3 * b + 2]).abs() <= 1e-8 * scale);
    }
    assert!((s.tip_inward[0] - s.tip_inward[1]).abs() <= 1e-8 * s.tip_inward[0]);
}

#[test]
fn hotter_surroundings_exchange_is_never_hotter() {
    let t: Vec<f64> = [0.0, 20.0, 100.0, 250.0, 500.0, 1000.0].iter().map(|&h| run(0.25, h).max_temperature).collect();
    assert!(t.windows(2).all(|w| w[1] <= w[0]), "{t:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fields_scale_with_voltage_squared(v1 in 0.02f64..0.3, v2 in 0.02f64..0.3, h in prop::sample::select(vec![20.0, 250.0])) {
        let (a, b) = (run(v1, h), run(v2, h));
        let r = (v2 / v1).powi(2);
        let amb = a.environment.ambient_temperature;
        let rise_a: Vec<f64> = a.temperature.iter().map(|t| t - amb).collect();
        let scale_t = max_abs(&rise_a) * r;
        for (ta, tb) in rise_a.iter().zip(&b.temperature) {
            prop_assert!((tb - amb - r * ta).abs() <= 1e-6 * scale_t);
        }
        let scale_u = max_abs(&a.displacement) * r;
        for (ua, ub) in a.displacement.iter().zip(&b.displacement) {
            prop_assert!((ub - r * ua).abs() <= 1e-6 * scale_u);
        }
    }
}
