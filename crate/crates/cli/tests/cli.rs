use std::path::Path;
use std::process::{Command, Output};

use microgrip::config::parse_config;
use microgrip::export::parse_vtk;

const COARSE: &str = r#"
voltage = 0.2
voltages = [0.0, 0.1, 0.2]
[mesh]
resolution = 10.0
order = 1
[output]
formats = ["csv", "json", "vtk"]
"#;

fn microgrip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microgrip"))
        .args(["--quiet", "--out"])
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("input.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn dump_design_echoes_a_parseable_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let r = microgrip(&out, &["dump-design"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let echoed = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echoed.starts_with("# microgrip dump-design --seed 0\n"));
    parse_config(&echoed).unwrap();
    let design: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("design.json")).unwrap()).unwrap();
    assert_eq!(design["id"], "model1");
}

#[test]
fn mesh_info_writes_a_readable_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), COARSE);
    let out = tmp.path().join("run");
    let r = microgrip(&out, &["--config", &cfg, "mesh-info"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let vtk = parse_vtk(&std::fs::read_to_string(out.join("mesh.vtk")).unwrap()).unwrap();
    let info: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("mesh.json")).unwrap()).unwrap();
    assert_eq!(info["quality"]["element_count"].as_u64().unwrap() as usize, vtk.cells.len());
    assert!(out.join("config.toml").exists());
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), COARSE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let r = microgrip(dir, &["--config", &cfg, "simulate"]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let names: Vec<String> = files(&a).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["config.toml", "simulate.csv", "simulate.json", "solution.vtk"]);
    assert_eq!(files(&a), files(&b));
}

#[test]
fn sweep_honours_thread_count_without_changing_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), COARSE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(microgrip(&a, &["--config", &cfg, "--threads", "1", "sweep"]).status.success());
    assert!(microgrip(&b, &["--config", &cfg, "--threads", "3", "sweep"]).status.success());
    assert_eq!(std::fs::read(a.join("sweep.csv")).unwrap(), std::fs::read(b.join("sweep.csv")).unwrap());
}

#[test]
fn config_problems_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cases = [
        "colour = \"red\"\n",
        "study = \"sweep\"\n",
        "voltage = -1.0\n",
        "[mesh]\nresolution = 0.0\n",
        "voltage = \n",
    ];
    for text in cases {
        let cfg = write_config(tmp.path(), text);
        let r = microgrip(&out, &["--config", &cfg, "simulate"]);
        assert_eq!(r.status.code(), Some(2), "{text:?}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!r.stderr.is_empty());
    }
    let missing = microgrip(&out, &["--config", "/nonexistent/config.toml", "simulate"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn grip_requires_an_object() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), COARSE);
    let r = microgrip(&tmp.path().join("run"), &["--config", &cfg, "grip"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn verify_exit_code_matches_its_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let r = microgrip(&out, &["verify"]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("verify.json")).unwrap()).unwrap();
    let all_pass = report.as_array().unwrap().iter().all(|c| c["passed"] == true);
    assert_eq!(r.status.code(), Some(if all_pass { 0 } else { 4 }));
}
