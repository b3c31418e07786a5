use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use microgrip::config::{parse_config_for, StudyConfig, StudyKind};
use microgrip::design::ArmSide;
use microgrip::export::{csv_string, required_voltage_csv, vtk_string, VtkFields};
use microgrip::grip::{grip_with, GripOptions, GripResult};
use microgrip::materials::Environment;
use microgrip::mesh::{generate_mesh_with, mesh_quality, MeshQuality};
use microgrip::oracles::{verify_suite, OracleCheck};
use microgrip::physics::{Simulator, TerminalCurrent};
use microgrip::studies::{
    compare_models, environment_sweep, optimize_design, required_voltage_table, voltage_sweep, Optimization,
    SweepRecord, VOLTAGE_LIMIT,
};
use microgrip::Error;

#[derive(Parser)]
#[command(name = "microgrip", version, about = "Electrothermal microgripper simulations from a study file")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Study file (TOML). Without one, every setting takes its default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, replacing output.directory of the study file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for optimizer restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// One coupled run at `voltage`.
    Simulate,
    /// Coupled runs over `voltages`.
    Sweep,
    /// Runs over `h_values` x `voltages` and the required-voltage table.
    EnvSweep,
    /// Grip force and pressure on an object of `object_diameter`.
    Grip,
    /// Search the `[optimize]` design space.
    Optimize,
    /// Model 1 against Model 2 over `voltages`.
    Compare,
    /// FEM against the analytic checks; exits 4 if any fails.
    Verify,
    /// Mesh statistics (and the mesh as VTK).
    MeshInfo,
    /// The fully resolved design parameters.
    DumpDesign,
}

impl Command {
    fn kind(self) -> StudyKind {
        match self {
            Command::Simulate => StudyKind::Simulate,
            Command::Sweep => StudyKind::Sweep,
            Command::EnvSweep => StudyKind::EnvSweep,
            Command::Grip => StudyKind::Grip,
            Command::Optimize => StudyKind::Optimize,
            Command::Compare => StudyKind::Compare,
            Command::Verify => StudyKind::Verify,
            Command::MeshInfo => StudyKind::MeshInfo,
            Command::DumpDesign => StudyKind::DumpDesign,
        }
    }
}

enum Failure {
    Config(String),
    Solver(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

/// Files produced by a study, written once the study has finished.
struct Output {
    dir: PathBuf,
    formats: Vec<String>,
    files: Vec<(String, String)>,
}

impl Output {
    fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }

    fn add(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text));
    }

    fn csv(&mut self, name: &str, text: String) {
        if self.wants("csv") {
            self.add(&format!("{name}.csv"), text);
        }
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        if self.wants("json") {
            let mut text = serde_json::to_string_pretty(value).expect("results serialize");
            text.push('\n');
            self.add(&format!("{name}.json"), text);
        }
    }

    fn write(&self) -> Result<(), Failure> {
        let io = |p: &Path, e: std::io::Error| Failure::Solver(Error::io(p, e).to_string());
        std::fs::create_dir_all(&self.dir).map_err(|e| io(&self.dir, e))?;
        for (name, text) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        }
        Ok(())
    }
}

fn load_config(cli: &Cli) -> Result<StudyConfig, Failure> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Config(Error::io(path, e).to_string()))?,
        None => String::new(),
    };
    Ok(parse_config_for(&text, Some(cli.command.kind()))?)
}

fn say(quiet: bool, text: &str) {
    if !quiet {
        print!("{text}");
    }
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    design_id: &'a str,
    applied_voltage: f64,
    environment: Environment,
    tip_gap: f64,
    tip_inward: [f64; 2],
    max_temperature: f64,
    max_temperature_location: &'a str,
    tip_temperature: f64,
    out_of_plane_max: f64,
    joule_power_total: f64,
    total_current: f64,
    convective_loss: f64,
    base_heat_outflow: f64,
    energy_imbalance: f64,
    current_imbalance: f64,
    terminals: &'a [TerminalCurrent],
}

#[derive(Serialize)]
struct MeshSummary {
    design_id: String,
    resolution: f64,
    order: String,
    quality: MeshQuality,
}

fn record_table(records: &[SweepRecord]) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "{:>10} {:>8} {:>9} {:>9} {:>9} {:>10} {:>12}", "design", "V", "h", "gap um", "Tmax K", "Ttip K", "out-of-plane");
    for r in records {
        let _ = writeln!(
            t,
            "{:>10} {:>8.3} {:>9.1} {:>9.4} {:>9.2} {:>10.2} {:>12.4}",
            r.design_id, r.applied_voltage, r.convection_coefficient, r.tip_gap, r.max_temperature, r.tip_temperature, r.out_of_plane_max
        );
    }
    t
}

fn optimization_csv(opt: &Optimization) -> String {
    let mut s = String::from("index,design_id,label,variables,objective_um,closure_um,feasible\n");
    for e in &opt.trace {
        let vars: Vec<String> = e.variables.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            e.index,
            e.design_id,
            e.label,
            vars.join(";"),
            e.objective,
            e.closure,
            e.feasible
        );
    }
    s
}

fn verify_csv(checks: &[OracleCheck]) -> String {
    let mut s = String::from("check,computed,reference,error,tolerance,passed\n");
    for c in checks {
        let _ = writeln!(s, "\"{}\",{},{},{},{},{}", c.name.replace('"', "'"), c.computed, c.reference, c.error, c.tolerance, c.passed);
    }
    s
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Solver(e.to_string()))?;
    }
    let mut out = Output {
        dir: cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory)),
        formats: cfg.output.formats.clone(),
        files: Vec::new(),
    };
    out.add(
        "config.toml",
        format!("# microgrip {} --seed {}\n{}", cfg.study.name(), cli.seed, cfg.to_toml()),
    );
    let quiet = cli.quiet;
    let settings = cfg.settings();
    let env = cfg.environment;
    let mut verdict = Ok(());

    match cli.command {
        Command::Simulate => {
            let design = cfg.build_design()?;
            let sim = Simulator::new(&design, &cfg.mesh, &cfg.solver)?;
            let s = sim.run(cfg.voltage, &env)?;
            let rec = SweepRecord::from_solution(&design.id, &s);
            say(quiet, &record_table(std::slice::from_ref(&rec)));
            say(quiet, &format!(
                "power {:.6e} pW, energy imbalance {:.2e}, current imbalance {:.2e}\n",
                s.joule_power_total,
                s.energy_imbalance(),
                s.current_imbalance()
            ));
            out.csv("simulate", csv_string(&[rec]));
            out.json(
                "simulate",
                &SimulateSummary {
                    design_id: &design.id,
                    applied_voltage: s.applied_voltage,
                    environment: s.environment,
                    tip_gap: s.tip_gap,
                    tip_inward: s.tip_inward,
                    max_temperature: s.max_temperature,
                    max_temperature_location: &s.max_temperature_location,
                    tip_temperature: s.tip_temperature,
                    out_of_plane_max: s.out_of_plane_max,
                    joule_power_total: s.joule_power_total,
                    total_current: s.total_current,
                    convective_loss: s.convective_loss,
                    base_heat_outflow: s.base_heat_outflow,
                    energy_imbalance: s.energy_imbalance(),
                    current_imbalance: s.current_imbalance(),
                    terminals: &s.terminals,
                },
            );
            if out.wants("vtk") {
                out.add("solution.vtk", vtk_string(&sim.mesh, &VtkFields::from_solution(&sim.mesh, &s)?)?);
            }
        }
        Command::Sweep => {
            let design = cfg.build_design()?;
            let sim = Simulator::new(&design, &cfg.mesh, &cfg.solver)?;
            let records = voltage_sweep(&sim, &cfg.voltages, &env, cfg.object_diameter)?;
            say(quiet, &record_table(&records));
            out.csv("sweep", csv_string(&records));
            out.json("sweep", &records);
        }
        Command::EnvSweep => {
            let design = cfg.build_design()?;
            let sim = Simulator::new(&design, &cfg.mesh, &cfg.solver)?;
            let t = env.ambient_temperature;
            let records = environment_sweep(&sim, &cfg.voltages, &cfg.h_values, t, cfg.object_diameter)?;
            let table = required_voltage_table(&sim, &cfg.closure_targets, &cfg.h_values, t, VOLTAGE_LIMIT)?;
            say(quiet, &record_table(&records));
            for r in &table {
                let v = r.voltage.map_or("unreachable".to_string(), |v| format!("{v:.4} V"));
                say(quiet, &format!("h {:>7.1}: closure {:>5.1} um needs {v}\n", r.convection_coefficient, r.target_closure));
            }
            out.csv("env_sweep", csv_string(&records));
            out.json("env_sweep", &records);
            out.csv("required_voltage", required_voltage_csv(&table));
            out.json("required_voltage", &table);
        }
        Command::Grip => {
            let d = cfg
                .object_diameter
                .ok_or_else(|| Failure::Config("grip needs object_diameter".into()))?;
            let design = cfg.build_design()?;
            let sim = Simulator::new(&design, &cfg.mesh, &cfg.solver)?;
            let s = sim.run(cfg.voltage, &env)?;
            let g: GripResult = grip_with(&sim, cfg.voltage, &env, d, &GripOptions::default())?;
            let mut rec = SweepRecord::from_solution(&design.id, &s);
            rec.grip_force = Some(g.total_normal_force);
            rec.grip_pressure = Some(g.max_contact_pressure);
            say(quiet, &record_table(std::slice::from_ref(&rec)));
            if g.contact {
                say(quiet, &format!(
                    "force {:.4} uN ({} {:.4}, {} {:.4}), max pressure {:.4} MPa, mean {:.4} MPa\n",
                    g.total_normal_force,
                    ArmSide::Left.label(),
                    g.left_force,
                    ArmSide::Right.label(),
                    g.right_force,
                    g.max_contact_pressure,
                    g.mean_contact_pressure
                ));
            } else {
                say(quiet, &format!("no contact: closure {:.4} um does not reach the object\n", g.unconstrained_closure));
            }
            out.csv("grip", csv_string(&[rec]));
            out.json("grip", &g);
        }
        Command::Optimize => {
            let space = cfg.design_space()?;
            let o = &cfg.optimize;
            let opt = optimize_design(&space, o.method, o.budget, cli.seed, &settings)?;
            out.csv("optimize", optimization_csv(&opt));
            out.json("optimize", &opt);
            for e in &opt.trace {
                say(quiet, &format!(
                    "{:>3} {:<24} out-of-plane {:>9.4} um  closure {:>8.4} um{}\n",
                    e.index,
                    e.label,
                    e.objective,
                    e.closure,
                    if e.feasible { "" } else { "  (infeasible)" }
                ));
            }
            match opt.best(o.required_closure) {
                Ok(best) => say(quiet, &format!("best: {} ({:.4} um)\n", best.label, best.objective)),
                Err(e) => verdict = Err(Failure::from(e)),
            }
        }
        Command::Compare => {
            let lib = cfg.library();
            let cmp = compare_models(&cfg.voltages, &env, &lib, Some(&cfg.design.overrides), &settings)?;
            let rows: Vec<SweepRecord> = cmp.pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
            say(quiet, &record_table(&rows));
            say(quiet, &format!(
                "model2 closes slower: {}, model2 out-of-plane smaller: {}\n",
                cmp.model2_closes_slower, cmp.model2_out_of_plane_smaller
            ));
            out.csv("compare", csv_string(&rows));
            out.json("compare", &cmp);
        }
        Command::Verify => {
            let checks = verify_suite();
            for c in &checks {
                say(quiet, &format!(
                    "{:<4} {:<48} error {:.3e} (tolerance {:.1e})\n",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.error,
                    c.tolerance
                ));
            }
            out.csv("verify", verify_csv(&checks));
            out.json("verify", &checks);
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                verdict = Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))));
            }
        }
        Command::MeshInfo => {
            let design = cfg.build_design()?;
            let mesh = generate_mesh_with(&design, &cfg.mesh)?;
            let quality = mesh_quality(&mesh);
            say(quiet, &format!(
                "{} nodes, {} elements, min Jacobian {:.4e}\n",
                quality.node_count, quality.element_count, quality.min_jacobian
            ));
            for (tag, area) in &quality.tag_areas {
                say(quiet, &format!("  {tag:<20} {area:.4} um^2\n"));
            }
            out.json(
                "mesh",
                &MeshSummary {
                    design_id: design.id.clone(),
                    resolution: cfg.mesh.resolution,
                    order: format!("{:?}", cfg.mesh.order).to_lowercase(),
                    quality,
                },
            );
            if out.wants("vtk") {
                out.add("mesh.vtk", vtk_string(&mesh, &VtkFields::empty())?);
            }
        }
        Command::DumpDesign => {
            let design = cfg.build_design()?;
            let mut text = serde_json::to_string_pretty(&design).expect("design serializes");
            text.push('\n');
            say(quiet, &text);
            out.add("design.json", text);
        }
    }
    out.write()?;
    verdict
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
