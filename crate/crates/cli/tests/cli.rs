use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thermovi::config::parse_scenario;
use thermovi::driver::{self, FAILURE_MARKER};
use thermovi::output::{read_csv, read_vtk};

fn thermovi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermovi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const TRANSLATION: &str = "
[mesh]
generator = rectangle
lengths = 2, 1
divisions = 4, 2

[material]
model = nonlinear
density = 1.5
mu = 83.33
lambda = 55.55
coupling = 0.5
specific_heat = 5
conductivity = 1
reference_temperature = 10
reference_entropy = 10

[initial]
motion = x + 0.5, y - 0.25
velocity = 0.3, -0.2
temperature = 10

[time]
dt = 0.01
end = 0.5

[output]
every = 5
";

const CRUSH: &str = "
[mesh]
generator = segment
lengths = 1
divisions = 4

[material]
model = nonlinear
density = 1
mu = 1
lambda = 1
coupling = 0.1
specific_heat = 1
conductivity = 0.1
reference_temperature = 10

[initial]
velocity = -30*x

[time]
dt = 0.01
end = 1
";

#[test]
fn uniform_translation_keeps_every_diagnostic_constant() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "translate.ini", TRANSLATION);
    let out = dir.path().join("out");
    let status = thermovi(&[
        "run",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let records = read_csv(&std::fs::read_to_string(out.join("diagnostics.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 11);
    let first = &records[0];
    for r in &records {
        assert!((r.linear - first.linear).norm() <= 1e-12 * first.linear.norm());
        assert!((r.entropy - first.entropy).abs() <= 1e-12 * first.entropy.abs());
        assert!((r.energy - first.energy).abs() <= 1e-12 * first.energy.abs());
        assert!(
            (r.angular.norm() - first.angular.norm()).abs()
                <= 1e-10 * first.angular.norm().max(1.0)
        );
    }
    assert!((records[10].time - 0.5).abs() < 1e-15);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = shipped("convergence_1d.ini");
    let outputs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let status = thermovi(&[
                "run",
                config.to_str().unwrap(),
                "--out-dir",
                out.to_str().unwrap(),
            ]);
            assert!(status.status.success());
            std::fs::read(out.join("diagnostics.csv")).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("t,energy,Lx,Ly,Lz,Ax,Ay,Az,entropy,err_phi,err_Phi,err_v,err_theta"));
    let records = read_csv(&text).unwrap();
    assert!(records.iter().all(|r| r.errors.is_some()));
    // One-dimensional runs leave the angular columns empty.
    assert!(text.lines().nth(1).unwrap().contains(",,,,,"));
}

#[test]
fn step_failure_keeps_partial_output_and_marker() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "crush.ini", CRUSH);
    let out = dir.path().join("out");
    let status = thermovi(&[
        "run",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(3));
    let marker = std::fs::read_to_string(out.join(FAILURE_MARKER)).unwrap();
    assert!(marker.starts_with("step "), "{marker}");
    assert!(marker.contains("inverted"), "{marker}");
    let records = read_csv(&std::fs::read_to_string(out.join("diagnostics.csv")).unwrap()).unwrap();
    assert!(!records.is_empty());
    let failed_at: usize = marker["step ".len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(records.len(), failed_at);

    // A later successful run in the same directory clears the marker.
    let config = write(dir.path(), "translate.ini", TRANSLATION);
    let status = thermovi(&[
        "run",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(!out.join(FAILURE_MARKER).exists());
}

#[test]
fn parse_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.ini", "");
    let status = thermovi(&["run", empty.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("line 1"));

    let typo = write(
        dir.path(),
        "typo.ini",
        &TRANSLATION.replace("every = 5", "evry = 5"),
    );
    let status = thermovi(&["run", typo.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("evry"));

    let status = thermovi(&["run", "/nonexistent/scenario.ini"]);
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn snapshots_follow_the_requested_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "translate.ini", TRANSLATION);
    let out = dir.path().join("out");
    let status = thermovi(&[
        "run",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--snapshot-every",
        "25",
        "--integrator",
        "f01",
    ]);
    assert!(status.status.success());
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".vtk"))
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "snapshot_000000.vtk",
            "snapshot_000025.vtk",
            "snapshot_000050.vtk"
        ]
    );
    let grid = read_vtk(&std::fs::read_to_string(out.join(&names[0])).unwrap()).unwrap();
    assert_eq!(grid.points.len(), 15);
    assert!(grid.cell_types.iter().all(|&t| t == 5));
    let u = &grid.vectors[0].1;
    assert!(u
        .iter()
        .all(|v| (v[0] - 0.5).abs() < 1e-14 && (v[1] + 0.25).abs() < 1e-14 && v[2] == 0.0));
}

#[test]
fn convergence_command_prints_orders() {
    let status = thermovi(&[
        "converge",
        shipped("convergence_1d.ini").to_str().unwrap(),
        "--levels",
        "3",
    ]);
    assert!(status.status.success());
    let text = String::from_utf8(status.stdout).unwrap();
    assert!(text.contains("observed orders"));
    assert_eq!(text.lines().filter(|l| l.contains("->")).count(), 2);

    let single = thermovi(&[
        "converge",
        shipped("convergence_1d.ini").to_str().unwrap(),
        "--levels",
        "1",
    ]);
    assert!(single.status.success());
    assert!(!String::from_utf8(single.stdout)
        .unwrap()
        .contains("observed orders"));
}

#[test]
fn single_level_study_has_no_orders() {
    let text = std::fs::read_to_string(shipped("convergence_1d.ini")).unwrap();
    let s = parse_scenario(&text, Path::new(".")).unwrap();
    let table = driver::convergence_study(&s, 1).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert!(table.orders().is_empty());
}

#[test]
fn euler_a_converges_at_first_order_in_time() {
    // With the mesh fixed and fine, halving the time step halves the error.
    let text = std::fs::read_to_string(shipped("convergence_1d.ini")).unwrap();
    let mut s = parse_scenario(&text, Path::new("."))
        .unwrap()
        .refined(7)
        .unwrap();
    s.scheme = thermovi_core::Scheme::EulerA;
    let errors: Vec<f64> = [0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| {
            s.time_step = thermovi::config::TimeStep::Fixed(dt);
            let sim = s.build().unwrap();
            let last = driver::integrate(&sim, |_, _| Ok(())).unwrap();
            sim.reference
                .as_ref()
                .unwrap()
                .errors(&sim.problem, &last)
                .unwrap()
                .velocity
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 1.0).abs() < 0.15, "order {order} from {errors:?}");
    }
}

#[test]
fn stability_command_reports_both_regimes() {
    let status = thermovi(&[
        "stability",
        shipped("convergence_1d.ini").to_str().unwrap(),
        "--factors",
        "0.9,1.5",
    ]);
    assert!(status.status.success());
    let text = String::from_utf8(status.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].contains("bounded"), "{text}");
    assert!(lines[2].contains("unstable"), "{text}");
}

#[test]
fn beam_scenario_builds_with_paper_loading() {
    let text = std::fs::read_to_string(shipped("beam_3d.ini")).unwrap();
    let s = parse_scenario(&text, Path::new(".")).unwrap();
    let sim = s.build().unwrap();
    assert_eq!(sim.steps, 4000);
    assert!(sim.problem.mesh().n_elements() >= 200);
    let mesh = sim.problem.mesh();
    for (a, x) in mesh.coords().iter().enumerate() {
        assert_eq!(sim.problem.thermal_fixed()[a], x.x.abs() < 1e-12);
        assert_eq!(sim.problem.motion_fixed()[a], (x.x - 10.0).abs() < 1e-12);
    }
    // Dirichlet temperature is the prescribed rate 10 + 4 cos(0.3 t) at t = 0.
    let a = mesh.coords().iter().position(|x| x.x == 0.0).unwrap();
    assert!((sim.initial.temperature[a] - 14.0).abs() < 1e-12);
}

#[test]
fn mesh_info_reads_mesh_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut mesh = thermovi_core::mesh::generate_box_tet_mesh([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
    mesh.label_facets(thermovi_core::BoundaryLabels::TRACTION, |x| x.z == 1.0);
    let path = write(dir.path(), "cube.mesh", &mesh.to_text());
    let status = thermovi(&["mesh-info", path.to_str().unwrap()]);
    assert!(status.status.success());
    let text = String::from_utf8(status.stdout).unwrap();
    assert!(text.contains("elements        6"), "{text}");
    assert!(text.contains("traction        2"), "{text}");

    let bad = write(dir.path(), "bad.mesh", "3 1 0 0\n0 0\n");
    assert_eq!(
        thermovi(&["mesh-info", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}
