//! End-to-end tests of the command-line interface: exit codes, artifact
//! files, determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_difflow"))
}

const CYLINDER_CONFIG: &str = r#"
[grid]
nx = 48
ny = 32
extent = [6.0, 4.0]

[fluid]
re = 30.0
dt = 0.1
n_steps = 6

[boundary_conditions]
west = { type = "inflow", velocity = [1.0, 0.0] }
east = { type = "outflow" }
south = { type = "far_field", velocity = [1.0, 0.0] }
north = { type = "far_field", velocity = [1.0, 0.0] }

[body]
variant = "cylinder"
center = [2.0, 2.0]
diameter = 0.8

[output]
snapshot_stride = 3
"#;

#[test]
fn simulate_writes_the_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    std::fs::write(&config, CYLINDER_CONFIG).unwrap();
    let out_dir = dir.path().join("out");

    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let forces = std::fs::read_to_string(out_dir.join("force_history.csv")).unwrap();
    assert!(forces.starts_with("t,Fx,Fy,Cd,Cl\n"));
    assert_eq!(forces.lines().count(), 7, "header + one row per step");
    assert!(out_dir.join("fields_000003.csv").exists());
    assert!(out_dir.join("fields_000006.csv").exists());
    let snapshot = std::fs::read_to_string(out_dir.join("fields_000006.csv")).unwrap();
    assert!(snapshot.lines().nth(1).unwrap().starts_with("i,j,ux,uy,p,vorticity"));
    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("max_continuity_residual"));
    assert!(out_dir.join("normalized_thrust.csv").exists());
}

#[test]
fn identical_configs_give_bitwise_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    std::fs::write(&config, CYLINDER_CONFIG).unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out_dir = dir.path().join(format!("out{run}"));
        let status = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--output")
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out_dir.join("force_history.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "runs must be deterministic");
}

#[test]
fn missing_reynolds_number_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    std::fs::write(&config, CYLINDER_CONFIG.replace("re = 30.0", "")).unwrap();
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("re"), "error names the missing field: {stderr}");
}

#[test]
fn unknown_keys_are_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    std::fs::write(
        &config,
        CYLINDER_CONFIG.replace("[fluid]", "[fluid]\nwarp_speed = 9"),
    )
    .unwrap();
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("warp_speed"));
}

#[test]
fn check_gradients_reports_small_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    std::fs::write(
        &config,
        CYLINDER_CONFIG
            .replace("n_steps = 6", "n_steps = 4")
            .replace("snapshot_stride = 3", "snapshot_stride = 0"),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["check-gradients", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("gradient_check.csv")).unwrap();
    let err: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!(err <= 1e-3, "gradient error {err}");
}

#[test]
fn steps_override_shortens_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    std::fs::write(&config, CYLINDER_CONFIG).unwrap();
    let out_dir = dir.path().join("out");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&out_dir)
        .args(["--steps", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let forces = std::fs::read_to_string(out_dir.join("force_history.csv")).unwrap();
    assert_eq!(forces.lines().count(), 3);
}

#[test]
fn angle_file_driven_tail_runs_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let gait = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tail_gait_3hz.txt");
    let config_text = format!(
        r#"
[grid]
nx = 48
ny = 48
extent = [1.0, 1.0]

[fluid]
rho = 997.0
mu = 8.9e-4
u_ref = 0.5
l_ref = 0.6
dt = 0.00417
n_steps = 5

[boundary_conditions]
west = {{ type = "wall" }}
east = {{ type = "wall" }}
south = {{ type = "wall" }}
north = {{ type = "wall" }}

[body]
variant = "tail"
base = [0.15, 0.5]
length = 0.5833
angle_file = "{}"
"#,
        gait.display()
    );
    let config = dir.path().join("cfg.toml");
    std::fs::write(&config, config_text).unwrap();
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out_dir.join("normalized_thrust.csv").exists());
}
