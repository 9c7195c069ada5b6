//! End-to-end checks of the command-line interface: manifest round-trips,
//! design report contents, output schemas and exit codes.

use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_eteso"))
        .args(args)
        .output()
        .expect("spawning the CLI binary")
}

#[test]
fn manifest_round_trips_through_toml() {
    for name in ["benchmark.toml", "light.toml"] {
        let text = std::fs::read_to_string(data(name)).unwrap();
        let parsed = eteso_cli::Manifest::parse(&text).unwrap();
        let reserialized = parsed.to_toml().unwrap();
        let reparsed = eteso_cli::Manifest::parse(&reserialized).unwrap();
        assert_eq!(parsed, reparsed, "round-trip mismatch for {name}");
    }
}

#[test]
fn design_reports_reference_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "design",
        "--manifest",
        data("benchmark.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("tau = 0.0011475506210984938"));
    assert!(stdout.contains("threshold = 0.0011475506210984938"));
    assert!(stdout.contains("tau* = 0.00010029741021209684"));
    assert!(stdout.contains("warning: r below r*"));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("design.json")).unwrap())
            .unwrap();
    let lin = &report["linear"];
    assert_eq!(lin["r"], 15.0);
    assert!((lin["tau"].as_f64().unwrap() - 15.0f64.powf(-2.5)).abs() < 1e-18);
    assert_eq!(lin["below_r_star"], true);
    assert_eq!(lin["predicted_mse_exponents"][0], 5.0);
    let non = &report["nonlinear"];
    // nu interval (5/6, 1) contains 6/7.
    let nu_lo = non["nu_interval"][0].as_f64().unwrap();
    assert!((nu_lo - 5.0 / 6.0).abs() < 1e-12);
    let nu = non["nu"].as_f64().unwrap();
    assert!(nu > nu_lo && nu < 1.0);
    assert!((non["tau_star"].as_f64().unwrap() - 15.0f64.powf(-3.4)).abs() < 1e-18);
}

#[test]
fn non_hurwitz_gains_fail_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "design",
        "--manifest",
        data("bad_gains.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Hurwitz"), "stderr: {stderr}");
}

#[test]
fn invalid_nu_fails_naming_the_interval() {
    let out = run_cli(&[
        "validate",
        "--manifest",
        data("bad_nu.toml").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("interval"), "stdout: {stdout}");
}

#[test]
fn run_writes_trajectory_and_trigger_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "run",
        "--manifest",
        data("light.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header = traj.lines().next().unwrap();
    assert_eq!(header, "t,x1,x2,x_ext,xhat1,xhat2,xhat3");
    let triggers = std::fs::read_to_string(dir.path().join("triggers.csv")).unwrap();
    assert_eq!(triggers.lines().next().unwrap(), "k,t_k,held_y,inter_event");
    // First execution happens at t = 0 with the initial output sample.
    assert!(triggers.lines().nth(1).unwrap().starts_with("1,0,1,"));
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run_metadata.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["command"], "run");
    assert_eq!(meta["manifest"]["schema_version"], 1);
}

#[test]
fn run_includes_eta_columns_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = std::fs::read_to_string(data("light.toml"))
        .unwrap()
        .replace("eta = false", "eta = true");
    let path = dir.path().join("eta.toml");
    std::fs::write(&path, manifest).unwrap();
    let out = run_cli(&[
        "run",
        "--manifest",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(
        traj.lines().next().unwrap(),
        "t,x1,x2,x_ext,xhat1,xhat2,xhat3,eta1,eta2,eta3"
    );
}

#[test]
fn ensemble_sweep_compare_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = data("light.toml");
    let manifest = manifest.to_str().unwrap();
    for (cmd, files) in [
        ("ensemble", vec!["ensemble.csv", "ensemble_metadata.json"]),
        ("sweep", vec!["sweep.csv", "sweep_metadata.json"]),
        (
            "compare",
            vec![
                "compare_paths.csv",
                "compare_summary.csv",
                "compare_metadata.json",
            ],
        ),
    ] {
        let out = run_cli(&[
            cmd,
            "--manifest",
            manifest,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        for f in files {
            assert!(dir.path().join(f).exists(), "{cmd} should write {f}");
        }
    }
    let ensemble = std::fs::read_to_string(dir.path().join("ensemble.csv")).unwrap();
    assert_eq!(
        ensemble.lines().next().unwrap(),
        "t,mse_1,mse_2,mse_3,ci_1,ci_2,ci_3"
    );
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let header = sweep.lines().next().unwrap();
    assert!(header.starts_with("r,tail_mse_1,tail_mse_2,tail_mse_3,slope_1"));
    assert!(header.ends_with("mean_triggers"));
    assert_eq!(sweep.lines().count(), 4); // header + three gain values
    let summary = std::fs::read_to_string(dir.path().join("compare_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn seed_override_changes_output_paths_override_changes_ensemble() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let manifest = data("light.toml");
    let manifest = manifest.to_str().unwrap();
    for (dir, seed) in [(&dir_a, "11"), (&dir_b, "12")] {
        let out = run_cli(&[
            "run",
            "--manifest",
            manifest,
            "--seed",
            seed,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let a = std::fs::read(dir_a.path().join("trajectory.csv")).unwrap();
    let b = std::fs::read(dir_b.path().join("trajectory.csv")).unwrap();
    assert_ne!(a, b, "different master seeds must change the realization");
}

#[test]
fn missing_manifest_flag_is_an_error() {
    let out = run_cli(&["design"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--manifest"));
}

#[test]
fn unknown_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = std::fs::read_to_string(data("light.toml"))
        .unwrap()
        .replace("schema_version = 1", "schema_version = 99");
    let path = dir.path().join("v99.toml");
    std::fs::write(&path, manifest).unwrap();
    let out = run_cli(&["validate", "--manifest", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("schema_version"));
}
