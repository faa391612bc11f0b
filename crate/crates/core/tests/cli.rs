//! End-to-end checks of the `holobrack` binary: flag handling, the JSON and
//! CSV payload shapes, exit codes, and byte-level determinism.

use std::process::Command;

fn holobrack(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_holobrack"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stdout_json(args: &[&str]) -> serde_json::Value {
    let out = holobrack(args);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be JSON")
}

#[test]
fn brackets_reports_the_position_momentum_bracket() {
    let phi = 0.5236f64;
    let json = stdout_json(&["brackets", "--a", "2", "--phi", "0.5236"]);
    let entries = json["dirac_brackets"].as_array().unwrap();
    let value = entries
        .iter()
        .find(|e| e["pair"] == "x,P_x")
        .and_then(|e| e["value"].as_f64())
        .unwrap();
    let want = (2.0 + 3.0) / (2.0 + 5.0) * phi.cos() * phi.cos();
    assert!((value - want).abs() < 1e-9, "got {value}, want {want}");
    assert!((value - 0.535714).abs() < 1e-5);
    assert_eq!(json["theta_rank"], 4);
    assert_eq!(json["checks"]["pass"], true);
}

#[test]
fn wall_spectrum_at_unit_scale_lists_the_root_moduli() {
    let json = stdout_json(&["spectrum-wall", "--unit-scale", "-n", "4"]);
    let want = [2.338107, 4.087949, 5.520560, 6.786708];
    let levels = json["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    for (level, w) in levels.iter().zip(want) {
        assert!((level["energy"].as_f64().unwrap() - w).abs() < 1e-6);
    }
}

#[test]
fn zero_horizon_trajectory_has_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let out = holobrack(&["classical", "--t-end", "0", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "header plus exactly one state row");
    assert!(lines[0].starts_with("t,x,y,theta"));
    // the report on stdout still carries the analysis
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["trajectory"]["rows"], 1);
}

#[test]
fn invalid_configuration_exits_nonzero_with_a_diagnostic() {
    let out = holobrack(&["brackets", "--phi", "2.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let out = holobrack(&["spectrum-wall", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"a": 0.0, "n_max": 2, "unit_scale": true}"#).unwrap();

    let json = stdout_json(&["spectrum-wall", "--config", cfg.to_str().unwrap()]);
    assert_eq!(json["levels"].as_array().unwrap().len(), 2);
    assert_eq!(json["params"]["a"].as_f64().unwrap(), 0.0);

    let json = stdout_json(&[
        "spectrum-wall",
        "--config",
        cfg.to_str().unwrap(),
        "-n",
        "5",
        "--a",
        "2",
    ]);
    assert_eq!(json["levels"].as_array().unwrap().len(), 5);
    assert_eq!(json["params"]["a"].as_f64().unwrap(), 2.0);
}

#[test]
fn quantize_scenario_passes_its_equivalence_checks() {
    let json = stdout_json(&["quantize", "--a", "0", "--phi", "0.4"]);
    assert_eq!(json["momentum_rank"], 1);
    assert_eq!(json["checks"]["pass"], true);
    for check in json["equivalence"].as_array().unwrap() {
        assert_eq!(check["pass"], true, "failed: {}", check["name"]);
    }
}

#[test]
fn wavefunction_payload_is_well_formed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wf.csv");
    let out = holobrack(&[
        "wavefunction",
        "--unit-scale",
        "-n",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,psi,density");
    let mut rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 3);
        let psi: f64 = cols[1].parse().unwrap();
        let density: f64 = cols[2].parse().unwrap();
        // both columns are rounded to 12 fractional digits on output
        assert!((psi * psi - density).abs() <= 1e-9 * density + 1e-25);
        rows += 1;
    }
    assert_eq!(rows, 1201);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        vec!["brackets", "--a", "0", "--phi", "0.9"],
        vec!["spectrum-wedge", "--unit-scale", "-n", "5"],
        vec!["quantize"],
    ] {
        let a = holobrack(&args);
        let b = holobrack(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "nondeterministic stdout for {args:?}");
    }
}
