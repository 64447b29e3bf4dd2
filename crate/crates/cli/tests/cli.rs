use std::fs;
use std::path::Path;
use std::process::Command;

use seqsign_cli::{cmd_evaluate, cmd_probe, cmd_solve, curve_from_csv};
use seqsign_core::solver::{two_point_perpetual, HorizonKind};

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn two_point_config() -> &'static str {
    r#"{
        "schema_version": 1,
        "prior": {"kind": "discrete", "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
        "cost": 0.3,
        "mode": "finite",
        "solver": {"horizon": 1.0, "n_time": 16, "quad_order": 32},
        "sim": {"n_paths": 2000, "dt": 0.01, "seed": 7}
    }"#
}

#[test]
fn solve_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, two_point_config());
    let out = cmd_solve(&cfg, dir.path()).unwrap();
    assert!(out.boundaries_path.is_file());
    assert!(out.summary_path.is_file());
    assert!(out.value_at_start > 0.0 && out.value_at_start <= 0.5);

    let csv = fs::read_to_string(&out.boundaries_path).unwrap();
    assert!(csv.starts_with("t,b1,b2\n"));
    assert_eq!(csv.lines().count(), 1 + 17);
    let curve = curve_from_csv(&csv).unwrap();
    assert!(matches!(curve.kind, HorizonKind::Finite { .. }));
    // CSV round trip preserves every node bit for bit
    assert_eq!(curve.b1[0], out.b1_start);

    let eval = cmd_evaluate(&cfg, &out.boundaries_path, dir.path(), None).unwrap();
    let risk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&eval.risk_path).unwrap()).unwrap();
    assert_eq!(risk["estimate"]["n_paths"], 2000);
    assert_eq!(risk["sim"]["seed"], 7);
    // summary sits next to the curve, so the comparison block must exist
    let diff = risk["comparison"]["mc_minus_value"].as_f64().unwrap();
    assert!(diff.abs() < 0.1);
}

#[test]
fn outputs_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, two_point_config());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_solve(&cfg, &a).unwrap();
    cmd_solve(&cfg, &b).unwrap();
    assert_eq!(
        fs::read(a.join("boundaries.csv")).unwrap(),
        fs::read(b.join("boundaries.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("summary.json")).unwrap(),
        fs::read(b.join("summary.json")).unwrap()
    );
    cmd_evaluate(&cfg, &a.join("boundaries.csv"), &a, None).unwrap();
    cmd_evaluate(&cfg, &b.join("boundaries.csv"), &b, None).unwrap();
    assert_eq!(
        fs::read(a.join("risk.json")).unwrap(),
        fs::read(b.join("risk.json")).unwrap()
    );
}

#[test]
fn rejects_a_prior_with_no_negative_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "schema_version": 1,
            "prior": {"kind": "discrete", "atoms": [[0.5, 0.5], [1.0, 0.5]]},
            "cost": 0.3
        }"#,
    );
    let err = cmd_solve(&cfg, dir.path()).unwrap_err().to_string();
    assert!(err.contains("prior rejected"), "{err}");
    assert!(err.contains("both signs"), "{err}");
}

#[test]
fn rejects_unknown_config_fields_and_wrong_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "schema_version": 1,
            "prior": {"kind": "gaussian", "m": 0.0, "gamma": 1.0},
            "cost": 0.3,
            "costt": 0.4
        }"#,
    );
    let err = cmd_solve(&cfg, dir.path()).unwrap_err().to_string();
    assert!(err.contains("unknown field"), "{err}");

    write(
        &cfg,
        r#"{
            "schema_version": 2,
            "prior": {"kind": "gaussian", "m": 0.0, "gamma": 1.0},
            "cost": 0.3
        }"#,
    );
    let err = cmd_solve(&cfg, dir.path()).unwrap_err().to_string();
    assert!(err.contains("schema_version"), "{err}");
}

#[test]
fn rejects_malformed_and_non_monotone_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, two_point_config());

    let curve = dir.path().join("bad_fields.csv");
    write(&curve, "t,b1,b2\n0,0.3\n");
    let err = cmd_evaluate(&cfg, &curve, dir.path(), None)
        .unwrap_err()
        .to_string();
    assert!(err.contains("row 2"), "{err}");

    let curve = dir.path().join("bad_number.csv");
    write(&curve, "t,b1,b2\n0,0.3,oops\n");
    let err = cmd_evaluate(&cfg, &curve, dir.path(), None)
        .unwrap_err()
        .to_string();
    assert!(err.contains("row 2") && err.contains("oops"), "{err}");

    // lower boundary dips between rows: not a valid band
    let curve = dir.path().join("dip.csv");
    write(&curve, "t,b1,b2\n0,0.3,0.7\n0.5,0.25,0.75\n1,0.2,0.8\n");
    let err = cmd_evaluate(&cfg, &curve, dir.path(), None)
        .unwrap_err()
        .to_string();
    assert!(err.contains("narrow"), "{err}");
}

#[test]
fn single_path_run_reports_null_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "schema_version": 1,
            "prior": {"kind": "discrete", "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
            "cost": 0.3,
            "solver": {"horizon": 1.0, "n_time": 16, "quad_order": 32},
            "sim": {"n_paths": 1, "dt": 0.01, "seed": 1}
        }"#,
    );
    let out = cmd_solve(&cfg, dir.path()).unwrap();
    cmd_evaluate(&cfg, &out.boundaries_path, dir.path(), None).unwrap();
    let text = fs::read_to_string(dir.path().join("risk.json")).unwrap();
    assert!(text.contains("\"risk_stderr\": null"), "{text}");
}

#[test]
fn seed_override_changes_the_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, two_point_config());
    let out = cmd_solve(&cfg, dir.path()).unwrap();
    let a = cmd_evaluate(&cfg, &out.boundaries_path, dir.path(), None).unwrap();
    let b = cmd_evaluate(&cfg, &out.boundaries_path, dir.path(), Some(99)).unwrap();
    assert_ne!(a.risk_mean.to_bits(), b.risk_mean.to_bits());
}

#[test]
fn probe_reports_the_closed_form_asymptote() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "schema_version": 1,
            "prior": {"kind": "discrete", "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
            "cost": 0.3,
            "sim": {"n_paths": 500, "seed": 3},
            "probe": {"t": 30.0}
        }"#,
    );
    let out = cmd_probe(&cfg, dir.path(), None).unwrap();
    let want = two_point_perpetual(2.0, 0.3);
    assert!((out.b1_inf - want).abs() < 1e-14);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out.asymptote_path).unwrap()).unwrap();
    assert_eq!(report["support_gap_left"].as_f64().unwrap(), -1.0);
    assert_eq!(report["support_gap_right"].as_f64().unwrap(), 1.0);
    // at t = 30 the posterior has localized on essentially every path
    let min_mean = report["terminal_probe"]["min_mean"].as_f64().unwrap();
    assert!(min_mean < 1e-3, "{min_mean}");

    // a full-support prior closes the band in the limit
    let cfg2 = dir.path().join("cfg2.json");
    write(
        &cfg2,
        r#"{
            "schema_version": 1,
            "prior": {"kind": "gaussian", "m": 0.2, "gamma": 1.0},
            "cost": 0.3
        }"#,
    );
    let out = cmd_probe(&cfg2, dir.path(), None).unwrap();
    assert_eq!(out.b1_inf, 0.5);
    assert_eq!(out.b2_inf, 0.5);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out.asymptote_path).unwrap()).unwrap();
    assert!(report.get("terminal_probe").is_none());
}

#[test]
fn perpetual_mode_writes_a_stationary_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "schema_version": 1,
            "prior": {"kind": "discrete", "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
            "cost": 0.3,
            "mode": "perpetual",
            "solver": {"horizon": 2.0, "n_time": 16, "quad_order": 32,
                       "perpetual_tol": 0.01, "perpetual_t_cap": 16.0},
            "sim": {"n_paths": 2000, "dt": 0.02, "seed": 5}
        }"#,
    );
    let out = cmd_solve(&cfg, dir.path()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out.summary_path).unwrap()).unwrap();
    assert_eq!(summary["mode"], "perpetual");
    assert!(summary["t_effective"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["converged"], true);

    let csv = fs::read_to_string(&out.boundaries_path).unwrap();
    let curve = curve_from_csv(&csv).unwrap();
    assert!(matches!(curve.kind, HorizonKind::PerpetualApprox { .. }));

    // evaluation picks a long horizon automatically; with this band almost
    // every path exits well before it
    let eval = cmd_evaluate(&cfg, &out.boundaries_path, dir.path(), None).unwrap();
    assert!(!eval.censoring_warning);
    let risk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&eval.risk_path).unwrap()).unwrap();
    assert_eq!(risk["curve_kind"], "perpetual");
    assert!(risk["estimate"]["censored_frac"].as_f64().unwrap() < 0.05);
}

#[test]
fn binary_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, two_point_config());
    let status = Command::new(env!("CARGO_BIN_EXE_seqsign"))
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("boundaries.csv").is_file());

    let status = Command::new(env!("CARGO_BIN_EXE_seqsign"))
        .args(["solve", "--config", "/nonexistent/cfg.json"])
        .status()
        .unwrap();
    assert!(!status.success());
}
