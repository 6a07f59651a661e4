use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn network(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../networks")
        .join(format!("{name}.json"))
}

fn graphwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphwave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_predicts_exponential_for_the_star() {
    let out = graphwave(&["validate", network("kv_star").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("case I"));
    assert!(text.contains("predicted: exponential"));
}

#[test]
fn validate_predicts_polynomial_for_the_chain() {
    let out = graphwave(&["validate", "--json", network("elastic_kv_chain").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["prediction"]["case"], "II");
    assert_eq!(v["prediction"]["regime"], "polynomial");
    assert_eq!(v["passed"], true);
}

#[test]
fn validate_rejects_an_elastic_cycle() {
    let out = graphwave(&["validate", network("elastic_cycle").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("structure: fail"));
    assert!(text.contains("cycle"));
}

#[test]
fn parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mode": "tree", "vertices": []"#).unwrap();
    let out = graphwave(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("cannot parse"));

    std::fs::write(
        &bad,
        r#"{"mode": "tree", "vertices": [{"id": "a", "root": true}, {"id": "a"}],
            "edges": [{"id": 0, "from": "a", "to": "a", "length": 1, "damping": {"kind": "zero"}}]}"#,
    )
    .unwrap();
    assert_eq!(graphwave(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(graphwave(&["validate", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_trace_fit_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = graphwave(&[
        "simulate",
        network("kv_string").to_str().unwrap(),
        "--cells",
        "16",
        "--dt",
        "0.01",
        "--T",
        "60",
        "--exp-window",
        "1,10",
        "--u0",
        r#"{"kind": "edges", "edges": {"e": {"sine": [1.0]}}}"#,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("t,E,D,diss_residual"));
    assert_eq!(lines.count(), 6001);
    let fit = read_json(&out_dir.join("fit.json"));
    assert_eq!(fit["dissipation"]["identity_holds"], true);
    assert_eq!(fit["dissipation"]["monotone"], true);
    // one damped mode: E decays like exp(-a μ t), so ω = a π² / 2 with a = 0.5
    let omega = fit["exponential"]["rate"].as_f64().unwrap();
    let expected = 0.5 * std::f64::consts::PI.powi(2) / 2.0;
    assert!((omega - expected).abs() / expected < 0.03, "{omega} vs {expected}");
    // the window [20, 200] does not fit inside T = 60
    assert!(fit["power"]["error"].is_string());
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["options"]["dt"], 0.01);
    assert_eq!(manifest["outputs"][0], "trace.csv");
    assert_eq!(manifest["spec"]["edges"][0]["id"], "e");
}

#[test]
fn simulate_rejects_incompatible_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    // u0 = 1 does not vanish at the fixed ends
    let out = graphwave(&[
        "simulate",
        network("kv_string").to_str().unwrap(),
        "--cells",
        "8",
        "--u0",
        r#"{"kind": "edges", "edges": {"e": {"poly": [1.0]}}}"#,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = graphwave(&[
        "spectrum",
        network("triangle_pendant").to_str().unwrap(),
        "--cells",
        "16",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary = stdout_json(&out);
    assert_eq!(summary["asymptotically_stable"], true);
    assert_eq!(summary["certified"], true);
    let n = summary["dofs"].as_u64().unwrap() as usize;
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("re,im,residual\n"));
    assert_eq!(csv.lines().count(), 2 * n + 1);
}

#[test]
fn resolvent_scans_the_requested_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = graphwave(&[
        "resolvent",
        network("kv_string").to_str().unwrap(),
        "--cells",
        "32",
        "--beta-min",
        "2",
        "--beta-max",
        "20",
        "--points",
        "40",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["band"][0], 2.0);
    assert_eq!(summary["points"], 40);
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(csv.starts_with("beta,resolvent_norm\n"));
    assert_eq!(csv.lines().count(), 41);
}

#[test]
fn resolvent_refuses_narrow_or_unresolved_bands() {
    let dir = tempfile::tempdir().unwrap();
    let spec = network("kv_string");
    let spec = spec.to_str().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let narrow = graphwave(&[
        "resolvent", spec, "--cells", "32", "--beta-min", "5", "--beta-max", "20", "--out", out_dir,
    ]);
    assert_eq!(narrow.status.code(), Some(2));
    let beyond = graphwave(&[
        "resolvent", spec, "--cells", "32", "--beta-min", "1", "--beta-max", "500", "--out", out_dir,
    ]);
    assert_eq!(beyond.status.code(), Some(2));
}

#[test]
fn report_on_undamped_network_makes_no_regime_claim() {
    let dir = tempfile::tempdir().unwrap();
    let out = graphwave(&[
        "report",
        network("undamped_string").to_str().unwrap(),
        "--cells",
        "16",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["predicted"]["regime"], "none");
    assert_eq!(report["measured"]["classification"]["kind"], "not-asymptotically-stable");
    assert_eq!(report["agreement"], true);
    for f in ["trace.csv", "spectrum.csv", "scan.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn report_agrees_on_reference_networks() {
    for (name, kind) in [
        ("kv_star", "exponential-consistent"),
        ("elastic_kv_chain", "polynomial-consistent"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let out = graphwave(&[
            "report",
            network(name).to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let report = stdout_json(&out);
        assert_eq!(report["agreement"], true);
        assert_eq!(report["measured"]["classification"]["kind"], kind);
        assert!(report["resolvent_slope"].is_f64());
    }
}

#[test]
fn invalid_thread_setting_exits_two() {
    let out = Command::new(env!("CARGO_BIN_EXE_graphwave"))
        .args(["validate", network("kv_star").to_str().unwrap()])
        .env("GRAPHWAVE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
