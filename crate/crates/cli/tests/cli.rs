use std::path::Path;
use std::process::{Command, Output};

fn hvbk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hvbk"))
        .args(args)
        .current_dir(dir)
        .env("HVBK_THREADS", "2")
        .output()
        .expect("spawn hvbk")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_steady_shear_for_100_steps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"N":4,"ic":"beltrami_shear","dt":0.01,"C_ledger":1e-6}"#);
    let o = hvbk(&["simulate", "--config", &cfg, "--steps", "100", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("stop reason: TMAX"), "{text}");
    assert!(text.contains("T1:") && text.contains("delta:") && text.contains("torque budget used:"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["steps"], 100);
    assert_eq!(report["stop_reason"], "TMAX");
    assert!(report["momentum_drift"].as_f64().unwrap() < 1e-12);
    let csv = std::fs::read_to_string(tmp.path().join("run/diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);
    assert!(tmp.path().join("run/snapshot_final.hvbk").exists());
}

#[test]
fn counterflow_momentum_is_conserved_through_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"N":3,"ic":"counterflow","dt":0.01,"C_ledger":1e-6,"stop_on_torque_budget":false}"#,
    );
    let o = hvbk(&["simulate", "--config", &cfg, "--steps", "20", "--out", "run", "--formulation", "velocity"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap()).unwrap();
    assert!(report["momentum_drift"].as_f64().unwrap() < 1e-12);
}

#[test]
fn floor_above_initial_exits_with_precondition_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"N":4,"ic":"beltrami_shear","m_f":1.5}"#);
    let o = hvbk(&["simulate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m_f<m_i required"));
}

#[test]
fn floor_crossing_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"N":3,"ic":{"name":"counterflow","params":{"U":4.0}},"m_f":0.9,"dt":0.01,"t_max":0.5,
            "C_ledger":1e-6,"stop_on_torque_budget":false}"#,
    );
    let o = hvbk(&["simulate", "--config", &cfg, "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("stop reason: T2"));
}

#[test]
fn verify_lemma_prints_json_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hvbk(&["verify-lemma", "--K", "4", "--trials", "100", "--seed", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let lemma = &v["lemma"];
    assert_eq!(lemma["K"], 4);
    assert_eq!(lemma["trials"], 100);
    assert_eq!(lemma["pass"], true);
    assert!(lemma["max_ratio"].as_f64().unwrap() <= lemma["frozen_bound"].as_f64().unwrap());
}

#[test]
fn verify_appendix_prints_json_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hvbk(&["verify-appendix", "--trials", "5", "--seed", "3", "--N", "3"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["appendix"]["pass"], true);
}

#[test]
fn floor_parameters_outside_series_range_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hvbk(&["verify-appendix", "--trials", "2", "--sigma0", "0.3"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2*C0*sigma0<m_f required"));
}

#[test]
fn constants_and_fit_sigma() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"N":6,"ic":{"name":"random_analytic","params":{"sigma_draw":0.3}},"seed":2,"dt":0.01,"C_ledger":1e-3}"#,
    );
    let o = hvbk(&["constants", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (t1, delta, sigma0) = (
        v["ledger"]["t1"].as_f64().unwrap(),
        v["ledger"]["delta"].as_f64().unwrap(),
        v["ledger"]["sigma0"].as_f64().unwrap(),
    );
    assert!((delta * t1 - sigma0).abs() < 1e-14);

    let o = hvbk(&["simulate", "--config", &cfg, "--steps", "2", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hvbk(&["fit-sigma", "run/snapshot_final.hvbk"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["sigma_fit"].as_f64().unwrap() - 0.3).abs() < 0.05);

    let o = hvbk(&["fit-sigma", "missing.hvbk"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_override_changes_random_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"N":3,"ic":"random_analytic","dt":0.01,"C_ledger":1e-4}"#);
    for (seed, out) in [("1", "a"), ("1", "b"), ("2", "c")] {
        let o = hvbk(&["simulate", "--config", &cfg, "--steps", "3", "--seed", seed, "--out", out], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("diagnostics.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hvbk"))
        .args(["verify-lemma", "--trials", "1"])
        .current_dir(tmp.path())
        .env("HVBK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
