use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn mfe(args: &[&str], config_name: &str, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfe"))
        .args(&args[..1])
        .arg("--config")
        .arg(config(config_name))
        .arg("--out")
        .arg(out)
        .args(&args[1..])
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_single_state_writes_quadratic_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfe(&["solve", "--tol", "1e-8"], "single_state.json", dir.path());
    assert_eq!(out.status.code(), Some(0));
    let mut rows = csv::Reader::from_path(dir.path().join("q_table.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["state_index", "action_index", "action_0", "q", "q_min"]);
    let mut count = 0;
    for rec in rows.records() {
        let rec = rec.unwrap();
        let a: f64 = rec[2].parse().unwrap();
        let q: f64 = rec[3].parse().unwrap();
        assert!((q - a * a).abs() <= 1e-8);
        count += 1;
    }
    assert_eq!(count, 21);
    let manifest = json(&dir.path().join("solve_manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 4);
    let config_bytes = fs::read(config("single_state.json")).unwrap();
    assert_eq!(manifest["config_sha256"], mfe_core::cli::io::sha256_hex(&config_bytes));
}

#[test]
fn bad_kernel_exits_one_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfe(&["solve"], "bad.json", dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stochasticity"), "{stderr}");
    assert!(stderr.contains("0.9"), "{stderr}");
    let manifest = json(&dir.path().join("solve_manifest.json"));
    assert_eq!(manifest["exit_code"], 1);
    assert!(manifest["error"].as_str().unwrap().contains("stochasticity"));
}

#[test]
fn missing_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfe(&["solve"], "no_such_file.json", dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn average_solve_reports_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfe(&["solve"], "congestion_avg.json", dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("report.json"));
    assert!(report["gain"].as_f64().unwrap() > 0.0);
    assert_eq!(report["gain"], report["certificates"]["gain"]);
}

#[test]
fn iteration_cap_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let contractive = mfe(&["solve", "--max-iter", "3"], "congestion.json", &dir.path().join("a"));
    assert_eq!(contractive.status.code(), Some(2));
    let report = json(&dir.path().join("a/report.json"));
    assert_eq!(report["status"], "max_iter_reached");

    let loose = mfe(&["solve", "--max-iter", "2"], "mu_independent.json", &dir.path().join("b"));
    assert_eq!(loose.status.code(), Some(3));
}

#[test]
fn verify_pipeline_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mfe(&["solve"], "congestion.json", dir.path()).status.code(), Some(0));
    assert_eq!(mfe(&["verify"], "congestion.json", dir.path()).status.code(), Some(0));
    let cert = json(&dir.path().join("certificate.json"));
    assert_eq!(cert["pass"], true);

    // Shift 0.1 of mass between the first two states.
    let measure = dir.path().join("measure.csv");
    let mut rows: Vec<(usize, f64)> =
        csv::Reader::from_path(&measure).unwrap().deserialize().map(|r| r.unwrap()).collect();
    let moved = rows[0].1.min(0.1);
    rows[0].1 -= moved;
    rows[1].1 += moved;
    let mut w = csv::Writer::from_path(&measure).unwrap();
    w.write_record(["state_index", "prob"]).unwrap();
    for r in &rows {
        w.serialize(r).unwrap();
    }
    w.flush().unwrap();
    assert_eq!(mfe(&["verify"], "congestion.json", dir.path()).status.code(), Some(4));
    assert_eq!(json(&dir.path().join("certificate.json"))["pass"], false);

    fs::remove_file(dir.path().join("policy.csv")).unwrap();
    assert_eq!(mfe(&["verify"], "congestion.json", dir.path()).status.code(), Some(1));
}

#[test]
fn constants_on_decoupled_model_have_zero_l1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mfe(&["constants"], "mu_independent.json", dir.path()).status.code(), Some(0));
    let c = json(&dir.path().join("constants.json"));
    assert_eq!(c["l1"], 0.0);
}

#[test]
fn contraction_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = mfe(&["contraction", "--pairs", "100", "--seed", "9"], "congestion.json", &dir.path().join(run));
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read(dir.path().join("a/contraction.json")).unwrap();
    let b = fs::read(dir.path().join("b/contraction.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(json(&dir.path().join("a/contraction.json"))["ratios"].as_array().unwrap().len(), 100);
}

#[test]
fn simulate_writes_one_row_per_population() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfe(&["simulate", "--rollouts", "50"], "congestion.json", dir.path());
    assert_eq!(out.status.code(), Some(0));
    let mut r = csv::Reader::from_path(dir.path().join("nagent.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["N", "mean_cost", "gap", "stderr"]);
    let rows: Vec<(usize, f64, f64, f64)> = r.deserialize().map(|x| x.unwrap()).collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [10, 100, 1000]);
    assert!(rows.iter().all(|r| r.1.is_finite() && r.2.is_finite() && r.3 >= 0.0));
}

#[test]
fn replay_reproduces_hashes_and_flags_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mfe(&["solve", "--seed", "4"], "congestion_avg.json", dir.path()).status.code(), Some(0));
    let manifest = dir.path().join("solve_manifest.json");
    let replay = |m: &Path| {
        Command::new(env!("CARGO_BIN_EXE_mfe"))
            .args(["replay", "--manifest"])
            .arg(m)
            .arg("--out")
            .arg(dir.path().join("replayed"))
            .output()
            .unwrap()
    };
    let ok = replay(&manifest);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));

    let mut m = json(&manifest);
    m["artifacts"][0]["sha256"] = Value::String("0".repeat(64));
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(replay(&tampered).status.code(), Some(5));
}

#[test]
fn in_process_entry_point_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("single_state.json");
    let code = mfe_core::cli::run_from([
        "mfe",
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(dir.path().join("report.json").is_file());
    assert_eq!(mfe_core::cli::run_from(["mfe", "solve", "--no-such-flag"]), 1);
}
