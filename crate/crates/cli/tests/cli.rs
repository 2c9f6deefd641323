use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qendy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qendy"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qendy(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = qendy(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn numbers(line: &str) -> Vec<f64> {
    let inner = &line[line.find('[').unwrap() + 1..line.rfind(']').unwrap()];
    inner.split(',').map(|s| s.trim().parse().unwrap()).collect()
}

#[test]
fn generate_pendulum_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let summary = ok(a.path(), &["generate", "--system", "pendulum", "--m", "100", "--seed", "0"]);
    assert!(summary.contains("100 samples"));
    ok(b.path(), &["generate", "--system", "pendulum", "--m", "100", "--seed", "0"]);
    let text = fs::read(a.path().join("training.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&text).lines().count(), 101);
    assert_eq!(text, fs::read(b.path().join("training.csv")).unwrap());
}

#[test]
fn generate_thomas_trajectory() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["generate", "--system", "thomas", "--x0", "1,-1,0", "--t-end", "100", "--m", "1000"]);
    let training = fs::read_to_string(dir.path().join("training.csv")).unwrap();
    assert_eq!(training.lines().count(), 1001);
    assert!(training.starts_with("x1,x2,x3,dx1,dx2,dx3\n"));
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,x1,x2,x3\n"));
}

#[test]
fn fit_pendulum_prints_embedded_rows() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["generate", "--system", "pendulum"]);
    let out = ok(dir.path(), &["fit", "--system", "pendulum"]);
    let row = out.lines().find(|l| l.starts_with("B row 2:")).unwrap();
    let got = numbers(row);
    for (g, w) in got.iter().zip([0.0, -0.1, -1.0, 0.0]) {
        assert!((g - w).abs() < 1e-6, "{row}");
    }
    assert!(out.contains("loss:") && out.contains("sparsity") && out.contains("hurwitz"));
    assert!(dir.path().join("model.json").exists());

    let out = ok(dir.path(), &["fit", "--method", "sindy"]);
    let xi2 = numbers(out.lines().find(|l| l.starts_with("Xi row 2:")).unwrap());
    for (g, w) in xi2.iter().zip([0.0, -0.1, -1.0, 0.0]) {
        assert!((g - w).abs() < 1e-6);
    }

    ok(dir.path(), &["report"]);
    let coeffs = fs::read_to_string(dir.path().join("report_coefficients.csv")).unwrap();
    assert!(coeffs.starts_with("matrix,row,col,value\nA,1,1,"));
    assert_eq!(json(&dir.path().join("report_summary.json"))["kind"], "qendy");
}

#[test]
fn gedmd_linear_lift_eigenvalues() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["generate", "--system", "linear-lift"]);
    let out = ok(dir.path(), &["fit", "--system", "linear-lift", "--method", "gedmd"]);
    assert!(out.lines().any(|l| l.starts_with("eigenvalue 8.000000")), "{out}");
    ok(dir.path(), &["report", "--model", dir.path().join("gedmd.json").to_str().unwrap()]);
    let spectrum = fs::read_to_string(dir.path().join("report_spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 4);
}

#[test]
fn empty_training_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("empty.csv");
    fs::write(&data, "").unwrap();
    let err = fails(dir.path(), &["fit", "--data", data.to_str().unwrap()]);
    assert!(err.contains("read training data"), "{err}");
}

#[test]
fn missing_coordinate_functions_are_reported() {
    let dir = TempDir::new().unwrap();
    let dict = dir.path().join("dict.json");
    fs::write(&dict, r#"{"state_dim": 2, "basis": ["sin(x1)", "cos(x1)", "x2^2"]}"#).unwrap();
    ok(dir.path(), &["generate", "--system", "pendulum"]);
    let err = fails(dir.path(), &["fit", "--dictionary", dict.to_str().unwrap()]);
    assert!(err.starts_with("error: fit:"), "{err}");
}

#[test]
fn thomas_case_a_simulation() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["generate", "--system", "thomas"]);
    ok(dir.path(), &["fit", "--system", "thomas"]);
    let out = ok(dir.path(), &["simulate", "--system", "thomas", "--x0", "0,1,1", "--t-end", "10"]);
    assert!(out.contains("sup error"));
    let err = json(&dir.path().join("simulation_error.json"));
    assert!(err["sup_error"].as_f64().unwrap() < 1e-2, "{err}");
    assert_eq!(err["blowup"], false);
    let csv = fs::read_to_string(dir.path().join("simulation.csv")).unwrap();
    assert!(csv.starts_with("t,x1_model,x2_model,x3_model,x1_true,x2_true,x3_true,blowup\n"));
    assert_eq!(csv.lines().count(), 1002);
}

#[test]
fn modified_thomas_with_small_dictionary_completes() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["generate", "--system", "thomas-b"]);
    ok(dir.path(), &["fit", "--system", "thomas-b", "--dictionary", "thomas"]);
    ok(dir.path(), &["simulate", "--system", "thomas-b", "--x0", "0,1,1", "--t-end", "50"]);
    let err = json(&dir.path().join("simulation_error.json"));
    assert!(err["horizon"].as_f64().unwrap() > 0.0);
    assert!(err["sup_error"].as_f64().is_some());
}

#[test]
fn zero_model_stays_put() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("zero.json");
    fs::write(
        &model,
        r#"{"state_dim": 1, "dictionary": {"state_dim": 1, "basis": ["x1"]},
            "A": [[0]], "B": [[0]], "C": [0], "G": [[1]],
            "lambda": 0, "m": 0, "provenance": "external"}"#,
    )
    .unwrap();
    ok(dir.path(), &["simulate", "--model", model.to_str().unwrap(), "--x0", "0.5", "--t-end", "1", "--dt", "0.1"]);
    let csv = fs::read_to_string(dir.path().join("simulation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    for line in csv.lines().skip(1) {
        assert!(line.ends_with(",0.5,0.0"), "{line}");
    }
}

#[test]
fn blowup_keeps_partial_output() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("blow.json");
    // z' = z^2 from z0 = 1 blows up at t = 1
    fs::write(
        &model,
        r#"{"state_dim": 1, "dictionary": {"state_dim": 1, "basis": ["x1"]},
            "A": [[1]], "B": [[0]], "C": [0], "G": [[1]],
            "lambda": 0, "m": 0, "provenance": "external"}"#,
    )
    .unwrap();
    ok(dir.path(), &["simulate", "--model", model.to_str().unwrap(), "--x0", "1", "--t-end", "2", "--dt", "0.01"]);
    let err = json(&dir.path().join("simulation_error.json"));
    assert_eq!(err["blowup"], true);
    let csv = fs::read_to_string(dir.path().join("simulation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 202);
    assert!(csv.lines().last().unwrap().ends_with(",1.0"));
}

#[test]
fn convergence_default_slope() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["convergence", "--system", "pendulum"]);
    let summary = json(&dir.path().join("convergence.json"));
    for key in ["slope_R", "slope_s"] {
        let s = summary[key].as_f64().unwrap();
        assert!((-0.65..=-0.35).contains(&s), "{key} = {s}: {out}");
    }
    let table = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(table.starts_with("m,e_R_mean,e_s_mean\n"));
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn convergence_edge_cases() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["convergence", "--m-list", "50", "--runs", "1"]);
    assert!(out.contains("slope n/a"));
    assert!(json(&dir.path().join("convergence.json"))["slope_R"].is_null());
    let runs = fs::read_to_string(dir.path().join("convergence_runs.csv")).unwrap();
    assert!(runs.starts_with("m,run,e_R,e_s1,e_s2,e_s3,e_s4\n50,0,"));
    assert_eq!(runs.lines().count(), 2);
}

#[test]
fn reduce_synthetic_forecast() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["reduce"]);
    let report = json(&dir.path().join("reduce_report.json"));
    let rms = report["forecast"]["test_rel_rms"].as_f64().unwrap();
    assert!(rms < 0.1, "{out}");
    assert!(report["spectral_gap"].as_f64().unwrap() > 10.0);
    assert!(dir.path().join("pca.json").exists());
    assert!(dir.path().join("forecast.csv").exists());
}

#[test]
fn reduce_external_csv() {
    let dir = TempDir::new().unwrap();
    let err = fails(dir.path(), &["reduce", "--data", "/nonexistent/snapshots.csv"]);
    assert!(err.contains("read snapshots"), "{err}");

    // a circle embedded in 4 dimensions
    let path = dir.path().join("snap.csv");
    let mut text = String::new();
    for k in 0..400 {
        let t = k as f64 * 0.05;
        let (c, s) = (t.cos(), t.sin());
        text.push_str(&format!("{},{},{},{}\n", c, s, c - s, 0.5 * (c + s)));
    }
    fs::write(&path, text).unwrap();
    ok(dir.path(), &["reduce", "--data", path.to_str().unwrap(), "--k", "2", "--dt", "0.05"]);
    let report = json(&dir.path().join("reduce_report.json"));
    assert!(report["forecast"]["test_rel_rms"].as_f64().unwrap() < 1e-2, "{report}");
}

#[test]
fn config_files_and_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "system = \"pendulum\"\nm = 20\nseed = 3\n").unwrap();
    let out = ok(dir.path(), &["generate", "--config", cfg.to_str().unwrap(), "--m", "30"]);
    assert!(out.contains("30 samples"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"system": "pendulum", "lamda": 1}"#).unwrap();
    let err = fails(dir.path(), &["fit", "--config", bad.to_str().unwrap()]);
    assert!(err.starts_with("error: config:"), "{err}");

    let err = fails(dir.path(), &["generate", "--system", "lorenz"]);
    assert!(err.contains("unknown system"));
    let err = fails(dir.path(), &["generate", "--dt=-1"]);
    assert!(err.contains("dt must be positive"));
}

#[test]
fn thread_cap() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_qendy"))
            .env("QENDY_NUM_THREADS", threads)
            .args(["convergence", "--m-list", "100,1000", "--runs", "4", "--out"])
            .arg(dir.path())
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    let one = fs::read(dir.path().join("convergence_runs.csv")).unwrap();
    assert!(run("3").status.success());
    assert_eq!(one, fs::read(dir.path().join("convergence_runs.csv")).unwrap());
    let bad = run("zero");
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("QENDY_NUM_THREADS"));
}
