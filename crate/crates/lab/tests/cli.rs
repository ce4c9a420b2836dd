use std::path::Path;
use std::process::{Command, Output};

use qcs_core::encode::Payload;
use qcs_core::io::{matrix_from_bytes, quantized_from_bytes, solution_from_bytes};

fn qcslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcslab")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = qcslab(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(text.lines().last().unwrap_or("null")).unwrap_or(serde_json::Value::Null)
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (mat, sig, q, sol, prob, pay) = (
        path(dir.path(), "a.qcsm"),
        path(dir.path(), "x.json"),
        path(dir.path(), "q.qcsq"),
        path(dir.path(), "s.qcss"),
        path(dir.path(), "p.bin"),
        path(dir.path(), "e.qcse"),
    );
    let mut x = vec![0.0; 40];
    x[3] = 1.0;
    x[17] = -0.5;
    std::fs::write(&sig, serde_json::to_string(&x).unwrap()).unwrap();

    let info = ok(&["gen-matrix", "--ensemble", "partial-dft", "--m", "24", "--n", "40", "--seed", "5", "--modify-order", "1", "--out", &mat]);
    assert_eq!(info["complex"], true);
    let a = matrix_from_bytes(&std::fs::read(&mat).unwrap()).unwrap();
    assert_eq!((a.m, a.n), (24, 40));

    let info = ok(&["quantize", "--matrix", &mat, "--signal", &sig, "--r", "1", "--out", &q]);
    assert_eq!(info["len"], 48);
    let rec = quantized_from_bytes(&std::fs::read(&q).unwrap()).unwrap();
    assert_eq!(rec.r, 1);

    let info = ok(&["recover", "--matrix", &mat, "--quantized", &q, "--out", &sol, "--problem-out", &prob]);
    assert_eq!(info["converged"], true);
    let s = solution_from_bytes(&std::fs::read(&sol).unwrap()).unwrap();
    let err: f64 = s.x_hat.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    assert!(err < 0.5, "error {err}");
    assert!(Path::new(&prob).exists());

    let info = ok(&["encode", "--quantized", &q, "--l", "8", "--seed", "3", "--out", &pay]);
    let payload = Payload::from_bytes(&std::fs::read(&pay).unwrap()).unwrap();
    assert_eq!((payload.l, payload.m), (8, 48));
    assert_eq!(info["bytes"].as_u64().unwrap() as usize, std::fs::read(&pay).unwrap().len());
}

#[test]
fn quantize_plain_vector() {
    let dir = tempfile::tempdir().unwrap();
    let (input, q) = (path(dir.path(), "y.json"), path(dir.path(), "q.qcsq"));
    std::fs::write(&input, "[0.3, -0.2, 0.9, 0.0]").unwrap();
    let info = ok(&["quantize", "--input", &input, "--r", "2", "--delta", "0.1", "--out", &q]);
    assert_eq!(info["len"], 4);
    let out = qcslab(&["quantize", "--r", "1", "--out", &q]);
    assert!(!out.status.success());
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.json");
    std::fs::write(&cfg, r#"{"experiment": "fig_modified", "m_list": [20, 30, 40], "trials": 2}"#).unwrap();
    let out = dir.path().join("run");
    let status = qcslab(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["trials.csv", "summary.csv", "meta.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("meta.json")).unwrap()).unwrap();
    assert!(meta["wall_time_s"].as_f64().is_some());
    let trials = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.json");
    let out = path(dir.path(), "run");
    std::fs::write(&cfg, r#"{"experiment": "fig_modified", "mystery": true}"#).unwrap();
    assert!(!qcslab(&["experiment", "--config", &cfg, "--out", &out]).status.success());

    std::fs::write(&cfg, r#"{"experiment": "fig_chirp_k_sweep", "k_list": [2], "trials": 1}"#).unwrap();
    let refused = qcslab(&["experiment", "--config", &cfg, "--out", &out]);
    assert!(!refused.status.success());
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--force"));
}

#[test]
fn chirp_needs_a_prime() {
    let dir = tempfile::tempdir().unwrap();
    let mat = path(dir.path(), "a.qcsm");
    assert!(!qcslab(&["gen-matrix", "--ensemble", "chirp", "--out", &mat]).status.success());
    let info = ok(&["gen-matrix", "--ensemble", "chirp-sub", "--prime", "13", "--out", &mat]);
    assert_eq!(info["m"], 13);
}
