use std::fs;
use std::process::{Command, Output};

use kurv::cli::{ReportEnvelope, EXIT_ERROR, EXIT_NOT_CERTIFIED, EXIT_OK};
use serde_json::Value;

fn kurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kurv"))
        .args(args)
        .env_remove("KURV_THREADS")
        .output()
        .expect("binary runs")
}

fn envelope(out: &Output) -> ReportEnvelope {
    serde_json::from_slice(&out.stdout).expect("stdout is a report envelope")
}

#[test]
fn models_list_prints_a_table_and_json() {
    let out = kurv(&["models", "list"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "product_poincare",
        "translation_family",
        "moebius_family",
        "sheared_poincare",
        "flat",
        "random_jet",
    ] {
        assert!(text.contains(name), "{name} missing");
    }
    let env = envelope(&kurv(&["models", "list", "--json"]));
    assert_eq!(env.payload.as_array().unwrap().len(), 6);
    assert!(env.hash_is_valid());
}

#[test]
fn exit_codes() {
    assert_eq!(
        kurv(&["certify", "--model", "nope"]).status.code(),
        Some(EXIT_ERROR)
    );
    assert_eq!(
        kurv(&["certify", "--samples", "0", "--model", "flat"])
            .status
            .code(),
        Some(EXIT_ERROR)
    );
    assert_eq!(kurv(&["frobnicate"]).status.code(), Some(EXIT_ERROR));
    let bad = kurv(&[
        "analyze",
        "--model",
        "product_poincare",
        "--point",
        "2,0;0,0",
    ]);
    assert_eq!(bad.status.code(), Some(EXIT_ERROR));
    assert!(!bad.stderr.is_empty());

    let ok = kurv(&[
        "certify",
        "--model",
        "product_poincare",
        "--samples",
        "500",
        "--k-max",
        "100",
    ]);
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let env = envelope(&ok);
    assert_eq!(env.exit_status, EXIT_OK);
    assert_eq!(env.payload["certified"], Value::Bool(true));

    let flat = kurv(&[
        "certify",
        "--model",
        "flat",
        "--samples",
        "500",
        "--k-max",
        "100",
    ]);
    assert_eq!(flat.status.code(), Some(EXIT_NOT_CERTIFIED));
    assert_eq!(envelope(&flat).payload["threshold"], Value::Null);
}

#[test]
fn out_directory_receives_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = kurv(&["--out", d, "ke", "solve", "--grid", "33"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let saved: ReportEnvelope =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ke_solve.json")).unwrap())
            .unwrap();
    assert_eq!(saved, envelope(&out));
    let csv = fs::read_to_string(dir.path().join("ke_solve_grid.csv")).unwrap();
    assert!(csv.lines().count() > 33);

    let out = kurv(&["asymptotics", "--model", "sheared_poincare", "--out", d]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(dir.path().join("asymptotics.json").exists());
    let csv = fs::read_to_string(dir.path().join("asymptotics_k_grid.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn config_file_presets_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"model": "translation_family", "params": {"eps": 0.3}, "k": 4.0}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let env = envelope(&kurv(&["analyze", "--config", c]));
    assert_eq!(env.payload["params"]["eps"], serde_json::json!(0.3));
    assert_eq!(env.params["k"], serde_json::json!(4.0));
    let env = envelope(&kurv(&[
        "analyze", "--config", c, "--k", "9", "--param", "eps=0.1",
    ]));
    assert_eq!(env.params["k"], serde_json::json!(9.0));
    assert_eq!(env.payload["params"]["eps"], serde_json::json!(0.1));
    fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(
        kurv(&["analyze", "--config", c]).status.code(),
        Some(EXIT_ERROR)
    );
}

#[test]
fn reports_are_reproducible_across_processes_and_threads() {
    let args = [
        "griffiths",
        "--model",
        "sheared_poincare",
        "--samples",
        "2000",
        "--seed",
        "5",
    ];
    let a = envelope(&kurv(&args));
    let b = Command::new(env!("CARGO_BIN_EXE_kurv"))
        .args(args)
        .env("KURV_THREADS", "2")
        .output()
        .unwrap();
    let b = envelope(&b);
    assert_eq!(b.threads, 2);
    assert_eq!(a.determinism_hash, b.determinism_hash);
    assert_eq!(a.payload, b.payload);
}
