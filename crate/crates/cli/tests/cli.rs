use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn run(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radon-lab"));
    cmd.args(args);
    if let Some(text) = config {
        let path = dir.join("config.json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().expect("binary runs")
}

fn small_gauss(dir: &Path, out: &str, threads: &str) -> Output {
    let out = dir.join(out);
    run(
        &["gauss-decay", "--out", out.to_str().unwrap(), "--threads", threads],
        Some(r#"{ "experiment": "gauss-decay", "moduli": [3, 5, 7, 11, 13] }"#),
        dir,
    )
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    fs::read(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = small_gauss(tmp.path(), name, threads);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for file in ["gauss_decay.csv", "checks.csv", "manifest.json"] {
        assert_eq!(read(&a, file), read(&b, file), "{file}");
    }
    // the manifest records the thread count, the tables must not depend on it
    for file in ["gauss_decay.csv", "checks.csv"] {
        assert_eq!(read(&a, file), read(&c, file), "{file}");
    }
}

#[test]
fn manifest_hashes_match_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_gauss(tmp.path(), "run", "1");
    assert_eq!(out.status.code(), Some(0));
    let dir = tmp.path().join("run");
    let manifest: serde_json::Value = serde_json::from_slice(&read(&dir, "manifest.json")).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 2);
    for entry in outputs {
        let file = entry["file"].as_str().unwrap();
        assert_eq!(entry["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(read(&dir, file))), "{file}");
    }
    let config = read(tmp.path(), "config.json");
    assert_eq!(manifest["config_sha256"].as_str().unwrap(), hex::encode(Sha256::digest(config)));
    assert_eq!(manifest["experiment"], "gauss-decay");
    assert_eq!(manifest["passed"], true);
}

#[test]
fn stdout_lists_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_gauss(tmp.path(), "run", "1");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("PASS norm_equals_inverse_sqrt_q")), "{text}");
    assert!(text.contains("wrote "));
}

#[test]
fn failing_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let out = run(
        &["gauss-decay", "--out", out_dir.to_str().unwrap()],
        Some(r#"{ "experiment": "gauss-decay", "moduli": [4, 6], "gauss_a": 2 }"#),
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL slope_fit"));
    assert!(out_dir.join("manifest.json").exists());
}

fn assert_config_error(config: &str, needle: &str) {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let out = run(&["gauss-decay", "--out", out_dir.to_str().unwrap()], Some(config), tmp.path());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(2), "{err}");
    assert!(err.contains(needle), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn empty_list_is_rejected() {
    assert_config_error(r#"{ "moduli": [] }"#, "configuration error");
}

#[test]
fn unknown_field_is_rejected() {
    assert_config_error(r#"{ "modulii": [3] }"#, "modulii");
}

#[test]
fn mismatched_experiment_is_rejected() {
    assert_config_error(r#"{ "experiment": "factorize" }"#, "factorize");
}

#[test]
fn unknown_experiment_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["spectral-soup"], None, tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_threads_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_gauss(tmp.path(), "run", "0");
    assert_eq!(out.status.code(), Some(2));
}
