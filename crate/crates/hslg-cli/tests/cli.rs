//! End-to-end tests of the `hslg` binary: exit codes, run-directory layout,
//! byte-for-byte reproducibility, and the self-comparison identity of
//! `ks-compare`. Heavy statistical verification lives in the core crate's
//! acceptance suite; here every invocation uses throwaway sample counts.

use std::path::Path;
use std::process::{Command, Output};

fn hslg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hslg"))
        .args(args)
        .output()
        .expect("failed to launch hslg")
}

fn run_ok(args: &[&str]) -> Output {
    let out = hslg(args);
    assert!(
        out.status.success(),
        "hslg {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

fn manifest_status(dir: &Path) -> String {
    let m: serde_json::Value =
        serde_json::from_slice(&read(dir, "manifest.json")).expect("manifest parses");
    m["status"].as_str().expect("manifest has status").to_string()
}

#[test]
fn run_directory_layout_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    run_ok(&[
        "estimate-v",
        "--reps",
        "500",
        "--n",
        "32",
        "--seed",
        "9",
        "--out",
        dir.to_str().unwrap(),
    ]);
    for name in ["config.json", "manifest.json", "summary.json", "run-meta.json", "estimate.csv", "vhat.dat", "plots.json"] {
        assert!(dir.join(name).is_file(), "missing {name}");
    }
    assert_eq!(manifest_status(&dir), "complete");
    let summary: serde_json::Value = serde_json::from_slice(&read(&dir, "summary.json")).unwrap();
    assert_eq!(summary["experiment"], "estimate-v");
    assert_eq!(summary["config"]["params"]["reps"], 500);
    assert!(summary["summary"]["v"].as_f64().unwrap() > 0.0);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["estimate-v", "--reps", "500", "--n", "32", "--seed", "42"];
    run_ok(&[&args[..], &["--out", a.to_str().unwrap()]].concat());
    run_ok(&[&args[..], &["--out", b.to_str().unwrap()]].concat());
    for name in ["config.json", "summary.json", "estimate.csv", "vhat.dat"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs between reruns");
    }
}

#[test]
fn stored_config_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    run_ok(&[
        "polymer-increments",
        "--big-n",
        "20",
        "--r",
        "2",
        "--reps",
        "200",
        "--seed",
        "31",
        "--out",
        first.to_str().unwrap(),
    ]);
    run_ok(&[
        "polymer-increments",
        "--config",
        first.join("config.json").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    for name in ["config.json", "summary.json", "increments.csv", "ecdf_increment.dat"] {
        assert_eq!(read(&first, name), read(&second, name), "{name} differs under stored config");
    }
}

#[test]
fn completed_run_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let args = [
        "estimate-v",
        "--reps",
        "200",
        "--n",
        "32",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ];
    run_ok(&args);
    let before = read(&dir, "summary.json");
    let out = hslg(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("completed run"),
        "stderr should explain the refusal"
    );
    assert_eq!(read(&dir, "summary.json"), before, "completed run was modified");
}

#[test]
fn unknown_flag_exits_2() {
    let out = hslg(&["estimate-v", "--no-such-flag", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_config_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = hslg(&["estimate-v", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let missing = tmp.path().join("absent.json");
    let out = hslg(&["estimate-v", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let wrong = tmp.path().join("wrong.json");
    std::fs::write(
        &wrong,
        r#"{"schema_version":1,"experiment":"meander-check","params":{}}"#,
    )
    .unwrap();
    let out = hslg(&["estimate-v", "--config", wrong.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "config for another experiment must be rejected");
}

#[test]
fn missing_v_table_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hslg(&[
        "evolve-stationary",
        "--reps",
        "10",
        "--out",
        tmp.path().join("a").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "absent --vtable");

    let out = hslg(&[
        "limit-chain",
        "--vtable",
        tmp.path().join("nope.json").to_str().unwrap(),
        "--out",
        tmp.path().join("b").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "unreadable --vtable");
}

#[test]
fn ks_compare_file_against_itself_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("sample.csv");
    let mut text = String::from("value\n");
    for i in 0..200 {
        text.push_str(&format!("{}\n", (i as f64).sin()));
    }
    std::fs::write(&csv, text).unwrap();
    let dir = tmp.path().join("run");
    let out = run_ok(&[
        "ks-compare",
        csv.to_str().unwrap(),
        csv.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("pass"));
    let summary: serde_json::Value = serde_json::from_slice(&read(&dir, "summary.json")).unwrap();
    assert_eq!(summary["summary"]["statistic"].as_f64().unwrap(), 0.0);
    assert_eq!(summary["summary"]["pass"], true);
}

#[test]
fn output_dir_env_var_sets_default_root() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hslg"))
        .args(["estimate-v", "--reps", "200", "--n", "32", "--seed", "2"])
        .env("HSLG_OUTPUT_DIR", tmp.path())
        .output()
        .expect("failed to launch hslg");
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("estimate-v/summary.json").is_file());
}

#[test]
fn vtable_pipeline_feeds_dependent_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let vt = tmp.path().join("vt");
    run_ok(&[
        "build-vtable",
        "--grid-min",
        "-3",
        "--grid-max",
        "5",
        "--grid-step",
        "1",
        "--schedule",
        "16,32",
        "--reps",
        "2000",
        "--seed",
        "6",
        "--out",
        vt.to_str().unwrap(),
    ]);
    let table = vt.join("vtable.json");
    assert!(table.is_file());
    run_ok(&[
        "limit-chain",
        "--vtable",
        table.to_str().unwrap(),
        "--r",
        "2",
        "--reps",
        "500",
        "--seed",
        "7",
        "--out",
        tmp.path().join("lc").to_str().unwrap(),
    ]);
    let header = String::from_utf8(read(&tmp.path().join("lc"), "chain.csv")).unwrap();
    assert!(header.starts_with("replica,k,s1up,s2up,log_weight"));
}
