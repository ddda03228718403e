use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sktlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sktlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SKTLAB_THREADS")
        .output()
        .unwrap()
}

#[test]
fn print_config_shows_the_preset_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = sktlab(&["rough", "--print-config", "--seed", "7"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("study = \"rough\""));
    assert!(text.contains("seed = 7"));
    assert!(!dir.path().join("results").exists());
}

#[test]
fn stability_run_writes_results_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = sktlab(&["stability", "--out", "res", "--threads", "2", "--no-timing"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("res/stability.csv")).unwrap();
    assert!(csv.starts_with("study,M,N,R,T,seed,"));
    let meta: String = fs::read_to_string(dir.path().join("res/stability.meta.json")).unwrap();
    assert!(meta.contains("\"threads\": 2"));
    assert!(meta.contains("\"threads_source\": \"cli\""));
    assert!(String::from_utf8(out.stdout).unwrap().contains("[PASS] smallness_margin"));
}

#[test]
fn output_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("qv.toml"), "replicas = 24\n").unwrap();
    for (k, sub) in [("1", "a"), ("4", "b")] {
        let out = sktlab(
            &["qv", "--config", "qv.toml", "--threads", k, "--no-timing", "--format", "json", "--out", sub],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let a = fs::read(dir.path().join("a/qv.json")).unwrap();
    let b = fs::read(dir.path().join("b/qv.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "replicas = 0\n").unwrap();
    let out = sktlab(&["qv", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("wrong.toml"), "study = \"rough\"\n").unwrap();
    assert_eq!(sktlab(&["qv", "--config", "wrong.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(sktlab(&["qv", "--threads", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn smallness_violation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "[params]\na12 = 2.0\na21 = 2.0\n").unwrap();
    let out = sktlab(&["gap-vs-n", "--config", "s.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn uncertified_stability_still_reports_norms() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "[params]\na12 = 2.0\na21 = 2.0\n").unwrap();
    let out = sktlab(&["stability", "--config", "s.toml", "--out", "r"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("[FAIL] certified"));
    assert!(dir.path().join("r/stability.csv").exists());
}

#[test]
fn missing_config_file_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = sktlab(&["qv", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn thread_budget_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sktlab"))
        .args(["stability", "--out", "r"])
        .env("SKTLAB_THREADS", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let meta = fs::read_to_string(dir.path().join("r/stability.meta.json")).unwrap();
    assert!(meta.contains("\"threads_source\": \"env\""));
}
