use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_projstab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap().to_string();
    let mut args = vec!["synth", "--order", "24", "--fmax", "5e9", "--points", "2500", "--out", &p];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stable_fixture_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "stable.csv", &["--seed", "4"]);
    let rep = dir.path().join("r.json");
    let out = run(&["analyze", &input, "--report", rep.to_str().unwrap(), "--fail-on-unstable"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&rep);
    assert_eq!(r["entries"][0]["verdict"], "stable");
    let e = &r["entries"][0]["energy"];
    let sum = e["stable_fraction"].as_f64().unwrap() + e["unstable_fraction"].as_f64().unwrap();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn planted_instability_exits_two_with_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "u.csv", &["--unstable", "1e9,6.283185307e7", "--delay", "2e-9", "--seed", "3"]);
    let rep = dir.path().join("r.json");
    let out = run(&["analyze", &input, "--report", rep.to_str().unwrap(), "--fail-on-unstable", "--interp", "pade", "--atten-db", "120", "--poles"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&rep);
    let entry = &r["entries"][0];
    assert_eq!(entry["verdict"], "unstable");
    let peak = entry["peak_frequency"].as_f64().unwrap();
    assert!((peak - 1e9).abs() < 1e7, "{peak}");
    let poles = entry["poles"]["poles"].as_array().unwrap();
    assert!(poles.iter().all(|p| p["reliable"].is_boolean()));

    let quiet = run(&["analyze", &input, "--report", rep.to_str().unwrap()]);
    assert_eq!(quiet.status.code(), Some(0));
}

#[test]
fn report_goes_to_stdout_without_path() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "s.csv", &[]);
    let out = run(&["analyze", &input]);
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["entries"].as_array().unwrap().len(), 1);
}

#[test]
fn several_inputs_get_own_entries_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", &["--seed", "1"]);
    let b = synth(dir.path(), "b.csv", &["--seed", "2"]);
    let rep = dir.path().join("r.json");
    let curves = dir.path().join("c.csv");
    let out = run(&["analyze", &a, &b, "--report", rep.to_str().unwrap(), "--curves", curves.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&rep);
    let entries = r["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["label"], "synth-1");
    assert_eq!(entries[1]["label"], "synth-2");
    for name in ["c_0_synth-1.csv", "c_1_synth-2.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().next(), Some("freq_hz,stable_db,unstable_db,error_db"));
        assert_eq!(text.lines().count(), 2501);
    }
}

#[test]
fn reports_are_identical_apart_from_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "s.csv", &["--unstable", "2e9,1e8"]);
    let mut texts = Vec::new();
    for i in 0..2 {
        let rep = dir.path().join(format!("r{i}.json"));
        assert!(run(&["analyze", &input, "--poles", "--report", rep.to_str().unwrap()]).status.success());
        let mut v = report(&rep);
        v["timestamp"] = Value::from(0);
        texts.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn synth_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", &["--seed", "9"]);
    let b = synth(dir.path(), "b.csv", &["--seed", "9"]);
    let c = synth(dir.path(), "c.csv", &["--seed", "10"]);
    let read = |p: &str| std::fs::read_to_string(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a).lines().nth(3), read(&c).lines().nth(3));
}

#[test]
fn poles_subcommand_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "u.csv", &["--unstable", "1e9,6.283185307e7", "--seed", "3"]);
    let out = run(&["poles", &input, "--interp", "pade", "--atten-db", "120"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains("freq_hz"));
    assert!(text.lines().count() >= 3, "{text}");
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "freq_hz,re_ohm,im_ohm\n2,1,0\n1,1,0\n").unwrap();
    let out = run(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let missing = run(&["analyze", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));

    let input = synth(dir.path(), "s.csv", &[]);
    let out = run(&["analyze", &input, "--threshold-db=-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["analyze", &input, "--nfft", "1000"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["analyze", &input, "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
