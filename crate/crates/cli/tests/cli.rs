//! The command-line front end, end to end on small settings.

use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 12] = [
    "--set",
    "workload.workers=10",
    "--set",
    "workload.tasks=80",
    "--set",
    "workload.duration=180",
    "--set",
    "demand.train_windows=30",
    "--set",
    "demand.hyper.epochs=2",
    "--set",
    "tvf.epochs=3",
];

fn crowdplan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdplan")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = crowdplan(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small(cmd: &[&str]) -> Vec<String> {
    cmd.iter().chain(&SMALL).map(|s| s.to_string()).collect()
}

fn ok_small(dir: &Path, cmd: &[&str]) -> String {
    let args = small(cmd);
    ok(dir, &args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn settings_print_and_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["config", "--set", "workload.tasks=123", "--seed", "4", "--out", "c.toml"]);
    let json = ok(dir, &["config", "--config", "c.toml"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["workload"]["tasks"], 123);
    std::fs::write(dir.join("c.json"), json).unwrap();
    let again: serde_json::Value = serde_json::from_str(&ok(dir, &["config", "-c", "c.json"])).unwrap();
    assert_eq!(again, v);
}

#[test]
fn bad_settings_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for args in [
        &["config", "--set", "workload.colour=3"][..],
        &["config", "--set", "workload.tasks"],
        &["config", "--set", "workload.tasks=\"many\""],
        &["config", "--set", "demand.threshold=2"],
        &["simulate", "--strategy", "dta_tp"],
        &["simulate", "--strategy", "adaptive"],
        &["simulate", "--strategy", "fastest"],
        &["config", "--config", "missing.json"],
    ] {
        let out = crowdplan(dir, args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn stream_files_drive_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let msg = ok_small(dir, &["synth", "--out", "s.csv"]);
    assert!(msg.contains("10 workers"), "{msg}");
    for s in ["greedy", "fta", "dta"] {
        let out = format!("{s}.json");
        ok_small(dir, &["simulate", "--strategy", s, "--stream", "s.csv", "--out", &out]);
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join(&out)).unwrap()).unwrap();
        assert_eq!(r["strategy"], s);
        assert!(r["assigned"].as_u64().unwrap() > 0);
    }
    let stdout = ok(dir, &["report", "--input", "greedy.json", "fta.json", "dta.json", "--out", "agg"]);
    assert!(stdout.contains("3 reports"), "{stdout}");
    let summary = std::fs::read_to_string(dir.join("agg/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn full_pipeline_with_a_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok_small(dir, &["train-demand", "--out", "d.bin", "--curve", "d.csv"]);
    assert_eq!(std::fs::read_to_string(dir.join("d.csv")).unwrap().lines().count(), 3);
    ok_small(dir, &["collect-experience", "--demand", "d.bin", "--out", "e.bin"]);
    ok_small(dir, &["train-tvf", "--experience", "e.bin", "--out", "v.bin", "--curve", "v.csv"]);
    assert_eq!(std::fs::read_to_string(dir.join("v.csv")).unwrap().lines().count(), 4);
    let stdout = ok_small(
        dir,
        &[
            "bench",
            "--demand",
            "d.bin",
            "--tvf",
            "v.bin",
            "--out",
            "bench",
            "--set",
            "bench.runs=2",
            "--set",
            r#"bench.sweep={"axis":"workers","values":[5,10]}"#,
        ],
    );
    assert!(stdout.contains("20 reports"), "{stdout}");
    let by = std::fs::read_to_string(dir.join("bench/by_workers.csv")).unwrap();
    // Five strategies at two settings.
    assert_eq!(by.lines().count(), 11);
    assert!(by.lines().skip(1).all(|l| l.split(',').nth(2) == Some("2")));
}
