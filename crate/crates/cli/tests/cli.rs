use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_trajprune");

fn run_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.current_dir(dir).args(args).env_remove("TRAJPRUNE_THREADS").env_remove("SOURCE_DATE_EPOCH");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn trajprune")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    run_env(dir, args, &[])
}

#[track_caller]
fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[track_caller]
fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// Small noisy dataset, one trajectory log and an entropy table.
fn pipeline() -> TempDir {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--per-class", "40", "--noise", "0.2", "--seed", "3", "--out", "ds"]);
    ok(d, &["train", "--data", "ds", "--out", "run.ltrj"]);
    ok(d, &["score", "--log", "run.ltrj", "--metric", "entropy", "--out", "ent.csv"]);
    tmp
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&run(tmp.path(), &["--version"])), 0);
    assert_eq!(code(&run(tmp.path(), &["compare", "--help"])), 0);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let cases: &[&[&str]] = &[
        &["bogus"],
        &["synth", "--noise", "1.5", "--out", "x"],
        &["score", "--metric", "nope", "--log", "a.ltrj", "--out", "s.csv"],
        &["validate", "--log", "missing.ltrj"],
        &["report"],
        &["prune", "--scores", "missing.csv", "--rate", "0.1", "--out", "p.csv"],
    ];
    for args in cases {
        let out = run(d, args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
    let out = run(d, &["synth", "--noise", "1.5", "--out", "x"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("noise"));
}

#[test]
fn train_rejects_zero_epochs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--per-class", "10", "--out", "ds"]);
    assert_eq!(code(&run(d, &["train", "--data", "ds", "--epochs", "0", "--out", "r.ltrj"])), 2);
}

#[test]
fn synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    for out in ["a", "b"] {
        ok(d, &["synth", "--per-class", "25", "--noise", "0.1", "--duplicates", "0.1", "--seed", "9", "--out", out]);
    }
    for f in ["manifest.jsonl", "features.lfea", "flips.csv", "duplicates.csv", "spec.json"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let manifest = read(d, "a/run.json");
    assert!(manifest.contains("\"subcommand\": \"synth\""));
    assert!(manifest.contains("sha256"));
}

#[test]
fn training_defaults_to_twelve_epochs_and_validates() {
    let tmp = pipeline();
    let out = ok(tmp.path(), &["validate", "--log", "run.ltrj"]);
    assert!(out.contains("12 epochs"), "{out}");
    assert!(out.contains("120 samples"), "{out}");
}

#[test]
fn jsonl_and_binary_logs_score_identically() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["train", "--data", "ds", "--out", "run.jsonl"]);
    ok(d, &["score", "--log", "run.jsonl", "--metric", "entropy", "--out", "ent2.csv"]);
    assert_eq!(read(d, "ent.csv"), read(d, "ent2.csv"));
}

#[test]
fn incompatible_selector_is_a_usage_error() {
    let tmp = pipeline();
    let d = tmp.path();
    let out = run(d, &["score", "--log", "run.ltrj", "--metric", "forgetting", "--at-epoch", "5", "--out", "f.csv"]);
    assert_eq!(code(&out), 2);
    let out = run(d, &["score", "--log", "run.ltrj", "--metric", "entropy", "--every-k", "2", "--upto", "4", "--out", "f.csv"]);
    assert_eq!(code(&out), 2);
    ok(d, &["score", "--log", "run.ltrj", "--metric", "aum", "--epochs", "1,2,3", "--out", "a.csv"]);
}

#[test]
fn truncated_log_is_rejected() {
    let tmp = pipeline();
    let d = tmp.path();
    let bytes = std::fs::read(d.join("run.ltrj")).unwrap();
    std::fs::write(d.join("cut.ltrj"), &bytes[..bytes.len() - 7]).unwrap();
    let out = run(d, &["validate", "--log", "cut.ltrj"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));
    assert_ne!(code(&run(d, &["score", "--log", "cut.ltrj", "--metric", "entropy", "--out", "x.csv"])), 0);
}

#[test]
fn purify_apply_and_retrain() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["purify", "--log", "run.ltrj", "--scores", "ent.csv", "--prune-rate", "0.25", "--out", "plan.csv"]);
    assert!(d.join("plan.json").exists());
    let summary: serde_json::Value = serde_json::from_str(&read(d, "plan.json")).unwrap();
    assert_eq!(summary["counts"]["budget"], 30);
    assert_eq!(summary["total_removed"], 30);

    ok(d, &["apply-plan", "--manifest", "ds/manifest.jsonl", "--plan", "plan.csv", "--out", "clean.jsonl"]);
    let kept = read(d, "clean.jsonl").lines().count();
    assert_eq!(kept, 120 - 30, "budget is ceil(0.25 * 120)");
    ok(d, &["train", "--data", "ds", "--manifest", "clean.jsonl", "--epochs", "3", "--out", "again.ltrj"]);
    assert!(ok(d, &["validate", "--log", "again.ltrj"]).contains("90 samples"));
}

#[test]
fn purify_requires_entropy_table() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["score", "--log", "run.ltrj", "--metric", "aum", "--out", "aum.csv"]);
    let out = run(d, &["purify", "--log", "run.ltrj", "--scores", "aum.csv", "--out", "plan.csv"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn prune_removes_lowest_scores() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["prune", "--scores", "ent.csv", "--rate", "0.1", "--out", "p.csv"]);
    let plan = read(d, "p.csv");
    let removed: Vec<u64> = plan
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",remove"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(removed.len(), 12);

    let mut scores: Vec<(f64, u64)> = read(d, "ent.csv")
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse().unwrap(), f[0].parse().unwrap())
        })
        .collect();
    scores.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut expect: Vec<u64> = scores[..12].iter().map(|s| s.1).collect();
    let mut got = removed.clone();
    expect.sort_unstable();
    got.sort_unstable();
    assert_eq!(got, expect);

    ok(d, &["prune", "--scores", "ent.csv", "--rate", "0.1", "--random", "4", "--out", "r.csv"]);
    ok(d, &["apply-plan", "--manifest", "ds/manifest.jsonl", "--plan", "r.csv", "--out", "r.jsonl"]);
    assert_eq!(read(d, "r.jsonl").lines().count(), 108);
}

#[test]
fn report_lists_exactly_top_k() {
    let tmp = pipeline();
    let d = tmp.path();
    let out = ok(d, &["report", "--scores", "ent.csv", "--manifest", "ds/manifest.jsonl", "--top", "7", "--csv", "r.csv"]);
    assert!(out.contains("Top 7 hardest of 120"), "{out}");
    let csv = read(d, "r.csv");
    assert_eq!(csv.lines().count(), 1 + 7);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("hardest,")));

    let out = ok(d, &["report", "--scores", "ent.csv", "--top", "1000"]);
    assert!(out.contains("Top 120 hardest"), "{out}");
}

#[test]
fn report_says_no_actions_for_empty_plan() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(
        d,
        &["purify", "--log", "run.ltrj", "--scores", "ent.csv", "--no-correct", "--no-outliers", "--out", "plan.csv"],
    );
    let out = ok(d, &["report", "--plan", "plan.csv"]);
    assert!(out.contains("no actions"), "{out}");
}

#[test]
fn compare_grid_shape() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--per-class", "30", "--noise", "0.1", "--out", "ds"]);
    ok(d, &["compare", "--data", "ds", "--seeds", "2", "--train-epochs", "4", "--out", "cmp.csv", "--cells", "cells.csv"]);
    let csv = read(d, "cmp.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 13, "{csv}");
    let none: Vec<_> = rows.iter().filter(|r| r[1] == "none").collect();
    assert_eq!(none.len(), 1);
    for method in ["entropy", "random"] {
        let zero = rows.iter().find(|r| r[1] == method && r[0] == "0").unwrap();
        assert_eq!(zero[2..], none[0][2..], "{method} at rate 0 must equal the unpruned baseline");
        let rates: Vec<&str> = rows.iter().filter(|r| r[1] == method).map(|r| r[0]).collect();
        assert_eq!(rates, ["0", "0.1", "0.2", "0.3", "0.4", "0.5"]);
    }
    assert_eq!(read(d, "cells.csv").lines().count(), 1 + 13 * 2);
    assert!(d.join("cmp.csv.run.json").exists());
}

#[test]
fn thread_variable_is_validated() {
    let tmp = pipeline();
    let d = tmp.path();
    for bad in ["0", "x", "-2"] {
        let out = run_env(d, &["validate", "--log", "run.ltrj"], &[("TRAJPRUNE_THREADS", bad)]);
        assert_eq!(code(&out), 2, "TRAJPRUNE_THREADS={bad}");
    }
    let out = run_env(d, &["validate", "--log", "run.ltrj"], &[("TRAJPRUNE_THREADS", "2")]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"threads\""));
}

#[test]
fn sequential_and_parallel_outputs_match() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["--sequential", "score", "--log", "run.ltrj", "--metric", "mal", "--out", "seq.csv"]);
    ok(d, &["score", "--log", "run.ltrj", "--metric", "mal", "--out", "par.csv"]);
    assert_eq!(read(d, "seq.csv"), read(d, "par.csv"));
}

#[test]
fn reruns_are_byte_identical_with_fixed_timestamp() {
    let tmp = pipeline();
    let d = tmp.path();
    let env = [("SOURCE_DATE_EPOCH", "1700000000")];
    for out in ["x.csv", "y.csv"] {
        let o = run_env(d, &["score", "--log", "run.ltrj", "--metric", "el2n", "--out", out], &env);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(read(d, "x.csv"), read(d, "y.csv"));
    let (x, y) = (read(d, "x.json"), read(d, "y.json"));
    assert!(x.contains("1700000000"));
    assert_eq!(x.replace("x.csv", ""), y.replace("y.csv", ""));
}

#[test]
fn run_manifest_override() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["--run-manifest", "m.json", "validate", "--log", "run.ltrj"]);
    let m: serde_json::Value = serde_json::from_str(&read(d, "m.json")).unwrap();
    assert_eq!(m["subcommand"], "validate");
    assert_eq!(m["inputs"][0]["path"], "run.ltrj");
}
