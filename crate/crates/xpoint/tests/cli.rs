use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn xpoint(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xpoint"))
        .current_dir(dir)
        .env_remove("XPOINT_OUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_uniform(dir: &Path) {
    fs::write(dir.join("u.csv"), "2.1,2.1,2.1\n2.1,2.1,2.1\n2.1,2.1,2.1\n").unwrap();
}

#[test]
fn simulate_uniform_matrix() {
    let dir = tempfile::tempdir().unwrap();
    write_uniform(dir.path());
    let out = xpoint(dir.path(), &["simulate", "u.csv", "--delta", "0.01", "--out", "run", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(stdout["epsilon"].as_f64().unwrap() <= 1e-3);
    let summary = json(&dir.path().join("run/summary.json"));
    assert_eq!(stdout, summary);
    for key in ["computing_time_s", "epsilon", "lambda_h", "saturated_index"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    let trace = fs::read_to_string(dir.path().join("run/trace.csv")).unwrap();
    assert!(trace.starts_with("time_s,x_1,x_2,x_3\n"));
}

#[test]
fn negative_mismatch_exits_with_no_convergence() {
    let dir = tempfile::tempdir().unwrap();
    write_uniform(dir.path());
    let out = xpoint(dir.path(), &["simulate", "u.csv", "--delta", "-0.01", "--tmax", "1e-4", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
    let summary = json(&dir.path().join("run/summary.json"));
    assert!(summary["computing_time_s"].is_null());
    assert!(summary["lambda_h"].as_f64().unwrap() < 0.0);
}

#[test]
fn oversized_step_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_uniform(dir.path());
    let out = xpoint(dir.path(), &["simulate", "u.csv", "--alpha", "0.8", "--out", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn defaults_are_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_uniform(dir.path());
    let out = xpoint(dir.path(), &["simulate", "u.csv", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0));
    let m = json(&dir.path().join("run/manifest.json"));
    let p = &m["params"];
    assert_eq!(p["alpha"], 0.05);
    assert_eq!(p["l0"], 1e5);
    assert_eq!(p["gbw-hz"], 16e6);
    assert_eq!(p["vsupp"], 1.0);
    assert_eq!(p["x0"], 1e-3);
    assert_eq!(p["tmax"], 1e-3);
    assert_eq!(p["delta"], 0.01);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    write_uniform(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_xpoint"))
        .current_dir(dir.path())
        .env("XPOINT_OUT_DIR", "from-env")
        .args(["simulate", "u.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from-env/summary.json").exists());
}

#[test]
fn usage_and_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(xpoint(dir.path(), &["simulate"]).status.code(), Some(1));
    assert_eq!(xpoint(dir.path(), &["sweep", "--mode", "sideways"]).status.code(), Some(1));
    fs::write(dir.path().join("bad.csv"), "1,2\n3,oops\n").unwrap();
    let out = xpoint(dir.path(), &["simulate", "bad.csv", "--out", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:2:"));
    assert_eq!(xpoint(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "1.2,2.9,0.6\n3.9,1.5,2.1\n0.9,4.2,3.1\n").unwrap();
    let out = xpoint(dir.path(), &["simulate", "a.csv", "--delta", "0.02", "--x0", "2e-3", "--out", "one"]);
    assert_eq!(out.status.code(), Some(0));
    let out = xpoint(dir.path(), &["replay", "one/manifest.json", "--out", "two"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trace.csv", "summary.json", "manifest.json"] {
        assert_eq!(
            fs::read(dir.path().join("one").join(f)).unwrap(),
            fs::read(dir.path().join("two").join(f)).unwrap(),
            "{f}"
        );
    }
    // a changed input is refused
    fs::write(dir.path().join("a.csv"), "1,1,1\n1,1,1\n1,1,1\n").unwrap();
    let out = xpoint(dir.path(), &["replay", "one/manifest.json", "--out", "three"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_resumes_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--mode", "size", "--sizes", "3..6:3", "--trials", "2", "--deltas", "0.04", "--seed", "5"];
    let mut first = args.to_vec();
    first.extend(["--out", "s"]);
    let out = xpoint(dir.path(), &first);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[4/4]"));
    let rows = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);

    // truncate to simulate an interruption; the rerun completes the file
    let partial: Vec<&str> = rows.lines().take(2).collect();
    fs::write(dir.path().join("s/sweep.csv"), partial.join("\n") + "\n").unwrap();
    let out = xpoint(dir.path(), &first);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resuming"));
    assert_eq!(fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap(), rows);

    // different parameters do not mix with old rows
    let mut other = first.clone();
    other[8] = "0.02";
    assert_eq!(xpoint(dir.path(), &other).status.code(), Some(1));
    other.push("--fresh");
    assert_eq!(xpoint(dir.path(), &other).status.code(), Some(0));

    let out = xpoint(dir.path(), &["replay", "s/manifest.json", "--out", "r"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("s/sweep.csv")).unwrap(),
        fs::read(dir.path().join("r/sweep.csv")).unwrap()
    );
}

#[test]
fn delta_sweep_time_column_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "1.2,2.9,0.6\n3.9,1.5,2.1\n0.9,4.2,3.1\n").unwrap();
    let out = xpoint(dir.path(), &["sweep", "--mode", "delta", "--matrix", "a.csv", "--out", "d", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let times: Vec<f64> = report["aggregates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["computing_time_s"]["mean"].as_f64().unwrap())
        .collect();
    assert_eq!(times.len(), 6);
    assert!(times.windows(2).all(|p| p[1] < p[0]), "{times:?}");
}

#[test]
fn pagerank_small_subset() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e.txt"), "# toy web\n2 1\n3 1\n4 1\n1 2\n3 2\n5 3\n6 1\n").unwrap();
    let out = xpoint(dir.path(), &["pagerank", "e.txt", "--subset-n", "4", "--out", "p", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["pages"], 4);
    assert_eq!(summary["top"][0], 1);
    let rank = json(&dir.path().join("p/rank.json"));
    assert_eq!(rank["scores"].as_array().unwrap().len(), 4);
    let total: f64 = rank["scores"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(json(&dir.path().join("p/manifest.json"))["params"]["p"], 0.85);
}
