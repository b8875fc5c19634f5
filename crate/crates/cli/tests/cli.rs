use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rankexplain"))
}

fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("instances/golden_sum_example.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &tempfile::TempDir, name: &str, contents: &[u8]) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn shap_on_golden_instance() {
    let g = golden();
    let out = json(&run(&["shap", "--instance", g.to_str().unwrap(), "--column", "1"]));
    assert_eq!(out["value"], "3/4");
    assert_eq!(out["decimal"], "0.75");
    assert_eq!(out["method"], "exact:interpolation+pairwise");
    assert_eq!(out["column"], 1);

    let out = json(&run(&["shap", "--instance", g.to_str().unwrap(), "--effect", "position", "--row", "4"]));
    let values: Vec<&str> = out["results"].as_array().unwrap().iter().map(|r| r["value"].as_str().unwrap()).collect();
    assert_eq!(values, ["3/8", "-9/8"]);
}

#[test]
fn expectation_and_ranking() {
    let g = golden();
    let g = g.to_str().unwrap();
    let out = json(&run(&["expect", "--instance", g]));
    assert_eq!(out["value"], "3/2");
    assert_eq!(out["method"], "exact:pairwise-linearity");
    let out = json(&run(&["expect", "--instance", g, "--effect", "position", "--row", "4"]));
    assert_eq!(out["value"], "-3/4");
    let out = json(&run(&["rank", "--instance", g, "--weights", "1,2"]));
    assert_eq!(out["ranked_rows"], serde_json::json!([4, 1, 2, 3]));
    let out = json(&run(&["prec", "--instance", g, "--first", "4", "--second", "1"]));
    assert_eq!(out["value"], "1/4");
}

#[test]
fn sum_binary_is_refused_in_exact_mode() {
    let g = golden();
    let out = run(&[
        "expect", "--instance", g.to_str().unwrap(), "--encoding", "binary", "--max-weight-points", "1", "--max-perm-rows", "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sum") && err.contains("binary") && err.contains("knapsack"), "{err}");

    // auto mode samples instead
    let out = json(&run(&[
        "expect", "--instance", g.to_str().unwrap(), "--encoding", "binary", "--mode", "auto", "--max-weight-points", "1",
        "--max-perm-rows", "1",
    ]));
    assert_eq!(out["method"], "approx:monte-carlo");
}

#[test]
fn resource_cap_and_input_errors() {
    let g = golden();
    let g = g.to_str().unwrap();
    let out = run(&["expect", "--instance", g, "--max-dp-states", "1", "--max-weight-points", "1", "--max-perm-rows", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_dp_states"));
    assert_eq!(run(&["expect", "--instance", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(run(&["shap", "--instance", g, "--column", "3"]).status.code(), Some(2));
    assert_eq!(run(&["expect", "--instance", g, "--effect", "position", "--row", "9"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.json", br#"{"matrix": [["1", "x"]], "ranking": {"score": "sum"}}"#);
    assert_eq!(run(&["rank", "--instance", &bad]).status.code(), Some(2));
}

#[test]
fn sampling_is_reproducible() {
    let g = golden();
    let args = ["sample", "--instance", g.to_str().unwrap(), "--seed", "42"];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let out = json(&a);
    assert_eq!(out["plan"]["seed"], 42);
    assert_eq!(out["plan"]["samples"], 38148);
    assert!(out["plan"]["rng"].as_str().unwrap().contains("ChaCha8"));

    let args = ["sample", "--instance", g.to_str().unwrap(), "--target", "shap", "--column", "2", "--samples", "5000"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    assert_eq!(json(&run(&args))["plan"]["samples"], 5000);
}

#[test]
fn generated_instances_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    // positive CNF with 10 models out of 16
    let out = run(&["gen-cnf", "--variables", "4", "--clauses", "1,2,4;1,3;2,3,4"]);
    let first = json(&out);
    let path = write(&dir, "cnf.json", &out.stdout);
    // the distinguished row starts on top, so E[change] = 10/16 − 1
    assert_eq!(json(&run(&["expect", "--instance", &path]))["value"], "-3/8");
    // generation is deterministic
    let again = run(&["gen-cnf", "--variables", "4", "--clauses", "1,2,4;1,3;2,3,4"]);
    assert_eq!(first, json(&again));

    let out = run(&["gen-knapsack", "--b", "1,2", "--d", "2"]);
    let path = write(&dir, "knap.json", &out.stdout);
    assert_eq!(json(&run(&["expect", "--instance", &path]))["value"], "3/8");

    let mut values = Vec::new();
    for copy in ["1", "2"] {
        let out = run(&["gen-md", "--variables", "4", "--clauses", "1,2,4;1,3;2,3,4", "--effect", "hamming", "--copy", copy]);
        let path = write(&dir, &format!("md{copy}.json"), &out.stdout);
        let v = json(&run(&["expect", "--instance", &path]));
        values.push(rankexplain::parse_rational(v["value"].as_str().unwrap()).unwrap());
    }
    assert_eq!(&values[1] - &values[0], rankexplain::rat(6, 16));

    assert_eq!(run(&["gen-cnf", "--variables", "2", "--clauses", "0,1"]).status.code(), Some(2));
}

#[test]
fn matrix_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir, "m.csv", b"20,26\n30,13\n40,0\n0,39\n");
    let out = json(&run(&["rank", "--matrix-csv", &csv, "--ranking", "sum-dsc"]));
    assert_eq!(out["ranked_rows"], serde_json::json!([1, 2, 3, 4]));
    let out = json(&run(&["shapley", "--matrix-csv", &csv, "--ranking", "sum-dsc", "--effect", "kendall_tau"]));
    assert_eq!(out["results"].as_array().unwrap().len(), 2);
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    let report = json(&out);
    assert_eq!(report["failed"], 0);
    assert!(report["passed"].as_u64().unwrap() > 100);
}
