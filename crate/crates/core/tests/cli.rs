use std::process::Command;

use shuffle_amp::cli::{parse_curve_csv, parse_parallel_spec, CURVE_HEADER};
use shuffle_amp::mechanism::Mechanism;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_shuffle-amp")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(args: &[&str]) -> serde_json::Value {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "shuffle-amp/1");
    v
}

#[test]
fn bound_matches_experiments_row() {
    let v = json(&["bound", "--randomizer", "krr", "--k", "10", "--eps0", "1.15", "--n", "1000", "--eps", "0.10"]);
    assert!(v["delta_upper"].as_f64().unwrap() <= 1e-6);
    assert!(v["delta_lower"].as_f64().unwrap() <= v["delta_upper"].as_f64().unwrap());
}

#[test]
fn trivial_bound_is_zero() {
    let v = json(&["bound", "--randomizer", "krr", "--k", "2", "--eps0", "0.5", "--eps", "0.5", "--n", "100"]);
    assert_eq!(v["delta_upper"].as_f64().unwrap(), 0.0);
}

#[test]
fn decompose_reports_pqr() {
    let v = json(&["decompose", "--randomizer", "krr", "--k", "10", "--eps0", "2.0"]);
    let e = 2f64.exp();
    assert_eq!(v["pqr"]["q"].as_f64().unwrap(), 0.0);
    assert!((v["pqr"]["r"].as_f64().unwrap() - 8.0 / (e + 9.0)).abs() < 1e-15);
    assert!(v["components"].as_array().unwrap().len() >= 3);
}

#[test]
fn curve_csv_is_deterministic_and_round_trips() {
    let args = [
        "curve", "--randomizer", "krr", "--k", "10", "--n", "500", "--eps0-values", "0.5,1.5", "--format", "csv",
    ];
    let (code, first, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    let (_, second, _) = run(&args);
    assert_eq!(first, second);
    assert_eq!(first.lines().next().unwrap(), CURVE_HEADER);
    let rows = parse_curve_csv(&first).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.eps_lower.unwrap() <= r.eps_upper));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let mut with_output: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap();
    with_output.extend(["--output", p]);
    assert_eq!(run(&with_output).0, 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
}

#[test]
fn eps0_search_and_epsilon() {
    let v = json(&["eps0", "--randomizer", "krr", "--k", "10", "--n", "1000", "--eps-target", "0.5"]);
    assert!((v["eps0"].as_f64().unwrap() - 2.65).abs() <= 0.02);
    let v = json(&["epsilon", "--randomizer", "krr", "--k", "10", "--eps0", "2.65", "--n", "1000"]);
    assert!(v["eps"].as_f64().unwrap() <= 0.5 + 1e-3);
    assert!(v["report"]["delta_upper"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn compositions_from_flags() {
    json(&["bound", "--randomizer", "krr", "--k", "4", "--eps0", "2", "--joint", "3", "--adjacency-hamming", "1", "--n", "200", "--eps", "0.3"]);
    json(&["bound", "--eps0", "1", "--parallel", "0.5:krr(k=10),0.5:blh", "--n", "200", "--eps", "0.3"]);
    json(&["bound", "--randomizer", "oue", "--d", "6", "--eps0", "1", "--subsample", "0.5", "--n", "200", "--eps", "0.1"]);
    let v = json(&["gparv-dump", "--randomizer", "rappor", "--eps0", "1", "--eps", "0.2"]);
    assert!(!v["cases"].as_array().unwrap().is_empty());
}

#[test]
fn tabular_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    std::fs::write(&path, r#"{"inputs": [0, 1, 2], "outputs": [0, 1], "rows": [[0.6, 0.4], [0.4, 0.6], [0.5, 0.5]]}"#).unwrap();
    let p = path.to_str().unwrap();
    let v = json(&["bound", "--randomizer", "tabular", "--table-file", p, "--n", "100", "--eps", "0.05"]);
    assert!(v["delta_upper"].as_f64().unwrap() > 0.0);
    let (code, _, _) = run(&["bound", "--randomizer", "tabular", "--table-file", p, "--eps0", "0.1", "--n", "10", "--eps", "0.0"]);
    assert_eq!(code, 2);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["bound", "--randomizer", "nope", "--eps0", "1", "--n", "10", "--eps", "0.1"]).0, 2);
    assert_eq!(run(&["bound", "--eps0", "1", "--parallel", "0.7:krr(k=10),0.7:blh", "--n", "10", "--eps", "0.1"]).0, 2);
    let (code, _, err) = run(&["bound", "--randomizer", "krr", "--k", "3", "--eps0", "1", "--n", "100000000", "--eps", "0.0", "--step", "1e-7"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn parallel_spec_examples() {
    assert_eq!(parse_parallel_spec("0.5:krr(k=10),0.5:blh", 1.0).unwrap().len(), 2);
    let sub = parse_parallel_spec("0.8:krr(k=10),0.2:bot", 1.0).unwrap();
    assert_eq!(sub[1], (0.2, Mechanism::Bot));
    assert!(parse_parallel_spec("0.7:krr(k=10),0.7:blh", 1.0).is_err());
}
