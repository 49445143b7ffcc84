use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_robust-duality"));
    cmd.args(args);
    for key in ["TOL", "MAX_ITER", "SEED", "EPSILON_MIXING_LIST", "N_MAX", "CLAIM", "SCENARIO", "FORMAT", "REPORT"] {
        cmd.env_remove(format!("ROBUST_DUALITY_{key}"));
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn solve_binomial() {
    let f = fixture("binomial.toml");
    let out = run(&["solve", "--scenario", f.to_str().unwrap(), "--tol", "1e-6", "--format", "json"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["schema"], "robust-duality/report/v1");
    assert!(r["gap"].as_f64().unwrap().abs() <= 1e-6);
    assert_eq!(r["mixing"].as_array().unwrap().len(), 3);
}

#[test]
fn price_up_indicator() {
    let f = fixture("binomial.toml");
    let out = run(&["price", "--scenario", f.to_str().unwrap(), "--claim", "up-indicator", "--format", "json"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let p = r["price"]["p_b"].as_f64().unwrap();
    assert!((p - 1.0 / 3.0).abs() < 1e-4);
    assert!((r["price"]["oracle_price"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-4);
}

#[test]
fn unknown_claim_is_a_validation_error() {
    let f = fixture("binomial.toml");
    let out = run(&["price", "--scenario", f.to_str().unwrap(), "--claim", "nope"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn examples_table() {
    let out = run(&["examples", "--n-max", "12", "--format", "json"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let table = r["tables"].as_array().unwrap().iter().find(|t| t["name"] == "uniform integrability moduli").unwrap();
    for row in table["rows"].as_array().unwrap() {
        let n = row[0].as_u64().unwrap();
        if n <= 12 {
            assert_eq!(row[1], "1");
        }
    }
    assert!(String::from_utf8_lossy(&run(&["examples"], &[]).stdout).contains("PASS tail_modulus_constant"));
}

#[test]
fn validation_failures_name_the_assumption() {
    let out = run(&["solve", "--scenario", fixture("arbitrage.toml").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("assumption A3 violated"));
    let out = run(&["verify", "--scenario", fixture("bad_prior.toml").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("A1") && err.contains("line 13"), "{err}");
    let out = run(&["solve", "--scenario", "/nonexistent/file.toml"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn iteration_cap_is_a_tolerance_failure() {
    let f = fixture("trinomial_robust.toml");
    let out = run(&["solve", "--scenario", f.to_str().unwrap(), "--max-iter", "2"], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn flags_override_environment() {
    let f = fixture("binomial.toml");
    let args = ["solve", "--scenario", f.to_str().unwrap(), "--format", "json", "--epsilon-mixing-list", "0.01"];
    let r = json(&run(&args, &[("ROBUST_DUALITY_SEED", "5"), ("ROBUST_DUALITY_TOL", "1e-4")]));
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["config"]["tol"], 1e-4);
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "9"]);
    let r = json(&run(&with_flag, &[("ROBUST_DUALITY_SEED", "5")]));
    assert_eq!(r["config"]["seed"], 9);
}

#[test]
fn reports_are_reproducible() {
    let f = fixture("two_period.toml");
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let out = run(&["verify", "--scenario", f.to_str().unwrap(), "--report", p.to_str().unwrap()], &[]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
