//! End-to-end checks of the `randcert` binary: output formats, determinism
//! and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn randcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randcert")).args(args).env_remove("RANDCERT_THREADS").output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn quadrature_two_points() {
    let out = randcert(&["quadrature", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, ["t,w", "0.333333333333,0.75", "1,0.25"]);
    assert!(text.lines().next().unwrap().starts_with("# "));
}

#[test]
fn quadrature_rejects_bad_order() {
    assert_eq!(randcert(&["quadrature", "1"]).status.code(), Some(2));
}

#[test]
fn simulate_and_certify_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for f in [&a, &b] {
        let out = randcert(&["simulate", "--seed", "0", "--rounds", "20000", "--repetitions", "2", "-o", path(f)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ra, rb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let text = String::from_utf8(ra).unwrap();
    assert!(text.trim_start().starts_with("{\n  \"provenance\""), "{}", &text[..80]);
    assert!(text.contains("ChaCha20"));

    let (ca, cb) = (dir.path().join("ca.json"), dir.path().join("cb.json"));
    for f in [&ca, &cb] {
        let out = randcert(&["certify", path(&a), "--restarts", "2", "-o", path(f)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ra, rb) = (std::fs::read(&ca).unwrap(), std::fs::read(&cb).unwrap());
    assert_eq!(ra, rb);
    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["result"]["repetitions"].as_array().unwrap().len(), 2);
    assert_eq!(report["result"]["summary"][0]["name"], "hmin");
}

#[test]
fn empty_statistics_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("empty.txt");
    std::fs::write(&f, "").unwrap();
    let out = randcert(&["certify", path(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn malformed_table_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.txt");
    std::fs::write(&f, "# header\n0.5 0 0.5\n0.5 0.5\n0 0.5 0\n").unwrap();
    let out = randcert(&["certify", path(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unreproducible_statistics_exit_three_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("table.txt");
    // Perfect discrimination of the two test states with 90% success is impossible at overlap 0.85.
    std::fs::write(&f, "0.9 0 0.3\n0 0.9 0.3\n0.1 0.1 0.4\n").unwrap();
    let out = randcert(&["certify", path(&f), "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--nearest-feasible"));
    let out = randcert(&["certify", path(&f), "--restarts", "2", "--nearest-feasible"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["result"]["relaxation"].as_f64().unwrap() > 0.1);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "alpha = 0.5\nbeta0 = 0.7\nbeta1 = 0.7\nrestarts = 2\n").unwrap();
    let table = dir.path().join("t.txt");
    std::fs::write(&table, "1397 0 2796\n0 1397 2796\n8603 8603 4408\n").unwrap();
    let out = randcert(&["certify", path(&table), "-c", path(&cfg), "--alpha", "0.4", "--beta", "0.66"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["provenance"]["config"]["alpha"], 0.4);
    assert_eq!(report["provenance"]["config"]["beta1"], 0.66);
    assert_eq!(report["provenance"]["config"]["restarts"], 2);
    assert_eq!(report["result"]["rounds"], 30000.0);

    std::fs::write(&cfg, "alpha = 0.5\nunknown_key = 1\n").unwrap();
    let out = randcert(&["certify", path(&table), "-c", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn scan_rows_are_sorted_with_provenance() {
    let out = randcert(&["scan", "--alpha-range", "0.3:0.5", "--beta-range", "0.6:0.7", "--grid", "2x2", "--restarts", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("# command = scan"));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("alpha"))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>(), [(0.3, 0.6), (0.3, 0.7), (0.5, 0.6), (0.5, 0.7)]);
    assert!(rows.iter().all(|r| r[3] >= r[2] - 1e-3));
}

#[test]
fn scan_rejects_oversized_grid() {
    assert_eq!(randcert(&["scan", "--grid", "201x2"]).status.code(), Some(2));
    assert_eq!(randcert(&["scan", "--alpha-range", "0:2"]).status.code(), Some(2));
}

#[test]
fn finite_size_table() {
    let out = randcert(&["finite-size", "--n-list", "1e7,1e4", "--restarts", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "N,hmin_raw,aep,eat,alpha,extractable");
    assert!(rows[1].starts_with("10000,") && rows[2].starts_with("10000000,"));
}

#[test]
fn thread_variable_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_randcert"))
        .args(["quadrature", "3"])
        .env("RANDCERT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_randcert"))
        .args(["quadrature", "3"])
        .env("RANDCERT_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}
