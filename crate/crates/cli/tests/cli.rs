use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_permacheck"));
    c.env_remove("PERMACHECK_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const TRI3: &str = "1,0.6,0\n0.6,1,0.6\n0,0.6,1\n";

#[test]
fn identity_kernel_holds() {
    let d = TempDir::new().unwrap();
    let k = write(&d, "id.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let out = run(&["check-id", "--input", s(&k)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["outcome"], "holds");
}

#[test]
fn tridiagonal_kernel_fails_with_odd_cycle() {
    let d = TempDir::new().unwrap();
    let k = write(&d, "tri.csv", TRI3);
    let out = run(&["check-id", "--kernel", s(&k)]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["result"]["method"], "bapat-exact");
    assert_eq!(r["result"]["verdict"]["witness"]["kind"], "odd-cycle");
}

#[test]
fn minus_one_permanent_prints_value() {
    let d = TempDir::new().unwrap();
    let k = write(&d, "a.csv", "1,2\n3,4\n");
    let out = run(&["perm", "--input", s(&k), "--beta", "-1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "-2");
}

#[test]
fn usage_and_input_errors_exit_2() {
    let out = run(&["check-id", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["exit_code"], 2);

    let out = run(&["check-id", "--input", "/nonexistent/kernel.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "io");
}

#[test]
fn recurrent_chain_is_a_numeric_failure() {
    let d = TempDir::new().unwrap();
    let q = write(&d, "q.csv", "0.5,0.5\n0.5,0.5\n");
    let out = run(&["green", "gen", "--chain", s(&q)]);
    assert_eq!(out.status.code(), Some(3));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["exit_code"], 3);
}

#[test]
fn green_gen_and_check() {
    let d = TempDir::new().unwrap();
    let q = write(&d, "q.csv", "0,0.5\n0.5,0\n");
    let g = d.path().join("g.csv");
    let out = run(&["green", "gen", "--chain", s(&q), "--out", s(&g)]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["green", "check", "--input", s(&g)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["outcome"], "holds");
}

#[test]
fn restrict_keeps_one_based_indices() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "g.csv", "3,1,2\n1,4,1\n2,1,5\n");
    let out_csv = d.path().join("r.csv");
    let out = run(&["green", "restrict", "--input", s(&g), "--keep", "1,3", "--out", s(&out_csv)]);
    assert!(out.status.code().is_some());
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|x| x.trim().parse().unwrap()).collect())
        .collect();
    assert_eq!(rows, vec![vec![3.0, 2.0], vec![2.0, 5.0]]);
    let out = run(&["green", "restrict", "--input", s(&g), "--keep", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shifted_pair_examples() {
    let out = run(&["shifted-pair", "--var-x", "1", "--cov", "-0.5", "--var-y", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["shifted-pair", "--var-x", "1", "--cov", "0", "--var-y", "1"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn render_round_trip_and_table() {
    let d = TempDir::new().unwrap();
    let k = write(&d, "tri.csv", TRI3);
    let rep = d.path().join("rep.json");
    let out = run(&["check-id", "--input", s(&k), "--report", s(&rep)]);
    assert_eq!(out.status.code(), Some(1));
    let original = std::fs::read_to_string(&rep).unwrap();

    let out = run(&["render", "--input", s(&rep)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), original);

    let out = run(&["--format", "table", "render", "--input", s(&rep)]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("# check-id\tfails\n"), "{table}");

    let stale = write(&d, "old.json", &original.replacen("\"schema\": 1", "\"schema\": 0", 1));
    let out = run(&["render", "--input", s(&stale)]);
    assert_eq!(out.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "schema-mismatch");
}

fn assoc_report(extra: &[&str], env_seed: Option<&str>) -> Value {
    let d = TempDir::new().unwrap();
    let k = write(&d, "k.csv", "1,0.3\n0.3,1\n");
    let mut c = bin();
    c.args(["check-assoc", "--kernel", s(&k), "--n", "2e4"]).args(extra);
    if let Some(seed) = env_seed {
        c.env("PERMACHECK_SEED", seed);
    }
    let out = c.output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    json(&out)
}

#[test]
fn seed_flag_overrides_environment() {
    assert_eq!(assoc_report(&[], None)["result"]["seed"], 42);
    assert_eq!(assoc_report(&[], Some("7"))["result"]["seed"], 7);
    assert_eq!(assoc_report(&["--seed", "9"], Some("7"))["result"]["seed"], 9);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let d = TempDir::new().unwrap();
    let k = write(&d, "k.csv", "2,0.5,0.2\n0.5,1,0.3\n0.2,0.3,1.5\n");
    let report = |threads: &str| {
        let out = run(&["--threads", threads, "check-assoc", "--kernel", s(&k), "--n", "50000", "--joint"]);
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    assert_eq!(report("1"), report("3"));
}

#[test]
fn sample_writes_a_batch() {
    let d = TempDir::new().unwrap();
    let k = write(&d, "k.csv", "1,0.3\n0.3,1\n");
    let batch = d.path().join("b.bin");
    let out = run(&["sample", "--kernel", s(&k), "--k", "2", "--n", "1000", "--out", s(&batch)]);
    assert_eq!(out.status.code(), Some(0));
    let len = std::fs::metadata(&batch).unwrap().len();
    assert!(len > 1000 * 2 * 8);
}
