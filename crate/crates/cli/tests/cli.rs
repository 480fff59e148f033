use std::process::{Command, Output};

use serde_json::Value;

fn mpsent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpsent")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn ghz_path() -> String {
    format!("{}/../../data/ghz.json", env!("CARGO_MANIFEST_DIR"))
}

fn entropies(v: &Value) -> Vec<f64> {
    v["entropy"].as_array().unwrap().iter().map(|e| e["S"].as_f64().unwrap()).collect()
}

#[test]
fn analyze_toy_model_gives_log_p() {
    let v = json_of(&mpsent(&["analyze", "--toy", "p=3,q=1", "--N", "12", "--L", "3,6"]));
    for s in entropies(&v) {
        assert!((s - 3f64.ln()).abs() < 1e-9);
    }
    assert_eq!(v["symmetry"]["p"], 3);
    assert_eq!(v["symmetry"]["q"], 1);
}

#[test]
fn analyze_reports_in_base_two() {
    let v = json_of(&mpsent(&["analyze", "--toy", "p=3,q=1", "--L", "3", "--log-base", "2"]));
    assert!((entropies(&v)[0] - 3f64.log2()).abs() < 1e-9);
}

#[test]
fn analyze_ghz_file() {
    let v = json_of(&mpsent(&["analyze", "--file", &ghz_path(), "--L", "3"]));
    assert_eq!(v["canonical"]["blocks"].as_array().unwrap().len(), 2);
    assert!((entropies(&v)[0] - 2f64.ln()).abs() < 1e-9);
}

#[test]
fn analyze_random_is_injective_and_reproducible() {
    let args = ["analyze", "--random", "D=3,d=2", "--seed", "7", "--L", "2"];
    let a = mpsent(&args);
    let v = json_of(&a);
    assert_eq!(v["canonical"]["injective"], true);
    assert_eq!(v["canonical"]["blocks"].as_array().unwrap().len(), 1);
    assert_eq!(v["seed"], 7);
    assert_eq!(a.stdout, mpsent(&args).stdout);
}

#[test]
fn analyze_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = mpsent(&["analyze", "--toy", "p=2,q=1", "--L", "2", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!((entropies(&v)[0] - 2f64.ln()).abs() < 1e-9);
}

#[test]
fn verify_suite_single_section() {
    let out = mpsent(&["verify-suite", "--only", "lemma13", "--D", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with("summary")).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.starts_with("lemma13") && l.contains("D=6") && l.contains(" PASS ")));
}

#[test]
fn verify_suite_is_robust_to_peripheral_tolerance() {
    let args = ["verify-suite", "--only", "lemma5,lemma8,theorem1"];
    let base = mpsent(&args);
    let loose = mpsent(&[&args[..], &["--tolerance", "peripheral=1e-6"]].concat());
    assert_eq!(base.status.code(), Some(0));
    assert_eq!(loose.status.code(), Some(0));
    let verdicts = |o: &Output| -> Vec<String> {
        String::from_utf8_lossy(&o.stdout).lines().map(|l| l.split(" measured=").next().unwrap().to_string()).collect()
    };
    assert_eq!(verdicts(&base), verdicts(&loose));
}

#[test]
fn sweep_truncation_grid_has_no_violations() {
    let out = mpsent(&["sweep", "truncation", "--D", "4", "--L", "3,4"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>()[..3], ["seed", "D", "D_tilde"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3 * 2);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for r in &rows {
        let f = |name| r[col(name)].parse::<f64>().unwrap();
        assert!(f("actual1") <= f("bound1") + 1e-10);
        assert!(f("actual2") <= f("bound2") + 1e-10);
        assert!(f("lemma9_lhs") <= f("lemma9_rhs") + 1e-10);
    }
}

#[test]
fn sweep_empty_grid_is_header_only() {
    let out = mpsent(&["sweep", "truncation", "--D", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "seed,D,D_tilde,L,d,delta,bound1,actual1,bound2,actual2,lemma9_lhs,lemma9_rhs\n"
    );
}

#[test]
fn sweep_injectivity_counts_trials() {
    let out = mpsent(&["sweep", "injectivity", "--D", "2,4", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let total: usize = rows.iter().map(|r| r[7].parse::<usize>().unwrap()).sum();
    assert_eq!(total, 20);
    // concentrated at the dimension-counting length
    assert!(rows.iter().all(|r| r[4] == r[6]));
}

#[test]
fn exit_codes_by_class() {
    assert_eq!(mpsent(&["verify-suite", "--only", "lemma99"]).status.code(), Some(3));
    assert_eq!(mpsent(&["analyze", "--toy", "p=3"]).status.code(), Some(3));
    assert_eq!(mpsent(&["analyze", "--bogus"]).status.code(), Some(3));
    assert_eq!(mpsent(&["verify-suite", "--tolerance", "nonsense=1"]).status.code(), Some(3));
    assert_eq!(mpsent(&["sweep", "truncation", "--D", "4", "--L", "3", "--cap", "region=4"]).status.code(), Some(4));
    assert_eq!(mpsent(&["--help"]).status.code(), Some(0));
}
