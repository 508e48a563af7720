use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mwnc");

fn mwnc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn mwnc_env(args: &[&str], threads: &str) -> Output {
    Command::new(BIN).args(args).env("MWNC_THREADS", threads).output().expect("binary runs")
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> TempDir {
        let p = std::env::temp_dir().join(format!("mwnc-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }
    fn file(&self, name: &str, body: &str) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

const THREE_NODE: &str = r#"{"prp": [[0, 0.7, 0.9, 0.4], [0.7, 0, 0, 0.9], [0.9, 0, 0, 0.8], [0.4, 0.9, 0.8, 0]], "K": 2}"#;

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn plan_worked_example() {
    let dir = TempDir::new("plan");
    let topo = dir.file("three.json", THREE_NODE);
    let v = json(&mwnc(&["plan", "--topology", s(&topo), "--delta", "0.001"]));
    let cap = v["capacity"].as_f64().unwrap();
    assert!((0.59..=0.63).contains(&cap), "{cap}");
    let rounds = v["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), 2);
    assert_eq!(rounds[0]["relays"], serde_json::json!([1]));
    assert!((rounds[0]["phi"].as_f64().unwrap() - 1.0 / 7.0).abs() < 1e-2);
    assert!(v["assignment"].is_array());
}

#[test]
fn plan_single_receiver_has_no_rounds() {
    let dir = TempDir::new("single");
    let topo = dir.file("one.json", r#"{"prp": [[0, 0.4], [0.4, 0]], "K": 3}"#);
    let v = json(&mwnc(&["plan", "--topology", s(&topo)]));
    assert!(v["rounds"].as_array().unwrap().is_empty());
}

#[test]
fn plan_rejects_bad_input() {
    let dir = TempDir::new("bad");
    let garbage = dir.file("bad.json", "{\"prp\": [[0, 0.4]");
    let out = mwnc(&["plan", "--topology", s(&garbage)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = mwnc(&["plan", "--topology", s(&dir.0.join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = mwnc(&["plan"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_matches_golden_file() {
    let out = mwnc(&["analyze", "--c-hat", "0.8", "--v", "0.6", "--w", "20"]);
    assert!(out.status.success());
    let golden = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/analyze_0.8_0.6_20.json")).unwrap();
    assert_eq!(String::from_utf8(out.stdout.clone()).unwrap(), golden);
    let v = json(&out);
    assert!((v["theta0"].as_f64().unwrap() - 1.902).abs() < 1e-3);
    assert!((v["delay"]["d_bar"].as_f64().unwrap() - 3.5).abs() < 1e-9);
    assert!(v["p_loss"].is_number());
    assert!((v["complexity_bound"].as_f64().unwrap() - 74.6).abs() < 1e-9);
}

#[test]
fn analyze_error_codes() {
    assert_eq!(mwnc(&["analyze", "--c-hat", "0.6", "--v", "0.7"]).status.code(), Some(2));
    assert_eq!(mwnc(&["analyze", "--c-hat", "0.6", "--v", "0.6"]).status.code(), Some(2));
    assert_eq!(mwnc(&["analyze", "--c-hat", "0.6"]).status.code(), Some(2));
    let out = mwnc(&["analyze", "--c-hat", "0.8", "--v", "0.7999999999"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn analyze_accepts_rho() {
    let a = json(&mwnc(&["analyze", "--c-hat", "0.8", "--rho", "0.75"]));
    assert!((a["v"].as_f64().unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn sweep_is_byte_identical_across_runs_and_threads() {
    let args = [
        "sweep", "--nodes", "3", "--w", "4..8", "--rho", "0.7,0.9", "--slots", "4000", "--seed", "7",
    ];
    let a = mwnc_env(&args, "1");
    let b = mwnc_env(&args, "4");
    let c = mwnc(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "protocol,N,K,W,V,rho,seed,throughput_min,throughput_mean,delay_mean,delay_max,loss,ops_per_packet"
    );
    assert_eq!(lines.count(), 5 * 2);
}

#[test]
fn sweep_rejects_empty_grid() {
    assert_eq!(mwnc(&["sweep", "--w", "", "--slots", "100"]).status.code(), Some(2));
    assert_eq!(mwnc(&["sweep", "--rho", ",", "--slots", "100"]).status.code(), Some(2));
    assert_eq!(mwnc(&["sweep", "--protocols", "anc", "--slots", "100"]).status.code(), Some(2));
}

#[test]
fn bad_thread_cap_is_a_user_error() {
    let out = mwnc_env(&["analyze", "--c-hat", "0.8", "--v", "0.6"], "zero");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_to_out() {
    let dir = TempDir::new("sim");
    let topo = dir.file("three.json", THREE_NODE);
    let out_path = dir.0.join("metrics.json");
    let args = [
        "simulate", "--topology", s(&topo), "--protocols", "mwncast", "--v", "57/100", "--slots", "5000", "--out",
        s(&out_path),
    ];
    let out = mwnc(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let first = std::fs::read(&out_path).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["protocol"], "mwncast");
    assert_eq!(v["receivers"].as_array().unwrap().len(), 3);
    assert!(mwnc(&args).status.success());
    assert_eq!(std::fs::read(&out_path).unwrap(), first);
}

#[test]
fn simulate_several_protocols_gives_an_array() {
    let v = json(&mwnc(&["simulate", "--nodes", "4", "--protocols", "mwnc,rlnc", "--slots", "3000"]));
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert_eq!(arr[1]["protocol"], "rlnc");
}

#[test]
fn compare_prints_csv_and_summary() {
    let args = [
        "compare", "--nodes", "6", "--k", "1,2", "--protocols", "mwncast,coop-rlnc", "--slots", "4000", "--seed", "3",
    ];
    let out = mwnc(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let summary = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(summary.contains("mwncast vs coop-rlnc: throughput gain"), "{summary}");
    let again = mwnc(&args);
    assert_eq!(out.stdout, again.stdout);
    assert_eq!(out.stderr, again.stderr);

    let single = mwnc(&["compare", "--nodes", "3", "--protocols", "mwnc", "--slots", "2000"]);
    assert!(single.status.success());
    assert!(!String::from_utf8_lossy(&single.stderr).contains("gain"));
}

#[test]
fn plan_is_deterministic() {
    let dir = TempDir::new("det");
    let topo = dir.file("three.json", THREE_NODE);
    let a = mwnc(&["plan", "--topology", s(&topo)]);
    let b = mwnc(&["plan", "--topology", s(&topo)]);
    assert_eq!(a.stdout, b.stdout);
}
