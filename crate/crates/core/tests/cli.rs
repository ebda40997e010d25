use std::path::Path;
use std::process::{Command, Output};

use bpsmooth::experiments::CSV_HEADER;
use bpsmooth::generators::{check_event_e, sample, FamilySpec};

fn bpsmooth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpsmooth")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_finds_the_k22_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "k22.txt", "bip 2 2\n1 1 0.9\n1 2 0.6\n2 1 0.7\n2 2 0.2\n");
    let trace = dir.path().join("trace.csv");
    let out = bpsmooth(&["solve", "--instance", &inst, "--oracle", "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("assignment: u1->v2 u2->v1"), "{text}");
    assert!(text.contains("matched_oracle: true"), "{text}");
    let trace = std::fs::read_to_string(trace).unwrap();
    assert!(trace.starts_with("t,node,beliefs\n"));
}

#[test]
fn solve_reports_flow_gap() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(
        dir.path(),
        "flow.txt",
        "flow 2 2\nnode 1 1\nnode 2 -1\n1 2 1 0.2\n1 2 1 0.7\n",
    );
    let out = bpsmooth(&["solve", "--instance", &net, "--oracle"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["Delta: ", "delta: "] {
        let v: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("no {key} line in {text}"))
            .parse()
            .unwrap();
        assert!((v - 0.5).abs() < 1e-12, "{text}");
    }
}

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let cfg = write(dir.path(), "tau.cfg", "kind = tau_tail\nfamily = uniform_k22\ntrials = 20\nseed = 5\nt_max = 1000\n");
    let out = bpsmooth(&["run", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 20);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "kind = tau_tail\nfamily = nonsense\n");
    let out = bpsmooth(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn check_lemmas_rejects_other_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tau.cfg", "kind = tau_tail\nfamily = uniform_k22\ntrials = 1\n");
    assert_eq!(bpsmooth(&["check-lemmas", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn failed_check_exits_two() {
    // One trial that lands in the rare event is far outside 4 sigma.
    let eps = 0.125;
    let seed = (0u64..)
        .find(|&s| check_event_e(&sample(&FamilySpec::UniformK22, s, 0).unwrap(), eps).unwrap())
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "event.cfg",
        &format!("kind = event_freq\nfamily = uniform_k22\neps = {eps}\ntrials = 1\nseed = {seed}\n"),
    );
    let out = bpsmooth(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn help_exits_zero() {
    assert!(bpsmooth(&["--help"]).status.success());
    assert_eq!(bpsmooth(&["frobnicate"]).status.code(), Some(1));
}
