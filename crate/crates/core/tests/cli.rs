use std::path::{Path, PathBuf};
use std::process::Command;

fn cvqe(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cvqe")).args(args).output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "schema_version = 1\n[model]\nn_orbitals = 4\nn_electrons = 2\ndmu = 0.5\nt = 1.0\nv = 1.0\n[schedule]\nntau = [3, 6]\ndtau = [0.1]\n[sampling]\nshots = 512\n";

#[test]
fn scan_and_oracle_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().to_str().unwrap();
    let o = cvqe(&["scan", "--config", &cfg, "--out", out, "--seeds", "2", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let scan = dir.path().join("scan.csv");
    let o = cvqe(&["oracle", "--config", &cfg, "--out", out, "--scan", scan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("oracle.json").exists());
}

#[test]
fn compile_and_compare_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(cvqe(&["compile", "--config", &cfg, "--out", out]).status.code(), Some(0));
    assert!(dir.path().join("circuit_000.qasm").exists());
    let cmp = config("compare_q4.toml");
    assert_eq!(cvqe(&["compare-methods", "--config", cmp.to_str().unwrap(), "--out", out]).status.code(), Some(0));
    assert!(dir.path().join("compare.json").exists());
}

#[test]
fn weights_prints_table() {
    let o = cvqe(&["weights", "--order", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("pattern,w_num,w_den,wbar_num,wbar_den,tau_power"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(cvqe(&["scan", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    let bad = write_config(dir.path(), &SMALL.replace("n_electrons = 2", "n_electrons = 9"));
    assert_eq!(cvqe(&["scan", "--config", &bad, "--out", out]).status.code(), Some(2));
    let unknown = write_config(dir.path(), &format!("{SMALL}colour = 3\n"));
    assert_eq!(cvqe(&["scan", "--config", &unknown, "--out", out]).status.code(), Some(2));
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(cvqe(&["scan", "--config", &cfg, "--out", out, "--seeds", "0"]).status.code(), Some(2));
}

#[test]
fn capacity_errors_exit_3() {
    assert_eq!(cvqe(&["weights", "--order", "9"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let big = write_config(dir.path(), &SMALL.replace("n_orbitals = 4", "n_orbitals = 30"));
    assert_eq!(cvqe(&["scan", "--config", &big, "--out", out]).status.code(), Some(3));
}
