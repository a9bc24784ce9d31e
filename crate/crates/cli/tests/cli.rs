use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quasinoise"))
}

fn run_with(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const POISSON: &str = r#"
pipeline = "rmt_alpha"
seed = 11
[rmt]
ensemble = "poisson"
dim = 1000
realizations = 50
"#;

#[test]
fn rmt_poisson_run_reports_alpha_near_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", POISSON);
    let out = dir.path().join("out");
    let o = run_with(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let alpha = summary["alpha"].as_f64().unwrap();
    assert!((1.9..=2.1).contains(&alpha), "alpha = {alpha}");
    assert_eq!(summary["D_H"], 1000);
    assert_eq!(summary["seed"], 11);
    for f in ["power.csv", "delta.csv", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn same_seed_gives_identical_csv_and_manifest_reruns_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", POISSON);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for d in [&a, &b] {
        let o = run_with(&["run", "--config", &cfg, "--seed", "5", "--out", d.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let manifest = a.join("manifest.txt");
    let o = run_with(&["run", "--config", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["power.csv", "delta.csv", "summary.json"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f} differs between runs");
        assert_eq!(x, std::fs::read(c.join(f)).unwrap(), "{f} differs after manifest rerun");
    }
    let d = dir.path().join("d");
    let o = run_with(&["run", "--config", &cfg, "--seed", "6", "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(a.join("power.csv")).unwrap(), std::fs::read(d.join("power.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "pipeline = \"rmt_alpha\"\n[rmt]\ndim = 3\n");
    let o = run_with(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rmt.dim"));
    let o = run_with(&["validate-config", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_with(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let good = write(dir.path(), "good.toml", POISSON);
    let o = run_with(&["validate-config", "--config", &good]);
    assert!(o.status.success());
}

#[test]
fn numerical_failures_exit_with_three_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{POISSON}[averaging]\nwindow_len = 4096\n");
    let cfg = write(dir.path(), "w.toml", &text);
    let out = dir.path().join("o");
    let o = run_with(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("power_spectrum"));
}

#[test]
fn sweep_records_each_drive() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
pipeline = "floquet_alpha"
output_dir = "unused"
[model]
Omega = 0.95
E_b = 4.0
[grid]
n_points = 128
slices = 256
[selection]
retain = "all"
[sweep]
S = [0.0, 0.5]
"#;
    let cfg = write(dir.path(), "s.toml", text);
    let out = dir.path().join("s");
    let o = run_with(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("S_0.5").join("quasienergies.csv").exists());
    let empty = write(dir.path(), "e.toml", "pipeline = \"floquet_alpha\"\n[sweep]\nS = []\n");
    let o = run_with(&["sweep", "--config", &empty]);
    assert_eq!(o.status.code(), Some(2));
}
