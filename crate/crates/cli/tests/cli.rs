use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nsni_core::config::{config2, RunConfig};
use serde_json::Value;
use tempfile::TempDir;

fn nsni(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nsni"));
    cmd.args(args).env_remove("NSNI_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn error_of(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(2), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    let body: Value = serde_json::from_slice(&out.stderr).expect("error is JSON");
    body["error"].clone()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path.display().to_string()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn gaussian_mi_at_zero_db_is_two_bits() {
    let out = nsni(&["mi", "--format", "gaussian", "--snr-db", "0"], &[]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2.000");
}

#[test]
fn snr_curve_is_unimodal_and_manifest_is_written() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let out = nsni(&["snr", "--preset", "config2", "--samples", "20000", "--powers", "-6:10:1", "--out", dir], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snr = column(&fs::read_to_string(tmp.path().join("snr.csv")).unwrap(), "snr_u_db");
    let peak = snr.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(peak > 0 && peak < snr.len() - 1, "peak on the grid edge: {snr:?}");
    assert!(snr[..=peak].windows(2).all(|w| w[1] > w[0]));
    assert!(snr[peak..].windows(2).all(|w| w[1] < w[0]));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "snr");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let run = |threads: &str| {
        let tmp = TempDir::new().unwrap();
        let args = ["coeffs", "--preset", "config2", "--samples", "5000", "--channels", "3", "--out", tmp.path().to_str().unwrap()];
        let out = nsni(&args, &[("RAYON_NUM_THREADS", threads)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(tmp.path().join("coeffs.csv")).unwrap()
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("2"));
}

#[test]
fn seed_comes_from_the_environment_unless_given() {
    let seed_of = |args: &[&str]| {
        let tmp = TempDir::new().unwrap();
        let mut all = vec!["snr", "--preset", "config2", "--samples", "2000", "--powers", "0", "--out", tmp.path().to_str().unwrap()];
        all.extend_from_slice(args);
        let out = nsni(&all, &[("NSNI_SEED", "77")]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
        manifest["seeds"]["mc"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&[]), 77);
    assert_eq!(seed_of(&["--seed", "5"]), 5);
}

#[test]
fn unknown_preset_is_a_config_error() {
    let err = error_of(&nsni(&["snr", "--preset", "config9"], &[]));
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("config9"));
}

#[test]
fn empty_config_file_is_a_parse_error_with_position() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("empty.json");
    fs::write(&path, "").unwrap();
    let err = error_of(&nsni(&["snr", "--config", path.to_str().unwrap()], &[]));
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("line 1"), "{err}");
}

#[test]
fn overlapping_channels_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config2();
    cfg.plan.channels = 3;
    cfg.plan.spacing_ghz = 40.0;
    let path = write_config(tmp.path(), &cfg);
    let err = error_of(&nsni(&["snr", "--config", &path], &[]));
    assert_eq!(err["kind"], "invalid_link");
}

#[test]
fn malformed_power_range_is_rejected() {
    let err = error_of(&nsni(&["snr", "--preset", "config2", "--powers", "5:1:x"], &[]));
    assert_eq!(err["kind"], "config");
}

#[test]
fn closed_form_suite_passes() {
    let tmp = TempDir::new().unwrap();
    let out = nsni(&["validate", "--preset", "config2", "--suite", "closed-forms", "--points", "50", "--out", tmp.path().to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("validate.json")).unwrap()).unwrap();
    let checks = report.as_array().unwrap();
    assert!(!checks.is_empty() && checks.iter().all(|c| c["pass"] == true));
}

#[test]
fn compare_on_a_short_link_agrees() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config2().with_span_count(2);
    cfg.plan.powers_dbm = "-4:2:2".into();
    cfg.mc.samples = 20_000;
    cfg.ssfm.symbols = 1 << 12;
    cfg.ssfm.guard_symbols = 128;
    cfg.ssfm.runs = 2;
    cfg.output_dir = Some(tmp.path().display().to_string());
    let path = write_config(tmp.path(), &cfg);
    let out = nsni(&["compare", "--config", &path], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(tmp.path().join("compare.csv")).unwrap();
    assert_eq!(column(&csv, "delta_u_db").len(), 4);
}
