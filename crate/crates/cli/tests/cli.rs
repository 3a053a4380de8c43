//! End-to-end behavior of the binary: exit codes, output contracts,
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motoo-lab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("motoo-lab-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_reference_config(dir: &Path) -> PathBuf {
    let path = dir.join("ref.ini");
    std::fs::write(
        &path,
        "[model]\n\
         family = rational\n\
         kappa = 1\n\
         rho = 1\n\
         mu = 0\n\
         sigma = 1\n\
         k1_sq = 1\n\
         k2_sq = 4\n\
         x0 = 0\n\
         \n\
         [run]\n\
         T = 100\n\
         dt = 0.01\n\
         paths = 4\n\
         seed = 11\n\
         checkpoints = 10, 50, 100\n\
         fc_horizons = 1.5, 3\n",
    )
    .unwrap();
    path
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited with a code")
}

#[test]
fn no_arguments_is_usage_error() {
    let out = bin().output().unwrap();
    assert_eq!(exit_code(&out), 64);
}

#[test]
fn unknown_subcommand_and_flags_are_usage_errors() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(exit_code(&out), 64);
    let out = bin()
        .args(["density", "--delta", "2", "--t", "1", "--wat", "3"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 64);
}

#[test]
fn unknown_family_is_usage_error() {
    let dir = temp_dir("family");
    let path = dir.join("bad.ini");
    std::fs::write(&path, "[model]\nfamily = cubic\n").unwrap();
    let out = bin()
        .args(["validate", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 64);
}

#[test]
fn validate_reference_model_passes() {
    let dir = temp_dir("validate");
    let cfg = write_reference_config(&dir);
    let out = bin()
        .args(["validate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("model validation: PASS"));
}

#[test]
fn validate_restoring_drift_fails_with_exit_one() {
    let dir = temp_dir("validate-fail");
    let path = dir.join("restoring.ini");
    std::fs::write(
        &path,
        "[model]\nfamily = mean_reverting\nkappa = 1\nsig = 1\n\
         rho = 1\nmu = 0\nsigma = 1\nk1_sq = 1\nk2_sq = 1\nx0 = 0\n",
    )
    .unwrap();
    let out = bin()
        .args(["validate", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn density_row_matches_exponential_law() {
    // x0 = 0, δ = 2, t = 1/2 is the unit exponential: density(y) = e^{-y}.
    let out = bin()
        .args(["density", "--delta", "2", "--t", "0.5", "--x0", "0", "--grid", "0:5:0.1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut checked = false;
    for line in stdout.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let y: f64 = cols[0].parse().unwrap();
        let density: f64 = cols[1].parse().unwrap();
        if (y - 0.7).abs() < 1e-9 {
            assert!((density - (-y).exp()).abs() < 1e-12);
            checked = true;
        }
        let cdf: f64 = cols[2].parse().unwrap();
        assert!((cdf - (1.0 - (-y).exp())).abs() < 1e-8);
    }
    assert!(checked, "no y = 0.7 row in output:\n{stdout}");
}

#[test]
fn density_rejects_malformed_grid() {
    let out = bin()
        .args(["density", "--delta", "2", "--t", "1", "--grid", "0-5-1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 64);
}

#[test]
fn density_outside_series_range_is_numeric_failure() {
    // Bessel argument |x0|·√y/t far beyond the supported series range.
    let out = bin()
        .args(["density", "--delta", "1", "--t", "0.001", "--x0", "9", "--grid", "400:401:1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn simulate_is_byte_identical_for_fixed_seed() {
    let dir = temp_dir("simulate");
    let cfg = write_reference_config(&dir);
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    for out_path in [&a, &b] {
        let out = bin()
            .args([
                "simulate",
                "--model",
                cfg.to_str().unwrap(),
                "--T",
                "5",
                "--dt",
                "0.001",
                "--paths",
                "3",
                "--seed",
                "99",
                "--coupled",
                "--every",
                "100",
                "--out",
                out_path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(exit_code(&out), 0);
    }
    let first = std::fs::read(&a).unwrap();
    let second = std::fs::read(&b).unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("path,t,X,z_l,z,z_u,theta\n"));
    // 3 paths x (5001 grid points / 100 thinning -> 51 rows) + header.
    assert_eq!(text.lines().count(), 1 + 3 * 51);
}

#[test]
fn lil_report_writes_json_and_csv() {
    let dir = temp_dir("lilreport");
    let cfg = write_reference_config(&dir);
    let prefix = dir.join("report");
    let out = bin()
        .args([
            "lil-report",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            prefix.to_str().unwrap(),
            "--workers",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json_text = std::fs::read_to_string(format!("{}.json", prefix.display())).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json_text).unwrap();
    assert_eq!(parsed["run"]["paths"], 4);
    assert!(parsed["results"]["median_normalized_sup"].is_number());
    let csv_text = std::fs::read_to_string(format!("{}.csv", prefix.display())).unwrap();
    assert!(csv_text.starts_with("checkpoint,gsq_average_median"));
    assert_eq!(csv_text.lines().count(), 1 + 3);
}

#[test]
fn lil_report_honors_thread_env_var_without_changing_output() {
    let dir = temp_dir("lilenv");
    let cfg = write_reference_config(&dir);
    let p1 = dir.join("env1");
    let p2 = dir.join("env3");
    for (prefix, threads) in [(&p1, "1"), (&p2, "3")] {
        let out = bin()
            .args([
                "lil-report",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                prefix.to_str().unwrap(),
            ])
            .env("MOTOO_LAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(exit_code(&out), 0);
    }
    let a = std::fs::read(format!("{}.json", p1.display())).unwrap();
    let b = std::fs::read(format!("{}.json", p2.display())).unwrap();
    assert_eq!(a, b);
}
