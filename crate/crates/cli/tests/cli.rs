//! End-to-end checks of the `belltag` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn belltag() -> Command {
    Command::new(env!("CARGO_BIN_EXE_belltag"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn belltag");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn simulate_with(dir: &Path, duration: &str, extra: &[&str]) -> Output {
    let mut cmd = belltag();
    cmd.arg("simulate")
        .arg("--duration")
        .arg(duration)
        .arg("--out")
        .arg(dir);
    cmd.args(extra);
    run_ok(&mut cmd)
}

fn simulate_into(dir: &Path, extra: &[&str]) -> Output {
    simulate_with(dir, "0.2", extra)
}

#[test]
fn simulate_writes_streams_manifest_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), &[]);
    for name in ["alice.btag", "bob.btag", "manifest.toml", "ground_truth.toml"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("pairs_emitted"));
    assert!(manifest.contains("[config.alice]"));
    let truth = std::fs::read_to_string(dir.path().join("ground_truth.toml")).unwrap();
    assert!(truth.contains("NOT an analysis input"));
    assert!(truth.contains("relative_offset_ps"));
}

#[test]
fn same_seed_gives_byte_identical_streams() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    simulate_into(d1.path(), &["--seed", "7"]);
    simulate_into(d2.path(), &["--seed", "7"]);
    for name in ["alice.btag", "bob.btag"] {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let d3 = tempfile::tempdir().unwrap();
    simulate_into(d3.path(), &["--seed", "8"]);
    let a = std::fs::read(d1.path().join("alice.btag")).unwrap();
    let c = std::fs::read(d3.path().join("alice.btag")).unwrap();
    assert_ne!(a, c, "different seeds must differ");
}

#[test]
fn zero_duration_produces_valid_empty_streams() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = belltag();
    cmd.arg("simulate")
        .arg("--duration")
        .arg("0")
        .arg("--out")
        .arg(dir.path());
    run_ok(&mut cmd);
    let bytes = std::fs::read(dir.path().join("alice.btag")).unwrap();
    assert_eq!(bytes.len(), 31, "header-only file expected");
    assert_eq!(&bytes[0..8], b"BELLTAG1");
}

#[test]
fn analyze_reports_s_and_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), &[]);
    let reports = dir.path().join("reports");
    let out = run_ok(
        belltag()
            .arg("analyze")
            .arg(dir.path().join("alice.btag"))
            .arg(dir.path().join("bob.btag"))
            .arg("--out")
            .arg(&reports),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("S = "), "no S in report:\n{stdout}");
    assert!(stdout.contains("offset (bob − alice):"));
    for name in ["rates.csv", "correlations.csv", "offset.csv", "nosignaling.csv"] {
        let path = reports.join(name);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().count() >= 2, "{name} has no data rows");
    }
    // the 16-rate table has 16 data rows
    let rates = std::fs::read_to_string(reports.join("rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 17);
}

#[test]
fn analyze_rejects_station_id_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), &[]);
    let alice = dir.path().join("alice.btag");
    let out = belltag()
        .arg("analyze")
        .arg(&alice)
        .arg(&alice)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("station_id"), "stderr: {stderr}");
}

#[test]
fn analyze_needs_no_simulation_context() {
    // only the two stream files move to a fresh directory; no manifest,
    // no ground truth, no config
    let sim = tempfile::tempdir().unwrap();
    simulate_into(sim.path(), &[]);
    let bare = tempfile::tempdir().unwrap();
    let a = bare.path().join("x.btag");
    let b = bare.path().join("y.btag");
    std::fs::copy(sim.path().join("alice.btag"), &a).unwrap();
    std::fs::copy(sim.path().join("bob.btag"), &b).unwrap();
    drop(sim);
    let out = run_ok(belltag().arg("analyze").arg(&a).arg(&b));
    assert!(String::from_utf8_lossy(&out.stdout).contains("S = "));
}

#[test]
fn lhv_model_stays_under_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    simulate_with(dir.path(), "2", &["--model", "lhv-deterministic"]);
    let out = run_ok(
        belltag()
            .arg("analyze")
            .arg(dir.path().join("alice.btag"))
            .arg(dir.path().join("bob.btag")),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout
        .lines()
        .find(|l| l.starts_with("S = "))
        .expect("S line");
    // "S = 2.0012 ± 0.0581   [...]" — parse value and sigma
    let mut parts = line.split_whitespace();
    let s: f64 = parts.nth(2).unwrap().parse().unwrap();
    let sigma: f64 = parts.nth(1).unwrap().parse().unwrap();
    assert!(s <= 2.0 + 3.0 * sigma, "LHV run violated the bound: {line}");
}

#[test]
fn audit_passes_on_defaults_and_fails_when_too_close() {
    let out = run_ok(belltag().arg("audit").args(["--seed", "1"]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS]"));

    // a 10 m separation cannot be audited successfully
    let cfg = r#"
[geometry]
separation = 10.0
"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("close.toml");
    std::fs::write(&path, cfg).unwrap();
    let out = belltag().arg("audit").arg("--config").arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
}

#[test]
fn noiseless_scan_recovers_configured_visibility_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(
        belltag()
            .arg("scan")
            .arg("--noiseless")
            .args(["--points", "11", "--dwell", "1"])
            .arg("--out")
            .arg(dir.path()),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("pooled visibility over all 16 curves: 0.9700"),
        "stdout: {stdout}"
    );
    for name in [
        "scan_rates.csv",
        "scan_fits.csv",
        "scan_singles.csv",
        "scan_curve_samples.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let fits = std::fs::read_to_string(dir.path().join("scan_fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 17, "16 fitted curves expected");
}

#[test]
fn checked_in_default_config_matches_builtin_defaults() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let text = std::fs::read_to_string(&path).expect("configs/default.toml");
    let parsed: belltag_core::ExperimentConfig = toml::from_str(&text).unwrap();
    assert_eq!(parsed, belltag_core::ExperimentConfig::default());
}

#[test]
fn simulate_honors_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
duration = 0.1
master_seed = 42

[alice]
setting_angles_deg = [0.0, 45.0]
efficiency = 0.02

[bob]
setting_angles_deg = [22.5, 67.5]
[bob.clock]
offset = 5e-6
"#;
    let path = dir.path().join("custom.toml");
    std::fs::write(&path, cfg).unwrap();
    let out = run_ok(
        belltag()
            .arg("simulate")
            .arg("--config")
            .arg(&path)
            .arg("--out")
            .arg(dir.path()),
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("seed 42"));
    let truth = std::fs::read_to_string(dir.path().join("ground_truth.toml")).unwrap();
    assert!(truth.contains("relative_offset_ps = 5000000"), "truth: {truth}");
}
