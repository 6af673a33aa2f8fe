use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phonon_twin::config::RunConfig;
use phonon_twin::fit::FitResult;
use phonon_twin::physics::{FluorescenceModel, LaserBeam};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_phonon-twin"));
    c.env_remove("PHONON_TWIN_OUT").env("RUST_LOG", "warn");
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("config/default.toml")
}

fn summary_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("simulate.summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim().to_string()))
        .unwrap_or_else(|| panic!("{key} missing from summary"))
}

fn simulate(dir: &Path, seed: u64) -> Output {
    run(bin().args(["simulate", "--seed", &seed.to_string(), "--out"]).arg(dir))
}

#[test]
fn simulate_counts_match_photon_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), 5);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("histogram.tac").exists());
    let a: f64 = summary_value(dir.path(), "amplitude_m").parse().unwrap();
    let n: f64 = summary_value(dir.path(), "total_counts").parse().unwrap();
    let cfg = RunConfig::default();
    let omega = std::f64::consts::TAU * cfg.physics.trap.secular_z_hz;
    let rho = FluorescenceModel::new(LaserBeam::default_pair(), a, 0.0, omega).unwrap().mean_rate();
    let p = &cfg.pipeline;
    let expected = p.efficiency * p.gate_time * rho * (1.0 + 1.0 / p.snr.unwrap());
    assert!((n - expected).abs() < 3.0 * expected.sqrt(), "N = {n}, expected {expected}");
}

#[test]
fn same_seed_same_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(simulate(a.path(), 11).status.success());
    assert!(simulate(b.path(), 11).status.success());
    for f in ["histogram.tac", "simulate.summary.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    assert!(simulate(c.path(), 12).status.success());
    assert_ne!(fs::read(a.path().join("histogram.tac")).unwrap(), fs::read(c.path().join("histogram.tac")).unwrap());
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[pipeline]\ngate_time = 0.0\n").unwrap();
    let out = run(bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("histogram.tac").exists());

    fs::write(&cfg, "[pipeline]\nno_such_key = 1\n").unwrap();
    assert_eq!(run(bin().args(["print-config", "--config"]).arg(&cfg)).status.code(), Some(1));
    assert_eq!(run(bin().args(["print-config", "--config", "/nonexistent/x.toml"])).status.code(), Some(1));
}

#[test]
fn fit_recovers_simulated_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), 7).status.success());
    let a: f64 = summary_value(dir.path(), "amplitude_m").parse().unwrap();
    let phi: f64 = summary_value(dir.path(), "phase_rad").parse().unwrap();
    let report = dir.path().join("fit.txt");
    let out = run(bin().arg("fit").arg(dir.path().join("histogram.tac")).arg("--out").arg(&report));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (r, hash) = FitResult::parse_report(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r.converged);
    assert!((r.params.amplitude - a).abs() < 0.4e-6, "{:e} vs {a:e}", r.params.amplitude);
    assert_eq!(hash.as_deref(), Some(RunConfig::default().hash().as_str()));

    // one-parameter fit: only A moves, φ stays at the supplied value
    let report1 = dir.path().join("fit_a.txt");
    let out = run(bin()
        .arg("fit")
        .arg(dir.path().join("histogram.tac"))
        .args(["--freeze", "all-but-amplitude", "--init", &format!("phase={phi:e}"), "--out"])
        .arg(&report1));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (r1, _) = FitResult::parse_report(&fs::read_to_string(&report1).unwrap()).unwrap();
    assert!((r1.params.phase - phi).abs() < 1e-12);
    assert!((r1.params.amplitude - a).abs() < 0.4e-6);
}

#[test]
fn corrupt_histogram_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("broken.tac");
    fs::write(&h, "this is not a histogram\n1 2 3\n").unwrap();
    let out = run(bin().arg("fit").arg(&h).arg("--out").arg(dir.path().join("r.txt")));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(bin().arg("fit").arg(dir.path().join("missing.tac"))).status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(run(bin().args(["campaign", "no-such-campaign"])).status.code(), Some(1));
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    assert_eq!(run(bin().args(["fit", "x.tac", "--freeze", "gamma"])).status.code(), Some(1));
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));
}

#[test]
fn squeeze_campaign_writes_theory_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(
        &cfg,
        "[experiment]\nsqueeze_gains = [0.0, 0.5]\nsqueeze_phases = [1.5707963267948966]\nsqueeze_trials = 4\nsqueeze_periods = 300\nbootstrap_resamples = 20\n",
    )
    .unwrap();
    let out = run(bin().args(["campaign", "sweep-squeeze", "--seed", "3", "--config"]).arg(&cfg).arg("--out").arg(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep-squeeze.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for col in ["gain", "phase_rad", "theory_y", "relative_variance_y", "bootstrap_err_y"] {
        assert!(header.split(',').any(|c| c == col), "{col} missing from {header}");
    }
    assert_eq!(csv.lines().count(), 3);
    for ext in ["json", "summary.txt", "svg"] {
        assert!(dir.path().join(format!("sweep-squeeze.{ext}")).exists(), "{ext}");
    }
}

#[test]
fn shipped_config_equals_defaults() {
    let a = run(bin().arg("print-config"));
    let b = run(bin().arg("print-config").arg("--config").arg(shipped_config()));
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(RunConfig::load(&shipped_config()).unwrap(), RunConfig::default());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().args(["simulate", "--seed", "2"]).env("PHONON_TWIN_OUT", dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("histogram.tac").exists());

    let flag = tempfile::tempdir().unwrap();
    let out = run(bin().args(["simulate", "--seed", "2", "--out"]).arg(flag.path()).env("PHONON_TWIN_OUT", dir.path()));
    assert!(out.status.success());
    assert!(flag.path().join("histogram.tac").exists());
}

#[test]
fn trajectory_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().args(["simulate", "--seed", "4", "--trajectory", "1e-3", "--out"]).arg(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("trajectory.dat")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count();
    assert!(rows > 100, "{rows} rows");
}
