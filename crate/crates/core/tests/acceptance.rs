use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, TAU};
use std::io::Write;

use rayon::prelude::*;

use phonon_twin::config::RunConfig;
use phonon_twin::constants::K_B;
use phonon_twin::dynamics::{demodulate, integrate_langevin, mean_var, LangevinOptions, NoiseModel, QuadratureStepper};
use phonon_twin::experiments::{
    amplitude_sweep, critical_voltage, fit_scenario_histogram, load_run, lower_bound_search, monotonicity_violations, run_campaign,
    sensitivity, squeeze_sweep, synthesize_histogram, Campaign, Scenario, SqueezeSettings, LOCK_SUCCESS_TARGET,
};
use phonon_twin::fit::{model_curve, wrap_phase, FitModelParams};
use phonon_twin::photon::{count_arrivals, sample_detected, DetectionConfig, TacHistogram};
use phonon_twin::physics::{
    collection_efficiency, scattering_rate, static_force, DriveConfig, EfficiencyChain, FluorescenceModel, LaserBeam, TrapConfig,
};
use phonon_twin::rng::{derive_seed, rng_from_seed};

const MEAN_RATE_22UM: f64 = 1246415.358171404;
const QUOTED_DETECTED: f64 = 5.353e4;

// libtest captures print!/eprint!, not direct writes
fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {n:>2} {verdict} {name}: {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

/// Wilson–Hilferty 99th percentile of χ²(k).
fn chi2_crit_1pct(k: f64) -> f64 {
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + 2.326 * c.sqrt()).powi(3)
}

#[test]
fn c01_efficiency_chain() {
    let eta = collection_efficiency(&EfficiencyChain::nominal()).unwrap();
    report(1, "efficiency chain", (eta - 0.0025).abs() <= 0.0001, &format!("η = {:.4}% (0.25 ± 0.01)", eta * 100.0));
}

#[test]
fn c02_static_force() {
    let f = static_force(&TrapConfig::default(), 12e-6);
    let rel = f / 1088.5e-21 - 1.0;
    report(2, "static force", rel.abs() <= 0.005, &format!("F(12 µm) = {:.2} zN, {:+.3}% from 1088.5 zN at 3 V", f * 1e21, rel * 100.0));
}

#[test]
fn c03_squeezing_law() {
    let sc = Scenario::default();
    let mut grid: Vec<(f64, f64)> = (1..=9).map(|i| (i as f64 / 10.0, FRAC_PI_2)).collect();
    grid.extend([0.0, FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8].map(|p| (0.9, p)));
    grid.push((0.999, FRAC_PI_2));
    let settings = SqueezeSettings { trials: 50, periods: 10_000, bootstrap_resamples: 500 };
    let pts = squeeze_sweep(&sc, &grid, &settings, 3).unwrap();
    let worst = pts.iter().map(|p| p.deviation_sigma_y().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let edge = pts.last().unwrap();
    let r = edge.relative_variance_y.unwrap();
    let pass = worst < 3.0 && (r - 0.5).abs() <= 0.03;
    report(
        3,
        "squeezing law",
        pass,
        &format!("{} grid points, worst |Δ| = {worst:.2}σ; g cos 2φ = {:.3} gives {r:.4} ± {:.4} (0.50 ± 0.03)", pts.len(), edge.product, edge.bootstrap_err_y.unwrap()),
    );
}

#[test]
fn c04_fluctuation_dissipation() {
    let trap = TrapConfig::default();
    let noise = NoiseModel::default();
    let drive = DriveConfig { injection_voltage: 0.0, ..DriveConfig::default() };
    let target = K_B * noise.temperature / (2.0 * trap.mass * trap.secular_z.powi(2));
    let steps = 200;
    let opts = LangevinOptions {
        duration: 0.5,
        dt: Some(trap.period() / steps as f64),
        sample_every: steps / 20,
        ..LangevinOptions::default()
    };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for seed in 0..3 {
        let traj = integrate_langevin(&trap, &[], &drive, &noise, &opts, 400 + seed).unwrap();
        let q = demodulate(&traj, drive.injection_frequency, trap.period()).unwrap();
        let start = q.times.partition_point(|t| *t < 2e-3);
        xs.extend_from_slice(&q.x[start..]);
        ys.extend_from_slice(&q.y[start..]);
    }
    let lx = mean_var(&xs).1 / target;
    let ly = mean_var(&ys).1 / target;

    let mut st = QuadratureStepper::new(&trap, &drive, &noise, trap.period()).unwrap();
    let mut rng = rng_from_seed(404);
    let (mut qx, mut qy) = (Vec::new(), Vec::new());
    for _ in 0..40 {
        st.draw_stationary(&mut rng);
        for _ in 0..10_000 {
            let (x, y) = st.step(&mut rng);
            qx.push(x);
            qy.push(y);
        }
    }
    let sx = mean_var(&qx).1 / target;
    let sy = mean_var(&qy).1 / target;
    let pass = [lx, ly, sx, sy].iter().all(|r| (r - 1.0).abs() <= 0.05);
    report(
        4,
        "fluctuation-dissipation",
        pass,
        &format!("var/(k_B T/2mω²): Langevin X {lx:.3}, Y {ly:.3}; rotating frame X {sx:.3}, Y {sy:.3}"),
    );
}

#[test]
fn c05_fit_round_trip() {
    let sc = Scenario::default();
    let cases = [(21.677e-6, 0.028), (24.462e-6, 0.042)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, (a, phi)) in cases.iter().enumerate() {
        let outcomes: Vec<Option<(f64, f64, f64)>> = (0..200u64)
            .into_par_iter()
            .map(|s| {
                let h = synthesize_histogram(&sc, *a, *phi, derive_seed(505 + c as u64, s)).unwrap();
                fit_scenario_histogram(&sc, &h).ok().map(|r| (r.params.amplitude, r.params.phase, h.total_counts as f64))
            })
            .collect();
        let fitted: Vec<(f64, f64, f64)> = outcomes.iter().flatten().copied().collect();
        let a_ok = fitted.iter().filter(|f| (f.0 - a).abs() <= 0.15e-6).count() as f64 / 200.0;
        let p_ok = fitted.iter().filter(|f| wrap_phase(f.1 - phi).abs() <= 0.01).count() as f64 / 200.0;
        let both = fitted.iter().filter(|f| (f.0 - a).abs() <= 0.15e-6 && wrap_phase(f.1 - phi).abs() <= 0.01).count() as f64 / 200.0;
        let (ma, va) = mean_var(&fitted.iter().map(|f| f.0).collect::<Vec<_>>());
        let sp = mean_var(&fitted.iter().map(|f| wrap_phase(f.1 - phi)).collect::<Vec<_>>()).1.sqrt();
        let n = fitted.iter().map(|f| f.2).sum::<f64>() / fitted.len() as f64;
        pass &= both >= 0.95;
        parts.push(format!(
            "A = {:.3} µm, φ = {phi}: N ≈ {n:.0}, A ok {:.1}%, φ ok {:.1}%, both {:.1}%, bias {:+.0} nm, sd(A) {:.0} nm, sd(φ) {sp:.4}",
            a * 1e6,
            a_ok * 100.0,
            p_ok * 100.0,
            both * 100.0,
            (ma - a) * 1e9,
            va.sqrt() * 1e9
        ));
    }
    report(5, "fit round-trip", pass, &parts.join("; "));
}

#[test]
fn c06_phase_time_equivalence() {
    let beams = LaserBeam::default_pair();
    let omega = TAU * 186.02e3;
    let period = TAU / omega;
    let mut worst_rate = 0.0f64;
    for (i, beam) in beams.iter().enumerate() {
        for k in 0..200 {
            let t = period * ((k as f64 * 0.618_033_988_750 + i as f64 * 0.1) % 1.0);
            let phi = 0.01 * k as f64 - 1.0;
            let delta = 0.37 + 0.013 * k as f64;
            let a = scattering_rate(beam, 22e-6, phi + delta, omega, t).unwrap();
            let b = scattering_rate(beam, 22e-6, phi, omega, t + delta / omega).unwrap();
            worst_rate = worst_rate.max((a - b).abs() / b);
        }
    }

    // bin width dividing the period so a whole-bin shift is a rotation
    let aligned = TacHistogram::empty(period, period / 500.0).unwrap();
    let p = FitModelParams { amplitude: 22e-6, phase: 0.1, alpha: 3e-5, beta: 40.0, sigma_t: 0.8e-6 };
    let base = model_curve(&p, &beams, omega, &aligned).unwrap();
    let mut worst_curve = 0.0f64;
    for shift in [1usize, 37, 250, 499] {
        let delta = omega * shift as f64 * aligned.bin_width;
        let moved = model_curve(&FitModelParams { phase: p.phase + delta, ..p }, &beams, omega, &aligned).unwrap();
        for (i, m) in moved.iter().enumerate() {
            let b = base[(i + shift) % base.len()];
            worst_curve = worst_curve.max((m - b).abs() / b);
        }
    }

    // shifting φ by ω·k·t_r moves counts by k bins; compare full bins only
    let sc = Scenario::default();
    let k = 100usize;
    let phi = 0.042;
    let delta = omega * k as f64 * sc.config.pipeline.tac_resolution;
    let h0 = synthesize_histogram(&sc, 24.462e-6, phi, 606).unwrap();
    let h1 = synthesize_histogram(&sc, 24.462e-6, phi + delta, 607).unwrap();
    let full = h0.bin_edges().iter().filter(|e| e.1 >= h0.bin_width * (1.0 - 1e-9)).count();
    let two_sample = |off: usize| -> f64 {
        (0..full - k)
            .map(|i| {
                let (a, b) = (h1.counts[i] as f64, h0.counts[i + off] as f64);
                if a + b > 0.0 {
                    (a - b).powi(2) / (a + b)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let chi2 = two_sample(k);
    let unshifted = two_sample(0);
    let crit = chi2_crit_1pct((full - k) as f64);
    let pass = worst_rate <= 1e-12 && worst_curve <= 1e-12 && chi2 < crit && unshifted > crit;
    report(
        6,
        "phase-time equivalence",
        pass,
        &format!(
            "rate identity {worst_rate:.1e}, model curve {worst_curve:.1e}; shifted histograms χ² = {chi2:.0} over {} bins (1% critical {crit:.0}), unshifted control {unshifted:.0}",
            full - k
        ),
    );
}

#[test]
fn c07_sensitivity_formula() {
    let slope = 0.9979e-9 / 1e-24;
    let s = sensitivity(15e-9, 500.0, slope).unwrap();
    let exact = s == 15e-9 * 500.0f64.sqrt() / slope;
    let yn = s * 1e24;
    report(7, "sensitivity formula", exact && (yn - 347.0).abs() <= 50.0, &format!("{yn:.1} yN/√Hz (347 ± 50), exact = {exact}"));
}

#[test]
fn c08_calibration_consistency() {
    let sc = Scenario::default();
    let e = &sc.config.experiment;
    let rec = amplitude_sweep(&sc, &e.amplitude_voltages, e.trials, 808).unwrap();
    let truth = sc.config.physics.drive.amplitude_per_volt;
    let slope_rel = rec.amplitude_per_volt / truth - 1.0;
    let ratio = rec.amplitude_per_force * 1e-24 / 1e-9;
    let ratio_rel = ratio / 0.9979 - 1.0;
    report(
        8,
        "calibration consistency",
        slope_rel.abs() <= 0.03 && ratio_rel.abs() <= 0.01,
        &format!(
            "slope {:.1} nm/mV ({:+.2}% from {:.1}), ∂A/∂F = {ratio:.4} nm/yN ({:+.2}% from 0.9979), {} voltages excluded",
            rec.amplitude_per_volt * 1e6,
            slope_rel * 100.0,
            truth * 1e6,
            ratio_rel * 100.0,
            rec.excluded_voltages.len()
        ),
    );
}

#[test]
fn c09_lower_bound_protocol() {
    let sc = Scenario::default();
    let e = &sc.config.experiment;
    let k = sc.objects.drive.force_per_volt;
    let plain = sc.objects.lock.clone();
    let mut squeezed = plain.clone();
    squeezed.drive = squeezed.drive.with_squeeze(e.lower_bound_squeeze_gain, e.lower_bound_squeeze_phase);
    let a = lower_bound_search(&plain, &e.lower_bound_voltages, e.lower_bound_trials, k, 909).unwrap();
    let b = lower_bound_search(&squeezed, &e.lower_bound_voltages, e.lower_bound_trials, k, 909).unwrap();
    let violations = monotonicity_violations(&a.points, 3.0).len() + monotonicity_violations(&b.points, 3.0).len();
    let va = critical_voltage(&a.points, LOCK_SUCCESS_TARGET);
    let vb = critical_voltage(&b.points, LOCK_SUCCESS_TARGET);
    let (pass, detail) = match (&va, &vb) {
        (Ok(x), Ok(y)) => {
            let ratio = x / y;
            (
                violations == 0 && (ratio - 2.0).abs() <= 0.5,
                format!("critical {:.3} mV, squeezed {:.3} mV, ratio {ratio:.2} (2.0 ± 0.5), {violations} monotonicity violations", x * 1e3, y * 1e3),
            )
        }
        _ => (false, format!("unbracketed: {va:?}, {vb:?}")),
    };
    report(9, "lower-bound protocol", pass, &detail);
}

#[test]
fn c10_photon_budget() {
    let m = FluorescenceModel::new(LaserBeam::default_pair(), 22e-6, 0.0, TAU * 186.02e3).unwrap();
    let expected = MEAN_RATE_22UM * 10.0;
    let emitted = count_arrivals(|t| m.rate(t), m.upper_bound(), 10.0, &mut rng_from_seed(1010)).unwrap() as f64;
    let emitted_ok = (emitted - expected).abs() <= 3.0 * expected.sqrt();

    let det = DetectionConfig { efficiency: 0.0028, snr: Some(2.0), ..DetectionConfig::default() };
    let detected = sample_detected(&m, &det, 10.0, &mut rng_from_seed(1011)).unwrap().len() as f64;
    let pull = (detected - QUOTED_DETECTED) / QUOTED_DETECTED.sqrt();
    let model_detected = 0.0028 * expected * 1.5;
    report(
        10,
        "photon budget",
        emitted_ok && pull.abs() <= 3.0,
        &format!(
            "emitted {emitted:.0} vs oracle {expected:.0} ({:+.2}σ); detected {detected:.0} vs 5.353e4 ({pull:+.1}σ), model expectation {model_detected:.0}",
            (emitted - expected) / expected.sqrt()
        ),
    );
}

#[test]
fn c11_determinism() {
    let mut cfg = RunConfig::default();
    cfg.seed = 1111;
    cfg.experiment.trials = 3;
    cfg.experiment.amplitude_voltages = vec![10e-3, 15e-3, 18.25e-3];
    cfg.experiment.squeeze_gains = vec![0.0, 0.9];
    cfg.experiment.squeeze_phases = vec![FRAC_PI_2];
    cfg.experiment.squeeze_trials = 4;
    cfg.experiment.squeeze_periods = 500;
    cfg.experiment.bootstrap_resamples = 20;
    cfg.experiment.lower_bound_voltages = vec![0.002e-3, 0.3e-3, 2e-3];
    cfg.experiment.lower_bound_trials = 20;
    let dir = tempfile::tempdir().unwrap();
    let mut identical = Vec::new();
    for c in [Campaign::Calibrate, Campaign::SweepAmplitude, Campaign::SweepSqueeze, Campaign::LowerBound, Campaign::Sensitivity] {
        let first = run_campaign(&cfg, c).unwrap();
        let paths = first.write_to(&dir.path().join(c.name())).unwrap();
        let stored = load_run(&paths[0]).unwrap();
        let again = run_campaign(&stored.config, c).unwrap();
        let same = stored == first.record && again.record == first.record && again.csv == first.csv && again.summary == first.summary && again.svg == first.svg;
        identical.push((c, same));
    }
    let pass = identical.iter().all(|(_, s)| *s);
    let detail = identical.iter().map(|(c, s)| format!("{c} {}", if *s { "identical" } else { "differs" })).collect::<Vec<_>>().join(", ");
    report(11, "determinism", pass, &detail);
}
