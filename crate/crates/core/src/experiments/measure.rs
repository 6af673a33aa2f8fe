use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::config::ScalePreset;
use crate::constants;
use crate::dynamics::{LockVerdict, QuadratureStepper};
use crate::fit::{derive_alpha_beta, fit_histogram, initial_guess, FitModelParams, FitResult};
use crate::photon::{sample_detected, tac_fold, TacHistogram};
use crate::physics::FluorescenceModel;
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

const STREAM_QUADRATURE: u64 = 1;
const STREAM_LOCK: u64 = 2;
const STREAM_PHOTONS: u64 = 3;

/// One gate of the measurement chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub voltage: f64,
    pub seed: u64,
    /// Gate-averaged amplitude of the simulated motion, m.
    pub true_amplitude: f64,
    pub true_phase: f64,
    pub lock: LockVerdict,
    pub total_counts: u64,
    /// Present for locked trials with a usable histogram.
    pub fit: Option<FitResult>,
    /// Why a locked trial has no fit.
    pub fit_failure: Option<String>,
}

impl TrialOutcome {
    pub fn fitted_amplitude(&self) -> Option<f64> {
        self.fit.as_ref().filter(|f| f.converged).map(|f| f.params.amplitude)
    }
}

/// Gate averages of the rotating-frame quadratures mapped to amplitude and
/// phase: A = A_0 + Ȳ + ⟨X⟩, φ = φ_ref + (⟨Y⟩ − Ȳ)/A.
pub fn gate_amplitude_phase(sc: &Scenario, voltage: f64, seed: u64) -> Result<(f64, f64)> {
    let o = &sc.objects;
    let drive = o.drive.with_voltage(voltage);
    let gate = sc.config.pipeline.gate_time;
    let dt = sc.config.pipeline.quadrature_dt.min(gate);
    let mut st = QuadratureStepper::new(&o.trap, &drive, &o.noise, dt)?;
    let mut rng = rng_from_seed(derive_seed(seed, STREAM_QUADRATURE));
    st.draw_stationary(&mut rng);
    let steps = ((gate / dt).round() as usize).max(1);
    let (mut sx, mut sy) = (0.0, 0.0);
    for _ in 0..steps {
        let (x, y) = st.step(&mut rng);
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / steps as f64, sy / steps as f64);
    let d = &sc.config.physics.drive;
    let amplitude = d.free_amplitude + st.mean_y + mx;
    let phase = d.reference_phase + (my - st.mean_y) / amplitude;
    Ok((amplitude, phase))
}

/// Photons over one gate at fixed (A, φ), folded into a TAC histogram.
pub fn synthesize_histogram(sc: &Scenario, amplitude: f64, phase: f64, seed: u64) -> Result<TacHistogram> {
    let o = &sc.objects;
    let model = FluorescenceModel::new(o.beams.clone(), amplitude, phase, o.drive.injection_frequency)?;
    let mut rng = rng_from_seed(seed);
    let stream = sample_detected(&model, &o.detection, sc.config.pipeline.gate_time, &mut rng)?;
    let mut h = tac_fold(&stream, o.period, sc.config.pipeline.tac_resolution)?;
    h.seed = Some(seed);
    h.config_hash = Some(sc.hash.clone());
    Ok(h)
}

/// (α, β) used for initialization and as frozen values.
pub fn fit_scale(sc: &Scenario, hist: &TacHistogram) -> Result<(f64, f64)> {
    match sc.config.fit.scale {
        ScalePreset::Fixed => Ok((constants::FIXED_ALPHA, constants::FIXED_BETA)),
        ScalePreset::Derived => {
            let det = &sc.objects.detection;
            let n = hist.n_intervals();
            let (alpha, beta) =
                derive_alpha_beta(det.efficiency, hist.gate_time, n, hist.total_counts as f64, det.snr.unwrap_or(0.0))?;
            Ok((alpha, if det.snr.is_some() { beta } else { 0.0 }))
        }
    }
}

/// Initial guess plus the configured fit.
pub fn fit_scenario_histogram(sc: &Scenario, hist: &TacHistogram) -> Result<FitResult> {
    let o = &sc.objects;
    let omega = o.drive.injection_frequency;
    let sigma_t = sc.config.fit.sigma_t;
    let (alpha, beta) = fit_scale(sc, hist)?;
    let guess = initial_guess(hist, &o.beams, omega, sigma_t, Some((alpha, beta)))?;
    let init = FitModelParams { alpha, beta, sigma_t, ..guess };
    fit_histogram(hist, &o.beams, omega, &init, sc.config.frozen()?, &o.fit)
}

/// Gate amplitude, phase and the resulting histogram, without lock check or fit.
pub fn simulate_gate(sc: &Scenario, voltage: f64, seed: u64) -> Result<(f64, f64, TacHistogram)> {
    let (amplitude, phase) = gate_amplitude_phase(sc, voltage, seed)?;
    let hist = synthesize_histogram(sc, amplitude, phase, derive_seed(seed, STREAM_PHOTONS))?;
    Ok((amplitude, phase, hist))
}

/// Motion → lock check → photons → histogram → fit, for one gate.
pub fn measure_amplitude(sc: &Scenario, voltage: f64, seed: u64) -> Result<TrialOutcome> {
    let (amplitude, phase, hist) = simulate_gate(sc, voltage, seed)?;
    let lock = sc.objects.lock.clone().with_voltage(voltage).verdict(derive_seed(seed, STREAM_LOCK))?;
    let (fit, fit_failure) = match lock.locked {
        false => (None, None),
        true => match fit_scenario_histogram(sc, &hist) {
            Ok(f) => (Some(f), None),
            // the first harmonic of the folded rate vanishes at some amplitudes
            Err(e @ Error::NoModulation) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        },
    };
    Ok(TrialOutcome {
        voltage,
        seed,
        true_amplitude: amplitude,
        true_phase: phase,
        lock,
        total_counts: hist.total_counts,
        fit,
        fit_failure,
    })
}
