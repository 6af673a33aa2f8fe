use serde::{Deserialize, Serialize};

use super::{run_trials, Scenario, TrialOutcome};
use crate::{Error, Result};

/// S = δA √τ / (∂A/∂F_0), N/√Hz.
pub fn sensitivity(delta_a: f64, tau: f64, slope: f64) -> Result<f64> {
    if slope == 0.0 {
        return Err(Error::invalid("amplitude-per-force slope must be non-zero"));
    }
    if !(delta_a > 0.0 && tau > 0.0 && slope > 0.0) || !(delta_a.is_finite() && tau.is_finite() && slope.is_finite()) {
        return Err(Error::invalid("δA, τ and slope must be positive and finite"));
    }
    Ok(delta_a * tau.sqrt() / slope)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub voltage: f64,
    /// Standard deviation of the fitted amplitudes, m.
    pub delta_a: f64,
    pub mean_amplitude: f64,
    /// τ = ε·t_m, s.
    pub tau: f64,
    pub repetitions: usize,
    pub locked_repetitions: usize,
    /// m/N
    pub slope: f64,
    /// N/√Hz
    pub sensitivity: f64,
    /// Mean one-sigma amplitude error reported by the fits, m.
    pub mean_fit_error: f64,
}

/// ε repeated gates at one voltage; δA is the spread of the fitted A.
pub fn sensitivity_campaign(sc: &Scenario, voltage: f64, repetitions: usize, seed: u64) -> Result<SensitivityReport> {
    if repetitions < 2 {
        return Err(Error::invalid("at least two repetitions are needed for a spread"));
    }
    let trials: Vec<TrialOutcome> = run_trials(sc, &[voltage], repetitions, seed)?.remove(0);
    let fitted: Vec<&TrialOutcome> = trials.iter().filter(|t| t.fitted_amplitude().is_some()).collect();
    if fitted.len() < 2 {
        return Err(Error::Degenerate(format!("only {} of {repetitions} repetitions produced a fit", fitted.len())));
    }
    let amps: Vec<f64> = fitted.iter().filter_map(|t| t.fitted_amplitude()).collect();
    let (mean, var) = crate::dynamics::mean_var(&amps);
    let errs: Vec<f64> = fitted.iter().filter_map(|t| t.fit.as_ref().map(|f| f.errors.amplitude)).collect();
    let d = &sc.config.physics.drive;
    let slope = d.amplitude_per_volt / d.force_per_volt;
    let tau = repetitions as f64 * sc.config.pipeline.gate_time;
    let delta_a = var.sqrt();
    Ok(SensitivityReport {
        voltage,
        delta_a,
        mean_amplitude: mean,
        tau,
        repetitions,
        locked_repetitions: fitted.len(),
        slope,
        sensitivity: sensitivity(delta_a, tau, slope)?,
        mean_fit_error: errs.iter().sum::<f64>() / errs.len() as f64,
    })
}
