use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{measure_amplitude, Scenario, TrialOutcome};
use crate::physics::{static_force, TrapConfig};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Force-per-volt slope from DC displacements: least squares through the
/// origin of F = mω_z²z against V.
pub fn calibrate_force(trap: &TrapConfig, measurements: &[(f64, f64)]) -> Result<f64> {
    if measurements.is_empty() {
        return Err(Error::invalid("at least one DC measurement is required"));
    }
    let svv: f64 = measurements.iter().map(|(v, _)| v * v).sum();
    if svv == 0.0 {
        return Err(Error::Degenerate("all calibration voltages are zero".into()));
    }
    let svf: f64 = measurements.iter().map(|(v, z)| v * static_force(trap, *z)).sum();
    Ok(svf / svv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares y = a + b x.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<Regression> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::invalid("x and y differ in length"));
    }
    if n < 2 {
        return Err(Error::Degenerate("regression needs at least two points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("regression needs at least two distinct x values".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let s2 = if n > 2 { sse / (nf - 2.0) } else { 0.0 };
    Ok(Regression {
        slope,
        intercept,
        slope_err: (s2 / sxx).sqrt(),
        intercept_err: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        r_squared,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub voltage: f64,
    pub trials: usize,
    pub locked_trials: usize,
    pub fitted_trials: usize,
    /// Mean and spread of the fitted amplitudes of locked trials, m.
    pub mean_amplitude: Option<f64>,
    pub std_amplitude: Option<f64>,
    pub mean_true_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    /// N/V
    pub force_per_volt: f64,
    /// m/V
    pub amplitude_per_volt: f64,
    /// m/N
    pub amplitude_per_force: f64,
    /// m
    pub free_running_amplitude: f64,
    pub regression: Regression,
    pub points: Vec<SweepPoint>,
    pub excluded_voltages: Vec<f64>,
}

/// Trials for every (voltage, repetition) pair, seeded by position.
pub fn run_trials(sc: &Scenario, voltages: &[f64], trials: usize, seed: u64) -> Result<Vec<Vec<TrialOutcome>>> {
    let jobs: Vec<(usize, usize)> = (0..voltages.len()).flat_map(|i| (0..trials).map(move |j| (i, j))).collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|(i, j)| measure_amplitude(sc, voltages[*i], derive_seed(derive_seed(seed, *i as u64), *j as u64)))
        .collect::<Result<_>>()?;
    let mut grouped: Vec<Vec<TrialOutcome>> = vec![Vec::with_capacity(trials); voltages.len()];
    for ((i, _), o) in jobs.iter().zip(outcomes) {
        grouped[*i].push(o);
    }
    Ok(grouped)
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let (m, v) = crate::dynamics::mean_var(xs);
    (Some(m), Some(v.sqrt()))
}

/// Fitted amplitude against injection voltage, regressed over the voltages
/// where a majority of trials locked and fitted.
pub fn amplitude_sweep(sc: &Scenario, voltages: &[f64], trials: usize, seed: u64) -> Result<CalibrationRecord> {
    if voltages.len() < 3 {
        return Err(Error::invalid("amplitude sweep needs at least three voltages"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    let first = voltages[0];
    if voltages.iter().all(|v| *v == first) {
        return Err(Error::Degenerate("all sweep voltages are equal".into()));
    }
    let dc: Vec<(f64, f64)> = sc.config.experiment.dc_measurements.iter().map(|m| (m[0], m[1])).collect();
    let force_per_volt = calibrate_force(&sc.objects.trap, &dc)?;
    let grouped = run_trials(sc, voltages, trials, seed)?;

    let mut points = Vec::new();
    let mut excluded = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (v, group) in voltages.iter().zip(&grouped) {
        let fitted: Vec<f64> = group.iter().filter_map(TrialOutcome::fitted_amplitude).collect();
        let truth: Vec<f64> = group.iter().map(|o| o.true_amplitude).collect();
        let (mean, std) = mean_std(&fitted);
        points.push(SweepPoint {
            voltage: *v,
            trials: group.len(),
            locked_trials: group.iter().filter(|o| o.lock.locked).count(),
            fitted_trials: fitted.len(),
            mean_amplitude: mean,
            std_amplitude: std,
            mean_true_amplitude: truth.iter().sum::<f64>() / truth.len() as f64,
        });
        match mean {
            Some(m) if 2 * fitted.len() > group.len() => {
                xs.push(*v);
                ys.push(m);
            }
            _ => {
                warn!("{} of {} trials fitted at {v:e} V; excluded from the regression", fitted.len(), group.len());
                excluded.push(*v);
            }
        }
    }
    let regression = linear_regression(&xs, &ys)?;
    Ok(CalibrationRecord {
        force_per_volt,
        amplitude_per_volt: regression.slope,
        amplitude_per_force: regression.slope / force_per_volt,
        free_running_amplitude: regression.intercept,
        regression,
        points,
        excluded_voltages: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dc_calibration() {
        let trap = TrapConfig::default();
        let k = calibrate_force(&trap, &[(3.0, 12e-6)]).unwrap();
        assert!((k / crate::constants::FORCE_PER_VOLT - 1.0).abs() < 5e-3);
        assert_eq!(calibrate_force(&trap, &[(3.0, 0.0)]).unwrap(), 0.0);
        let k2 = calibrate_force(&trap, &[(3.0, 24e-6)]).unwrap();
        assert_relative_eq!(k2, 2.0 * k, max_relative = 1e-12);
        assert!(calibrate_force(&trap, &[(0.0, 1e-6)]).is_err());
        assert!(calibrate_force(&trap, &[]).is_err());
    }

    #[test]
    fn regression_basics() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let r = linear_regression(&x, &y).unwrap();
        assert_relative_eq!(r.slope, 2.0);
        assert_relative_eq!(r.intercept, 1.0);
        assert_relative_eq!(r.r_squared, 1.0);
        assert!(matches!(linear_regression(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn sweep_rejects_degenerate_grids() {
        let sc = Scenario::default();
        assert!(amplitude_sweep(&sc, &[1e-3, 2e-3], 1, 0).is_err());
        assert!(matches!(amplitude_sweep(&sc, &[1e-3; 3], 1, 0), Err(Error::Degenerate(_))));
    }
}
