use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::dynamics::QuadratureStepper;
use crate::physics::squeeze_variance_ratio;
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeSettings {
    pub trials: usize,
    /// Trial length in secular periods; one sample per period.
    pub periods: usize,
    pub bootstrap_resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezePoint {
    pub gain: f64,
    pub phase: f64,
    /// g cos 2φ
    pub product: f64,
    pub unstable: bool,
    /// 1/(1 − g cos 2φ)
    pub theory_y: Option<f64>,
    /// 1/(1 + g cos 2φ)
    pub theory_x: Option<f64>,
    pub relative_variance_y: Option<f64>,
    pub bootstrap_err_y: Option<f64>,
    pub relative_variance_x: Option<f64>,
    pub bootstrap_err_x: Option<f64>,
    pub trials: usize,
}

impl SqueezePoint {
    /// |simulated − theory| in units of the bootstrap error, for Y.
    pub fn deviation_sigma_y(&self) -> Option<f64> {
        Some((self.relative_variance_y? - self.theory_y?).abs() / self.bootstrap_err_y?)
    }

    pub fn deviation_sigma_x(&self) -> Option<f64> {
        Some((self.relative_variance_x? - self.theory_x?).abs() / self.bootstrap_err_x?)
    }
}

/// Per-trial variances of X and Y about their stationary means.
fn trial_variances(sc: &Scenario, gain: f64, phase: f64, settings: &SqueezeSettings, seed: u64) -> Result<(f64, f64)> {
    let o = &sc.objects;
    let drive = o.drive.with_voltage(0.0).with_squeeze(gain, phase);
    let dt = o.trap.period();
    let mut st = QuadratureStepper::new(&o.trap, &drive, &o.noise, dt)?;
    let mut rng = rng_from_seed(seed);
    st.draw_stationary(&mut rng);
    let (mut vx, mut vy) = (0.0, 0.0);
    for _ in 0..settings.periods {
        let (x, y) = st.step(&mut rng);
        vx += x * x;
        vy += (y - st.mean_y).powi(2);
    }
    let n = settings.periods as f64;
    Ok((vx / n, vy / n))
}

fn ratio_of_means(num: &[f64], den: &[f64]) -> f64 {
    (num.iter().sum::<f64>() / num.len() as f64) / (den.iter().sum::<f64>() / den.len() as f64)
}

fn bootstrap_ratio(num: &[f64], den: &[f64], resamples: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let a: f64 = (0..num.len()).map(|_| num[rng.random_range(0..num.len())]).sum::<f64>() / num.len() as f64;
        let b: f64 = (0..den.len()).map(|_| den[rng.random_range(0..den.len())]).sum::<f64>() / den.len() as f64;
        stats.push(a / b);
    }
    crate::dynamics::mean_var(&stats).1.sqrt()
}

/// Relative quadrature variances over a (g, φ) grid against independent
/// unsqueezed reference trials, with bootstrap errors.
pub fn squeeze_sweep(
    sc: &Scenario,
    grid: &[(f64, f64)],
    settings: &SqueezeSettings,
    seed: u64,
) -> Result<Vec<SqueezePoint>> {
    if settings.trials < 2 || settings.periods == 0 || settings.bootstrap_resamples < 10 {
        return Err(Error::invalid("need ≥ 2 trials, ≥ 1 period and ≥ 10 bootstrap resamples"));
    }
    let reference: Vec<(f64, f64)> = (0..settings.trials)
        .into_par_iter()
        .map(|j| trial_variances(sc, 0.0, 0.0, settings, derive_seed(derive_seed(seed, u64::MAX), j as u64)))
        .collect::<Result<_>>()?;
    let ref_x: Vec<f64> = reference.iter().map(|r| r.0).collect();
    let ref_y: Vec<f64> = reference.iter().map(|r| r.1).collect();

    grid.par_iter()
        .enumerate()
        .map(|(i, (g, phi))| {
            let product = g * (2.0 * phi).cos();
            let unstable = product >= 1.0 || product <= -1.0;
            let mut point = SqueezePoint {
                gain: *g,
                phase: *phi,
                product,
                unstable,
                theory_y: squeeze_variance_ratio(*g, *phi).ok(),
                theory_x: crate::physics::anti_squeeze_variance_ratio(*g, *phi).ok(),
                relative_variance_y: None,
                bootstrap_err_y: None,
                relative_variance_x: None,
                bootstrap_err_x: None,
                trials: settings.trials,
            };
            if unstable {
                log::warn!("g cos 2φ = {product} at (g = {g}, φ = {phi}) is parametrically unstable; flagged");
                return Ok(point);
            }
            if !(0.0..=1.0).contains(g) {
                return Err(Error::invalid(format!("squeeze gain {g} outside [0, 1]")));
            }
            let point_seed = derive_seed(seed, i as u64);
            let vars: Vec<(f64, f64)> = (0..settings.trials)
                .map(|j| trial_variances(sc, *g, *phi, settings, derive_seed(point_seed, j as u64)))
                .collect::<Result<_>>()?;
            let vx: Vec<f64> = vars.iter().map(|v| v.0).collect();
            let vy: Vec<f64> = vars.iter().map(|v| v.1).collect();
            let bs = derive_seed(point_seed, u64::MAX);
            point.relative_variance_y = Some(ratio_of_means(&vy, &ref_y));
            point.bootstrap_err_y = Some(bootstrap_ratio(&vy, &ref_y, settings.bootstrap_resamples, bs));
            point.relative_variance_x = Some(ratio_of_means(&vx, &ref_x));
            point.bootstrap_err_x = Some(bootstrap_ratio(&vx, &ref_x, settings.bootstrap_resamples, bs ^ 1));
            Ok(point)
        })
        .collect()
}
