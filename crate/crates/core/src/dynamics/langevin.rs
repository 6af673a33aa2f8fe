use rand::Rng;
use rand_distr::StandardNormal;

use super::{drift, NoiseModel, OscillatorState, Trajectory};
use crate::physics::{radiation_force, DriveConfig, LaserBeam, TrapConfig};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Friction term in the equation of motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingMode {
    /// −ζż with ζ from the noise model.
    #[default]
    Linear,
    /// Σ_j (F_j(ż) − F_j(0))/m from the saturable scattering forces.
    RadiationPressure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinOptions {
    pub duration: f64,
    /// Fixed step; `None` picks one secular period / 200.
    pub dt: Option<f64>,
    pub mode: DampingMode,
    pub initial: OscillatorState,
    /// Record every n-th step.
    pub sample_every: usize,
    /// Apply the linear secular-frequency drift of the trap.
    pub drift: bool,
}

impl Default for LangevinOptions {
    fn default() -> Self {
        Self {
            duration: 1e-3,
            dt: None,
            mode: DampingMode::Linear,
            initial: OscillatorState::default(),
            sample_every: 1,
            drift: false,
        }
    }
}

/// Stochastic Heun integration of
/// z̈ + ζż + [ω_z² + 2gζω_z sin(2ω_i t + 2φ)] z = (F_0 sin ω_i t + f_n)/m.
///
/// Slow-envelope rates are ζ/2·(1 ± g cos 2φ) plus a g sin 2φ coupling
/// between the quadratures.
pub fn integrate_langevin(
    trap: &TrapConfig,
    beams: &[LaserBeam],
    drive: &DriveConfig,
    noise: &NoiseModel,
    opts: &LangevinOptions,
    seed: u64,
) -> Result<Trajectory> {
    trap.validate()?;
    drive.validate()?;
    noise.validate()?;
    let period = trap.period();
    let dt = opts.dt.unwrap_or(period / 200.0);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
    }
    if dt > period / 50.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("dt = {dt:e} s exceeds period/50 = {:e} s", period / 50.0)));
    }
    if !(opts.duration > 0.0 && opts.duration.is_finite()) {
        return Err(Error::invalid("duration must be > 0"));
    }
    if opts.sample_every == 0 {
        return Err(Error::invalid("sample_every must be ≥ 1"));
    }
    let init = opts.initial;
    for (name, v) in [("position", init.position), ("velocity", init.velocity), ("time", init.time)] {
        crate::error::ensure_finite(name, v)?;
    }
    if opts.mode == DampingMode::Linear {
        if noise.damping < 0.0 {
            return Err(Error::Unstable(format!("negative damping ζ = {}", noise.damping)));
        }
        let gc = drive.squeeze_product();
        if gc.abs() >= 1.0 && noise.damping > 0.0 {
            return Err(Error::Unstable(format!("|g cos 2φ| = {} ≥ 1", gc.abs())));
        }
    }
    if opts.mode == DampingMode::RadiationPressure && beams.is_empty() {
        return Err(Error::invalid("radiation-pressure mode needs at least one beam"));
    }

    let m = trap.mass;
    let zeta = noise.damping;
    let f0 = drive.force_amplitude();
    let wi = drive.injection_frequency;
    let g = drive.effective_gain();
    let phi = drive.squeeze_phase;
    let f_rest: Vec<f64> = beams.iter().map(|b| radiation_force(b, 0.0)).collect();
    let kick = (noise.langevin_force_density(m) * dt).sqrt() / m;

    let omega_z = |t: f64| if opts.drift { drift::linear_drift(trap, t) } else { trap.secular_z };
    let friction = |v: f64| -> f64 {
        match opts.mode {
            DampingMode::Linear => zeta * v,
            DampingMode::RadiationPressure => {
                -beams.iter().zip(&f_rest).map(|(b, f0)| radiation_force(b, v) - f0).sum::<f64>() / m
            }
        }
    };
    let accel = |t: f64, z: f64, v: f64| -> f64 {
        let wz = omega_z(t);
        let stiff = wz * wz + 2.0 * g * zeta * wz * (2.0 * wi * t + 2.0 * phi).sin();
        -friction(v) - stiff * z + f0 * (wi * t).sin() / m
    };

    let steps = (opts.duration / dt).round() as usize;
    let cap = steps / opts.sample_every + 1;
    let mut traj = Trajectory {
        times: Vec::with_capacity(cap),
        positions: Vec::with_capacity(cap),
        velocities: Vec::with_capacity(cap),
    };
    let mut rng = rng_from_seed(seed);
    let (mut t, mut z, mut v) = (init.time, init.position, init.velocity);
    traj.times.push(t);
    traj.positions.push(z);
    traj.velocities.push(v);
    for i in 1..=steps {
        let dw = if kick > 0.0 { kick * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        let a0 = accel(t, z, v);
        let zp = z + v * dt;
        let vp = v + a0 * dt + dw;
        let t1 = init.time + i as f64 * dt;
        let a1 = accel(t1, zp, vp);
        z += 0.5 * (v + vp) * dt;
        v += 0.5 * (a0 + a1) * dt + dw;
        t = t1;
        if !(z.is_finite() && v.is_finite()) {
            return Err(Error::Unstable(format!("trajectory diverged at t = {t:e} s")));
        }
        if i % opts.sample_every == 0 {
            traj.times.push(t);
            traj.positions.push(z);
            traj.velocities.push(v);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    fn quiet(damping: f64) -> NoiseModel {
        NoiseModel { temperature: 0.0, damping }
    }

    fn undriven() -> DriveConfig {
        DriveConfig { injection_voltage: 0.0, ..DriveConfig::default() }
    }

    #[test]
    fn undamped_energy_is_conserved() {
        let trap = TrapConfig::default();
        let w = trap.secular_z;
        let opts = LangevinOptions {
            duration: 100.0 * trap.period(),
            initial: OscillatorState { position: 1e-6, ..Default::default() },
            sample_every: 200,
            ..Default::default()
        };
        let tr = integrate_langevin(&trap, &[], &undriven(), &quiet(0.0), &opts, 1).unwrap();
        let e0 = 0.5 * (w * 1e-6) * (w * 1e-6);
        // Heun amplifies energy by (1 + (ω dt)⁴/4) per step
        let h = w * trap.period() / 200.0;
        let bound = 20_000.0 * h.powi(4) / 4.0;
        for i in 0..tr.len() {
            let e = 0.5 * tr.velocities[i].powi(2) + 0.5 * (w * tr.positions[i]).powi(2);
            assert!((e / e0 - 1.0).abs() <= 1.01 * bound, "{}", e / e0 - 1.0);
        }
    }

    #[test]
    fn damped_amplitude_follows_exponential() {
        let trap = TrapConfig::default();
        let w = trap.secular_z;
        let zeta = 2.0e4;
        let opts = LangevinOptions {
            duration: 10.0 * 2.0 / zeta,
            initial: OscillatorState { position: 1e-6, ..Default::default() },
            ..Default::default()
        };
        let tr = integrate_langevin(&trap, &[], &undriven(), &quiet(zeta), &opts, 1).unwrap();
        for i in (0..tr.len()).step_by(500) {
            let t = tr.times[i];
            let wd = (w * w - zeta * zeta / 4.0).sqrt();
            let energy_amp = (tr.positions[i].powi(2) + ((tr.velocities[i] + 0.5 * zeta * tr.positions[i]) / wd).powi(2)).sqrt();
            let expect = 1e-6 * (-zeta * t / 2.0).exp();
            assert!((energy_amp / expect - 1.0).abs() < 0.01, "t={t}: {energy_amp} vs {expect}");
        }
    }

    #[test]
    fn rejects_coarse_step_and_instability() {
        let trap = TrapConfig::default();
        let coarse = LangevinOptions { dt: Some(trap.period() / 10.0), ..Default::default() };
        assert!(matches!(
            integrate_langevin(&trap, &[], &undriven(), &quiet(1.0), &coarse, 0),
            Err(Error::InvalidArgument(_))
        ));
        let drive = undriven().with_squeeze(1.0, 0.0);
        assert!(matches!(
            integrate_langevin(&trap, &[], &drive, &quiet(1.0), &LangevinOptions::default(), 0),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn reproducible_for_equal_seeds() {
        let trap = TrapConfig::default();
        let opts = LangevinOptions { duration: 20.0 * trap.period(), ..Default::default() };
        let noise = NoiseModel::default();
        let a = integrate_langevin(&trap, &[], &DriveConfig::default(), &noise, &opts, 9).unwrap();
        let b = integrate_langevin(&trap, &[], &DriveConfig::default(), &noise, &opts, 9).unwrap();
        let c = integrate_langevin(&trap, &[], &DriveConfig::default(), &noise, &opts, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
