//! Stochastic dynamics of the injection-locked oscillator.
//!
//! Two levels of description are provided:
//!
//! * [`integrate_langevin`] – the full second-order equation of motion for
//!   z(t) with thermal forcing, the injection force and the 2ω_i parametric
//!   modulation, optionally with the saturable radiation-pressure forces that
//!   produce a self-sustained limit cycle.
//! * [`integrate_quadratures`] – the slowly varying quadratures X, Y of the
//!   rotating frame, integrated exactly as Ornstein–Uhlenbeck processes.
//!
//! [`simulate_injection_lock`] models the phase of the phonon laser relative
//! to the injection reference and feeds [`detect_lock`].

mod demod;
mod drift;
mod langevin;
mod lock;
mod quadrature;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constants::{self, K_B};
use crate::{Error, Result};

pub use demod::demodulate;
pub use drift::{drift_secular_frequency, DriftModel, DriftProcess};
pub use langevin::{integrate_langevin, DampingMode, LangevinOptions};
pub use lock::{
    circular_stats, detect_lock, simulate_injection_lock, LockModel, LockVerdict, DEFAULT_LOCK_THRESHOLD,
    DEFAULT_NOISE_BANDWIDTH_HZ, DEFAULT_NOISE_RMS,
};
pub use quadrature::{integrate_quadratures, QuadratureOptions, QuadratureStepper};

/// Thermal bath seen by the oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Bath temperature, K.
    pub temperature: f64,
    /// Effective damping ζ of the quadratures, 1/s.
    pub damping: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        let trap = crate::physics::TrapConfig::default();
        Self {
            temperature: constants::doppler_temperature(constants::hz_to_angular(constants::LINEWIDTH_HZ)),
            damping: damping_for_response(&trap, constants::FORCE_PER_VOLT, constants::AMPLITUDE_PER_VOLT),
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!("temperature must be ≥ 0, got {}", self.temperature)));
        }
        crate::error::ensure_finite("damping", self.damping)
    }

    /// Spectral density 2mζk_BT of each slow thermal force component f_x, f_y.
    pub fn quadrature_force_density(&self, mass: f64) -> f64 {
        2.0 * mass * self.damping * K_B * self.temperature
    }

    /// Density of the white force driving the full equation of motion. Half
    /// the quadrature value: a resonator only samples the spectrum near ±ω.
    pub fn langevin_force_density(&self, mass: f64) -> f64 {
        mass * self.damping * K_B * self.temperature
    }

    /// σ_X²(0) = σ_Y²(0) = k_BT/(2mω²).
    pub fn quadrature_variance(&self, mass: f64, omega: f64) -> f64 {
        K_B * self.temperature / (2.0 * mass * omega * omega)
    }
}

/// Damping that makes the linear response ∂A/∂F_0 = 1/(mζω_z) match a given
/// amplitude-per-volt calibration.
pub fn damping_for_response(trap: &crate::physics::TrapConfig, force_per_volt: f64, amplitude_per_volt: f64) -> f64 {
    force_per_volt / (trap.mass * trap.secular_z * amplitude_per_volt)
}

/// Voltage noise on the injection electrode, band-limited around ω_z. In the
/// rotating frame each quadrature is an Ornstein–Uhlenbeck process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectricNoise {
    /// RMS voltage of each slow quadrature, V.
    pub rms_voltage: f64,
    /// Correlation time of the slow quadratures, s.
    pub correlation_time: f64,
}

impl ElectricNoise {
    pub fn from_bandwidth_hz(rms_voltage: f64, bandwidth_hz: f64) -> Self {
        Self { rms_voltage, correlation_time: 1.0 / constants::hz_to_angular(bandwidth_hz) }
    }

    pub fn off() -> Self {
        Self { rms_voltage: 0.0, correlation_time: 1e-4 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rms_voltage >= 0.0 && self.rms_voltage.is_finite()) {
            return Err(Error::invalid("electric noise RMS must be ≥ 0"));
        }
        if !(self.correlation_time > 0.0 && self.correlation_time.is_finite()) {
            return Err(Error::invalid("electric noise correlation time must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OscillatorState {
    pub position: f64,
    pub velocity: f64,
    pub time: f64,
}

/// Sampled solution of the equation of motion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> OscillatorState {
        OscillatorState { position: self.positions[i], velocity: self.velocities[i], time: self.times[i] }
    }

    pub fn last(&self) -> Option<OscillatorState> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    /// Columnar text: header lines prefixed with `#`, then `time position velocity`.
    pub fn write_columns<W: Write>(&self, mut w: W, header: &[(String, String)]) -> Result<()> {
        for (k, v) in header {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# time position velocity")?;
        for i in 0..self.len() {
            writeln!(w, "{:e} {:e} {:e}", self.times[i], self.positions[i], self.velocities[i])?;
        }
        Ok(())
    }
}

/// Rotating-frame path: z(t) = X(t) sin(ω_i t) + Y(t) cos(ω_i t).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuadraturePath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl QuadraturePath {
    pub fn with_capacity(n: usize) -> Self {
        Self { times: Vec::with_capacity(n), x: Vec::with_capacity(n), y: Vec::with_capacity(n) }
    }

    pub fn push(&mut self, t: f64, x: f64, y: f64) {
        self.times.push(t);
        self.x.push(x);
        self.y.push(y);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.times.len() || self.y.len() != self.times.len() {
            return Err(Error::invalid("quadrature arrays differ in length"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("quadrature times must be strictly increasing"));
        }
        Ok(())
    }

    /// √(X² + Y²) per sample.
    pub fn amplitude(&self) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(x, y)| x.hypot(*y)).collect()
    }

    /// Oscillation phase atan2(Y, X) per sample.
    pub fn phase(&self) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(x, y)| y.atan2(*x)).collect()
    }

    /// δ_φ = Y/A_0.
    pub fn delta_phase(&self, free_amplitude: f64) -> Vec<f64> {
        self.y.iter().map(|y| y / free_amplitude).collect()
    }

    pub fn write_columns<W: Write>(&self, mut w: W, header: &[(String, String)]) -> Result<()> {
        for (k, v) in header {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# time X Y")?;
        for i in 0..self.len() {
            writeln!(w, "{:e} {:e} {:e}", self.times[i], self.x[i], self.y[i])?;
        }
        Ok(())
    }
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
