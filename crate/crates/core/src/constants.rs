//! Physical constants (CODATA 2018 exact or recommended values) and the
//! numerical parameters of the reference apparatus.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

/// Natural linewidth of the 397 nm S1/2–P1/2 line, Hz.
pub const LINEWIDTH_HZ: f64 = 20.68e6;
/// Resonance frequency of the cooling transition, Hz.
pub const RESONANCE_HZ: f64 = 755.22e12;

pub const SECULAR_Z_HZ: f64 = 186.02e3;
pub const SECULAR_X_HZ: f64 = 680.4e3;
pub const SECULAR_Y_HZ: f64 = 1020.3e3;

/// Secular-frequency drift: 10 Hz per 500 s.
pub const DRIFT_RATE_HZ_PER_S: f64 = 10.0 / 500.0;

pub const RED_DETUNING_HZ: f64 = -75e6;
pub const BLUE_DETUNING_HZ: f64 = 30e6;
pub const RED_SATURATION: f64 = 0.8;
pub const BLUE_SATURATION: f64 = 0.4;

/// Free-running phonon-laser amplitude, m.
pub const FREE_AMPLITUDE: f64 = 17.839e-6;
/// Static-force calibration slope, 362.8 yN/mV expressed in N/V.
pub const FORCE_PER_VOLT: f64 = 362.8e-24 / 1e-3;
/// Slope implied by the lower-bound forces (171.7 yN at 0.3 mV), N/V.
pub const LOWER_BOUND_FORCE_PER_VOLT: f64 = 171.7e-24 / 0.3e-3;
/// Amplitude calibration slope, 362.1 nm/mV in m/V.
pub const AMPLITUDE_PER_VOLT: f64 = 362.1e-6;
/// ∂A/∂F_0 = 0.9979 nm/yN in m/N.
pub const AMPLITUDE_PER_FORCE: f64 = 0.9979e-9 / 1e-24;

/// TAC time resolution, s.
pub const TAC_RESOLUTION: f64 = 10e-9;
/// Single measurement (gate) time, s.
pub const GATE_TIME: f64 = 10.0;
/// Gaussian dispersion width used in the fit model, s.
pub const SIGMA_T: f64 = 0.8e-6;
/// Measured collection efficiency.
pub const MEASURED_EFFICIENCY: f64 = 0.0028;
pub const SNR: f64 = 2.0;
/// Fixed presets for the fit scale and offset.
pub const FIXED_ALPHA: f64 = 4e-5;
pub const FIXED_BETA: f64 = 46.0;

pub fn hz_to_angular(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn angular_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Doppler-limit temperature ħΓ/(2k_B).
pub fn doppler_temperature(linewidth: f64) -> f64 {
    HBAR * linewidth / (2.0 * K_B)
}
