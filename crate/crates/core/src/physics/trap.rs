use serde::{Deserialize, Serialize};

use crate::constants::{self, AMU, E_CHARGE};
use crate::error::ensure_finite;
use crate::{Error, Result};

/// Ion and trap parameters. Only the axial (z) mode is dynamical; the radial
/// frequencies are carried as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    /// Axial secular frequency ω_z, rad/s.
    pub secular_z: f64,
    pub secular_x: f64,
    pub secular_y: f64,
    /// Linear drift of ω_z/2π, Hz per second.
    pub drift_rate: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            mass: 40.0 * AMU,
            charge: E_CHARGE,
            secular_z: constants::hz_to_angular(constants::SECULAR_Z_HZ),
            secular_x: constants::hz_to_angular(constants::SECULAR_X_HZ),
            secular_y: constants::hz_to_angular(constants::SECULAR_Y_HZ),
            drift_rate: constants::DRIFT_RATE_HZ_PER_S,
        }
    }
}

impl TrapConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("charge", self.charge),
            ("secular_z", self.secular_z),
            ("secular_x", self.secular_x),
            ("secular_y", self.secular_y),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        ensure_finite("drift_rate", self.drift_rate)
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.secular_z
    }
}

/// Injection drive at ω_i and the phase-locked parametric (squeeze) drive
/// at 2ω_i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// V
    pub injection_voltage: f64,
    /// ω_i, rad/s.
    pub injection_frequency: f64,
    /// Voltage-to-force slope, N/V.
    pub force_per_volt: f64,
    /// Dimensionless gain g ∈ [0, 1].
    pub squeeze_gain: f64,
    /// Relative phase φ of the 2ω_i drive, rad.
    pub squeeze_phase: f64,
    pub squeeze_enabled: bool,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            injection_voltage: 18.25e-3,
            injection_frequency: constants::hz_to_angular(constants::SECULAR_Z_HZ),
            force_per_volt: constants::FORCE_PER_VOLT,
            squeeze_gain: 0.0,
            squeeze_phase: std::f64::consts::FRAC_PI_2,
            squeeze_enabled: false,
        }
    }
}

impl DriveConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("injection_voltage", self.injection_voltage)?;
        ensure_finite("force_per_volt", self.force_per_volt)?;
        ensure_finite("squeeze_phase", self.squeeze_phase)?;
        if self.force_amplitude() < 0.0 {
            return Err(Error::invalid("injection force F_0 must be ≥ 0"));
        }
        if !(self.injection_frequency > 0.0 && self.injection_frequency.is_finite()) {
            return Err(Error::invalid("injection frequency must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.squeeze_gain) {
            return Err(Error::invalid(format!("squeeze gain must lie in [0, 1], got {}", self.squeeze_gain)));
        }
        Ok(())
    }

    /// F_0 = V_i × ∂F/∂V.
    pub fn force_amplitude(&self) -> f64 {
        self.injection_voltage * self.force_per_volt
    }

    pub fn squeeze_frequency(&self) -> f64 {
        2.0 * self.injection_frequency
    }

    /// Effective gain: g when the squeeze drive is on, else 0.
    pub fn effective_gain(&self) -> f64 {
        if self.squeeze_enabled {
            self.squeeze_gain
        } else {
            0.0
        }
    }

    /// g cos 2φ, zero with squeezing off.
    pub fn squeeze_product(&self) -> f64 {
        self.effective_gain() * (2.0 * self.squeeze_phase).cos()
    }

    pub fn with_voltage(mut self, voltage: f64) -> Self {
        self.injection_voltage = voltage;
        self
    }

    pub fn with_squeeze(mut self, gain: f64, phase: f64) -> Self {
        self.squeeze_enabled = true;
        self.squeeze_gain = gain;
        self.squeeze_phase = phase;
        self
    }
}

/// Static restoring force m ω_z² z balancing a DC displacement z.
pub fn static_force(trap: &TrapConfig, displacement: f64) -> f64 {
    trap.mass * trap.secular_z * trap.secular_z * displacement
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn defaults_reproduce_trap_frequencies() {
        let t = TrapConfig::default();
        assert_relative_eq!(constants::angular_to_hz(t.secular_z), 186.02e3, max_relative = 1e-12);
        assert_relative_eq!(constants::angular_to_hz(t.secular_x), 680.4e3, max_relative = 1e-12);
        assert_relative_eq!(constants::angular_to_hz(t.secular_y), 1020.3e3, max_relative = 1e-12);
        t.validate().unwrap();
    }

    #[test]
    fn static_force_at_twelve_microns() {
        let t = TrapConfig::default();
        assert_eq!(static_force(&t, 0.0), 0.0);
        let f = static_force(&t, 12e-6);
        assert!((f / 1088.5e-21 - 1.0).abs() < 5e-3, "F_c = {f}");
        assert_eq!(static_force(&t, -12e-6), -f);
    }

    #[test]
    fn drive_validation_and_squeeze_frequency() {
        let d = DriveConfig::default();
        d.validate().unwrap();
        assert_eq!(d.squeeze_frequency(), 2.0 * d.injection_frequency);
        assert_eq!(d.squeeze_product(), 0.0);
        assert!(d.with_voltage(-1.0).validate().is_err());
        assert!(d.with_squeeze(1.5, 0.0).validate().is_err());
        assert_relative_eq!(d.force_amplitude(), 18.25 * 362.8e-24, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn static_force_scales(z in -1e-4f64..1e-4, k in 0.1f64..10.0) {
            let t = TrapConfig::default();
            let f = static_force(&t, z);
            prop_assert!((static_force(&t, k * z) - k * f).abs() <= 1e-12 * f.abs().max(1e-40));
            let doubled = TrapConfig { secular_z: 2.0 * t.secular_z, ..t };
            prop_assert!((static_force(&doubled, z) - 4.0 * f).abs() <= 1e-12 * f.abs().max(1e-40));
        }
    }
}
