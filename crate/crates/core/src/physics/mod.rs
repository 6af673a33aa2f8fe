//! Closed-form physics kernels. Everything here is a pure function of its
//! arguments.

mod beam;
mod efficiency;
mod trap;

pub use beam::{
    damping_coefficient, radiation_force_slope, radiation_pressure_force, scattering_rate,
    total_damping, total_scattering_rate, DampingConvention, FluorescenceModel, LaserBeam,
};
pub use efficiency::{collection_efficiency, solid_angle_fraction, EfficiencyChain, EfficiencyFactor};
pub use trap::{static_force, DriveConfig, TrapConfig};
pub(crate) use beam::radiation_force;

use crate::{Error, Result};

/// Relative variance of the phase quadrature under a parametric drive,
/// σ_Y²(g, φ)/σ_Y²(0) = 1/(1 − g cos 2φ).
pub fn squeeze_variance_ratio(gain: f64, phase: f64) -> Result<f64> {
    crate::error::ensure_finite("squeeze gain", gain)?;
    crate::error::ensure_finite("squeeze phase", phase)?;
    let gc = gain * (2.0 * phase).cos();
    if gc >= 1.0 {
        return Err(Error::Unstable(format!(
            "g cos 2φ = {gc} ≥ 1 removes the damping of the phase quadrature"
        )));
    }
    Ok(1.0 / (1.0 - gc))
}

/// Companion law for the amplitude quadrature, 1/(1 + g cos 2φ).
pub fn anti_squeeze_variance_ratio(gain: f64, phase: f64) -> Result<f64> {
    let gc = gain * (2.0 * phase).cos();
    if gc <= -1.0 {
        return Err(Error::Unstable(format!(
            "g cos 2φ = {gc} ≤ −1 removes the damping of the amplitude quadrature"
        )));
    }
    Ok(1.0 / (1.0 + gc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn squeeze_ratio_values() {
        assert_eq!(squeeze_variance_ratio(0.0, 1.234).unwrap(), 1.0);
        // g cos 2φ = −1: the 3 dB point
        assert_relative_eq!(squeeze_variance_ratio(1.0, FRAC_PI_2).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(squeeze_variance_ratio(0.9, FRAC_PI_2).unwrap(), 1.0 / 1.9, epsilon = 1e-15);
        assert_relative_eq!(squeeze_variance_ratio(0.9, 0.0).unwrap(), 10.0, epsilon = 1e-12);
        assert!(matches!(squeeze_variance_ratio(1.0, 0.0), Err(Error::Unstable(_))));
        assert!(squeeze_variance_ratio(0.5, f64::NAN).is_err());
    }

    #[test]
    fn squeeze_ratio_is_pi_periodic_and_minimal_at_half_pi() {
        for &g in &[0.1, 0.5, 0.9] {
            let best = squeeze_variance_ratio(g, FRAC_PI_2).unwrap();
            for k in 0..64 {
                let phi = k as f64 * PI / 64.0;
                let r = squeeze_variance_ratio(g, phi).unwrap();
                assert_relative_eq!(r, squeeze_variance_ratio(g, phi + PI).unwrap(), epsilon = 1e-12);
                assert!(r >= best - 1e-15);
            }
        }
        assert_relative_eq!(anti_squeeze_variance_ratio(0.6, FRAC_PI_4).unwrap(), 1.0, epsilon = 1e-12);
    }
}
