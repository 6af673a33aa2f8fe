use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::hz_to_angular;
use crate::physics::TrapConfig;
use crate::{Error, Result};

/// ω_z(t) = ω_z(0) + 2π·rate·t for the trap's configured drift rate.
pub fn drift_secular_frequency(trap: &TrapConfig, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be ≥ 0, got {t}")));
    }
    Ok(linear_drift(trap, t))
}

pub(crate) fn linear_drift(trap: &TrapConfig, t: f64) -> f64 {
    trap.secular_z + hz_to_angular(trap.drift_rate) * t
}

/// Secular-frequency detuning seen by the injection reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftModel {
    #[default]
    None,
    /// Deterministic ramp, Hz/s.
    Linear { rate_hz_per_s: f64 },
    /// Random walk whose RMS excursion after `horizon` seconds equals the
    /// ramp excursion rate·horizon.
    RandomWalk { rate_hz_per_s: f64, horizon: f64 },
}

impl DriftModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DriftModel::None => Ok(()),
            DriftModel::Linear { rate_hz_per_s } => crate::error::ensure_finite("drift rate", rate_hz_per_s),
            DriftModel::RandomWalk { rate_hz_per_s, horizon } => {
                crate::error::ensure_finite("drift rate", rate_hz_per_s)?;
                if !(horizon > 0.0 && horizon.is_finite()) {
                    return Err(Error::invalid("random-walk horizon must be > 0"));
                }
                Ok(())
            }
        }
    }

    pub fn process(&self) -> DriftProcess {
        DriftProcess { model: *self, offset: 0.0, t: 0.0 }
    }
}

/// Stateful sampler of the detuning Δω(t), rad/s.
#[derive(Debug, Clone)]
pub struct DriftProcess {
    model: DriftModel,
    offset: f64,
    t: f64,
}

impl DriftProcess {
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> f64 {
        self.t += dt;
        match self.model {
            DriftModel::None => {}
            DriftModel::Linear { rate_hz_per_s } => self.offset = hz_to_angular(rate_hz_per_s) * self.t,
            DriftModel::RandomWalk { rate_hz_per_s, horizon } => {
                let diffusion = hz_to_angular(rate_hz_per_s).powi(2) * horizon;
                let n: f64 = rng.sample(StandardNormal);
                self.offset += (diffusion * dt).sqrt() * n;
            }
        }
        self.offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::angular_to_hz;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn linear_ramp() {
        let trap = TrapConfig::default();
        let w0 = drift_secular_frequency(&trap, 0.0).unwrap();
        assert_eq!(w0, trap.secular_z);
        let d500 = angular_to_hz(drift_secular_frequency(&trap, 500.0).unwrap() - w0);
        let d250 = angular_to_hz(drift_secular_frequency(&trap, 250.0).unwrap() - w0);
        assert_relative_eq!(d500, 10.0, max_relative = 1e-9);
        assert_relative_eq!(d250, 5.0, max_relative = 1e-9);
        assert!(drift_secular_frequency(&trap, -1.0).is_err());
    }

    #[test]
    fn random_walk_matches_ramp_rms() {
        let model = DriftModel::RandomWalk { rate_hz_per_s: 0.02, horizon: 500.0 };
        let mut rng = rng_from_seed(3);
        let trials = 2000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let mut p = model.process();
            for _ in 0..50 {
                p.advance(10.0, &mut rng);
            }
            acc += p.offset().powi(2);
        }
        let rms_hz = angular_to_hz((acc / trials as f64).sqrt());
        assert!((rms_hz - 10.0).abs() < 0.5, "{rms_hz}");
    }
}
