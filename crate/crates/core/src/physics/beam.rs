use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{self, C_LIGHT, HBAR};
use crate::error::ensure_finite;
use crate::{Error, Result};

/// One 397 nm cooling/amplification beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserBeam {
    /// Detuning Δ from resonance, rad/s. Negative is red.
    pub detuning: f64,
    /// Saturation parameter s.
    pub saturation: f64,
    /// Wave number k, rad/m.
    pub wave_number: f64,
    /// Natural linewidth Γ, rad/s.
    pub linewidth: f64,
}

impl LaserBeam {
    pub fn new(detuning: f64, saturation: f64, wave_number: f64, linewidth: f64) -> Result<Self> {
        ensure_finite("detuning", detuning)?;
        if !(saturation >= 0.0 && saturation.is_finite()) {
            return Err(Error::invalid(format!("saturation must be ≥ 0, got {saturation}")));
        }
        if !(wave_number > 0.0 && wave_number.is_finite()) {
            return Err(Error::invalid(format!("wave number must be > 0, got {wave_number}")));
        }
        if !(linewidth > 0.0 && linewidth.is_finite()) {
            return Err(Error::invalid(format!("linewidth must be > 0, got {linewidth}")));
        }
        Ok(Self { detuning, saturation, wave_number, linewidth })
    }

    /// Beam on the reference 397 nm line with the detuning given in Hz.
    pub fn from_hz(detuning_hz: f64, saturation: f64) -> Result<Self> {
        Self::new(
            constants::hz_to_angular(detuning_hz),
            saturation,
            reference_wave_number(),
            constants::hz_to_angular(constants::LINEWIDTH_HZ),
        )
    }

    pub fn cooling() -> Self {
        Self::from_hz(constants::RED_DETUNING_HZ, constants::RED_SATURATION).expect("valid constants")
    }

    pub fn heating() -> Self {
        Self::from_hz(constants::BLUE_DETUNING_HZ, constants::BLUE_SATURATION).expect("valid constants")
    }

    pub fn default_pair() -> Vec<Self> {
        vec![Self::cooling(), Self::heating()]
    }

    pub fn is_red(&self) -> bool {
        self.detuning < 0.0
    }

    pub fn is_blue(&self) -> bool {
        self.detuning > 0.0
    }

    /// Peak rate Γs/(4π(1+s)) reached on Doppler resonance.
    pub fn peak_rate(&self) -> f64 {
        self.linewidth * self.saturation / (4.0 * PI * (1.0 + self.saturation))
    }

    /// Scattering rate for an effective (Doppler-shifted) detuning.
    #[inline]
    pub fn rate_at_detuning(&self, effective_detuning: f64) -> f64 {
        let x = effective_detuning / self.linewidth;
        self.linewidth * self.saturation / (4.0 * PI) / (1.0 + self.saturation + 4.0 * x * x)
    }

    /// Rate at oscillation phase θ = ω_i t + φ for amplitude `amplitude`.
    #[inline]
    pub fn rate_at_phase(&self, amplitude: f64, omega: f64, theta: f64) -> f64 {
        self.rate_at_detuning(self.detuning - self.wave_number * omega * amplitude * theta.cos())
    }

    /// Upper bound of the rate over a full oscillation period.
    pub fn max_rate(&self, amplitude: f64, omega: f64) -> f64 {
        let swing = (self.wave_number * omega * amplitude).abs();
        let (lo, hi) = (self.detuning - swing, self.detuning + swing);
        if lo <= 0.0 && hi >= 0.0 {
            self.peak_rate()
        } else {
            self.rate_at_detuning(lo.abs().min(hi.abs()))
        }
    }
}

/// k = 2π f_res / c for the 755.22 THz line.
pub fn reference_wave_number() -> f64 {
    2.0 * PI * constants::RESONANCE_HZ / C_LIGHT
}

fn check_motion(amplitude: f64, phase: f64, omega: f64, t: f64) -> Result<()> {
    ensure_finite("amplitude", amplitude)?;
    ensure_finite("phase", phase)?;
    ensure_finite("injection frequency", omega)?;
    ensure_finite("time", t)?;
    if amplitude < 0.0 {
        return Err(Error::invalid(format!("amplitude must be ≥ 0, got {amplitude}")));
    }
    Ok(())
}

/// Photon scattering rate of one beam for an ion moving as A sin(ω_i t + φ).
pub fn scattering_rate(beam: &LaserBeam, amplitude: f64, phase: f64, omega: f64, t: f64) -> Result<f64> {
    check_motion(amplitude, phase, omega, t)?;
    Ok(beam.rate_at_phase(amplitude, omega, omega * t + phase))
}

pub fn total_scattering_rate(
    beams: &[LaserBeam],
    amplitude: f64,
    phase: f64,
    omega: f64,
    t: f64,
) -> Result<f64> {
    if beams.is_empty() {
        return Err(Error::invalid("at least one beam is required"));
    }
    check_motion(amplitude, phase, omega, t)?;
    let theta = omega * t + phase;
    Ok(beams.iter().map(|b| b.rate_at_phase(amplitude, omega, theta)).sum())
}

/// Total fluorescence of a set of beams for fixed oscillation parameters.
/// This is the intensity of the photon point process and the `ρ(t)` of the
/// fit model.
#[derive(Debug, Clone, PartialEq)]
pub struct FluorescenceModel {
    pub beams: Vec<LaserBeam>,
    pub amplitude: f64,
    pub phase: f64,
    pub omega: f64,
}

impl FluorescenceModel {
    pub fn new(beams: Vec<LaserBeam>, amplitude: f64, phase: f64, omega: f64) -> Result<Self> {
        if beams.is_empty() {
            return Err(Error::invalid("at least one beam is required"));
        }
        check_motion(amplitude, phase, omega, 0.0)?;
        if omega <= 0.0 {
            return Err(Error::invalid("injection frequency must be > 0"));
        }
        Ok(Self { beams, amplitude, phase, omega })
    }

    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        self.rate_at_phase(self.omega * t + self.phase)
    }

    #[inline]
    pub fn rate_at_phase(&self, theta: f64) -> f64 {
        self.beams.iter().map(|b| b.rate_at_phase(self.amplitude, self.omega, theta)).sum()
    }

    /// Sum of the per-beam maxima; never below the true maximum.
    pub fn upper_bound(&self) -> f64 {
        self.beams.iter().map(|b| b.max_rate(self.amplitude, self.omega)).sum()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Period-averaged rate by composite Simpson quadrature.
    pub fn mean_rate(&self) -> f64 {
        let n = 8192;
        let h = 2.0 * PI / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * self.rate_at_phase(i as f64 * h);
        }
        acc * h / 3.0 / (2.0 * PI)
    }
}

/// Which light-damping expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingConvention {
    /// ζ_j = −(4ħk²Δ/Γ)/(m[1 + s + 4(Δ/Γ)²]²), without a factor s_j.
    #[default]
    Unsaturated,
    /// Standard Doppler theory, which carries an extra factor s_j. Equal to
    /// the linearization of [`radiation_pressure_force`].
    Standard,
}

/// Light-induced damping rate ζ_j in 1/s. Positive for red beams.
pub fn damping_coefficient(beam: &LaserBeam, mass: f64, convention: DampingConvention) -> Result<f64> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid(format!("mass must be > 0, got {mass}")));
    }
    let x = beam.detuning / beam.linewidth;
    let denom = 1.0 + beam.saturation + 4.0 * x * x;
    let zeta = -(4.0 * HBAR * beam.wave_number * beam.wave_number * x) / (mass * denom * denom);
    Ok(match convention {
        DampingConvention::Unsaturated => zeta,
        DampingConvention::Standard => zeta * beam.saturation,
    })
}

/// ζ = Σ ζ_j.
pub fn total_damping(beams: &[LaserBeam], mass: f64, convention: DampingConvention) -> Result<f64> {
    beams.iter().map(|b| damping_coefficient(b, mass, convention)).sum()
}

/// Saturable radiation-pressure force of one beam on an ion with velocity `v`
/// along the beam, ħk(Γ/2)s / (1 + s + 4[(Δ − kv)/Γ]²).
pub fn radiation_pressure_force(beam: &LaserBeam, velocity: f64) -> Result<f64> {
    ensure_finite("velocity", velocity)?;
    Ok(radiation_force(beam, velocity))
}

#[inline]
pub(crate) fn radiation_force(beam: &LaserBeam, velocity: f64) -> f64 {
    let x = (beam.detuning - beam.wave_number * velocity) / beam.linewidth;
    HBAR * beam.wave_number * 0.5 * beam.linewidth * beam.saturation
        / (1.0 + beam.saturation + 4.0 * x * x)
}

/// ∂F/∂v at v = 0. The ratio −(1/m)·slope / ζ (unsaturated convention) equals s_j exactly.
pub fn radiation_force_slope(beam: &LaserBeam) -> f64 {
    let x = beam.detuning / beam.linewidth;
    let denom = 1.0 + beam.saturation + 4.0 * x * x;
    4.0 * HBAR * beam.wave_number * beam.wave_number * beam.saturation * x / (denom * denom)
}
