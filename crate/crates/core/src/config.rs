//! Declarative run configuration. Frequencies are given in Hz in the file
//! (`*_hz` keys) and converted to rad/s on load; unknown keys are rejected.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{self, hz_to_angular};
use crate::dynamics::{damping_for_response, DriftModel, ElectricNoise, LockModel, NoiseModel};
use crate::fit::{FitOptions, FrozenMask, Param, Weighting};
use crate::photon::DetectionConfig;
use crate::physics::{DriveConfig, LaserBeam, TrapConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub physics: PhysicsSection,
    pub pipeline: PipelineSection,
    pub fit: FitSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_501,
            physics: PhysicsSection::default(),
            pipeline: PipelineSection::default(),
            fit: FitSection::default(),
            experiment: ExperimentSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamEntry {
    pub detuning_hz: f64,
    pub saturation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub linewidth_hz: f64,
    pub resonance_hz: f64,
    pub beams: Vec<BeamEntry>,
    pub trap: TrapSection,
    pub drive: DriveSection,
    pub noise: NoiseSection,
    pub electric_noise: ElectricNoiseSection,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            linewidth_hz: constants::LINEWIDTH_HZ,
            resonance_hz: constants::RESONANCE_HZ,
            beams: vec![
                BeamEntry { detuning_hz: constants::RED_DETUNING_HZ, saturation: constants::RED_SATURATION },
                BeamEntry { detuning_hz: constants::BLUE_DETUNING_HZ, saturation: constants::BLUE_SATURATION },
            ],
            trap: TrapSection::default(),
            drive: DriveSection::default(),
            noise: NoiseSection::default(),
            electric_noise: ElectricNoiseSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub mass_u: f64,
    pub charge_e: f64,
    pub secular_z_hz: f64,
    pub secular_x_hz: f64,
    pub secular_y_hz: f64,
    pub drift_rate_hz_per_s: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            mass_u: 40.0,
            charge_e: 1.0,
            secular_z_hz: constants::SECULAR_Z_HZ,
            secular_x_hz: constants::SECULAR_X_HZ,
            secular_y_hz: constants::SECULAR_Y_HZ,
            drift_rate_hz_per_s: constants::DRIFT_RATE_HZ_PER_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    /// V
    pub injection_voltage: f64,
    /// Defaults to the axial secular frequency.
    pub injection_frequency_hz: Option<f64>,
    /// N/V
    pub force_per_volt: f64,
    /// m/V, sets the effective damping through ∂A/∂F_0 = 1/(mζω_z).
    pub amplitude_per_volt: f64,
    /// m
    pub free_amplitude: f64,
    /// Phase of the oscillation relative to the TAC stop signal, rad.
    pub reference_phase: f64,
    pub squeeze_gain: f64,
    pub squeeze_phase: f64,
    pub squeeze_enabled: bool,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            injection_voltage: 18.25e-3,
            injection_frequency_hz: None,
            force_per_volt: constants::FORCE_PER_VOLT,
            amplitude_per_volt: constants::AMPLITUDE_PER_VOLT,
            free_amplitude: constants::FREE_AMPLITUDE,
            reference_phase: 0.042,
            squeeze_gain: 0.0,
            squeeze_phase: FRAC_PI_2,
            squeeze_enabled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// K; defaults to the Doppler limit.
    pub temperature: Option<f64>,
    /// 1/s; defaults to the value implied by the amplitude response.
    pub damping: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectricNoiseSection {
    pub rms_voltage: f64,
    pub bandwidth_hz: f64,
}

impl Default for ElectricNoiseSection {
    fn default() -> Self {
        Self {
            rms_voltage: crate::dynamics::DEFAULT_NOISE_RMS,
            bandwidth_hz: crate::dynamics::DEFAULT_NOISE_BANDWIDTH_HZ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub efficiency: f64,
    /// Signal-to-background ratio; omit to disable background.
    pub snr: Option<f64>,
    /// s
    pub timing_jitter: f64,
    /// s
    pub tac_resolution: f64,
    /// s
    pub gate_time: f64,
    /// Folding period, s; defaults to 2π/ω_i.
    pub period: Option<f64>,
    /// Step of the rotating-frame integration over a gate, s.
    pub quadrature_dt: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            efficiency: constants::MEASURED_EFFICIENCY,
            snr: Some(constants::SNR),
            timing_jitter: constants::SIGMA_T,
            tac_resolution: constants::TAC_RESOLUTION,
            gate_time: constants::GATE_TIME,
            period: None,
            quadrature_dt: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScalePreset {
    /// α = ηt_m/n, β = N/(n(1+SNR)).
    #[default]
    Derived,
    /// α = 4×10⁻⁵, β = 46.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub sigma_t: f64,
    pub freeze: Vec<String>,
    pub weighting: Weighting,
    pub scale: ScalePreset,
    pub max_iterations: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            sigma_t: constants::SIGMA_T,
            freeze: vec!["sigma_t".into(), "alpha".into(), "beta".into()],
            weighting: Weighting::Poisson,
            scale: ScalePreset::Derived,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    #[default]
    None,
    Linear,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Repetitions ε per voltage.
    pub trials: usize,
    /// DC calibration points as (V, m).
    pub dc_measurements: Vec<[f64; 2]>,
    pub amplitude_voltages: Vec<f64>,
    pub sensitivity_voltage: f64,
    pub squeeze_gains: Vec<f64>,
    pub squeeze_phases: Vec<f64>,
    pub squeeze_trials: usize,
    /// Length of each squeeze trial in secular periods.
    pub squeeze_periods: usize,
    pub bootstrap_resamples: usize,
    pub lower_bound_voltages: Vec<f64>,
    pub lower_bound_trials: usize,
    /// Gain and phase of the "3 dB" setting used by the lower-bound search.
    pub lower_bound_squeeze_gain: f64,
    pub lower_bound_squeeze_phase: f64,
    pub lock_duration: f64,
    pub lock_threshold: f64,
    pub lock_window_fraction: f64,
    pub drift: DriftKind,
    /// Slope converting critical voltage to force, N/V.
    pub lower_bound_force_per_volt: Option<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            trials: 50,
            dc_measurements: vec![[3.0, 12e-6]],
            amplitude_voltages: vec![0.0, 2.5e-3, 5e-3, 7.5e-3, 10e-3, 12.5e-3, 15e-3, 18.25e-3],
            sensitivity_voltage: 18.25e-3,
            squeeze_gains: vec![0.0, 0.3, 0.6, 0.9],
            squeeze_phases: vec![0.0, std::f64::consts::FRAC_PI_4, FRAC_PI_2],
            squeeze_trials: 50,
            squeeze_periods: 10_000,
            bootstrap_resamples: 500,
            lower_bound_voltages: vec![
                0.05e-3, 0.075e-3, 0.1e-3, 0.125e-3, 0.15e-3, 0.2e-3, 0.25e-3, 0.3e-3, 0.4e-3, 0.5e-3, 0.6e-3, 0.8e-3,
            ],
            lower_bound_trials: 100,
            lower_bound_squeeze_gain: 0.999,
            lower_bound_squeeze_phase: FRAC_PI_2,
            lock_duration: 1.0,
            lock_threshold: crate::dynamics::DEFAULT_LOCK_THRESHOLD,
            lock_window_fraction: 0.5,
            drift: DriftKind::None,
            lower_bound_force_per_volt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), svg: true }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// sha256 of the canonical TOML serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        positive("linewidth_hz", p.linewidth_hz)?;
        positive("resonance_hz", p.resonance_hz)?;
        if p.beams.is_empty() {
            return Err(Error::invalid("at least one beam is required"));
        }
        positive("pipeline.gate_time", self.pipeline.gate_time)?;
        positive("pipeline.tac_resolution", self.pipeline.tac_resolution)?;
        positive("pipeline.quadrature_dt", self.pipeline.quadrature_dt)?;
        if let Some(t) = self.pipeline.period {
            positive("pipeline.period", t)?;
        }
        positive("drive.amplitude_per_volt", p.drive.amplitude_per_volt)?;
        positive("drive.free_amplitude", p.drive.free_amplitude)?;
        if !(self.fit.sigma_t >= 0.0 && self.fit.sigma_t.is_finite()) {
            return Err(Error::invalid("fit.sigma_t must be ≥ 0"));
        }
        self.frozen()?;
        let e = &self.experiment;
        if e.trials == 0 || e.squeeze_trials == 0 || e.lower_bound_trials == 0 {
            return Err(Error::invalid("trial counts must be ≥ 1"));
        }
        positive("experiment.lock_duration", e.lock_duration)?;
        positive("experiment.lock_threshold", e.lock_threshold)?;
        if e.squeeze_periods == 0 {
            return Err(Error::invalid("squeeze_periods must be ≥ 1"));
        }
        // builds every physics object, which validates the rest
        let sc = self.physics_objects()?;
        sc.detection.validate()?;
        sc.lock.validate()?;
        Ok(())
    }

    pub fn frozen(&self) -> Result<FrozenMask> {
        let ps = self.fit.freeze.iter().map(|s| s.parse::<Param>()).collect::<Result<Vec<_>>>()?;
        Ok(FrozenMask::from_params(&ps))
    }

    pub fn beams(&self) -> Result<Vec<LaserBeam>> {
        let p = &self.physics;
        let k = hz_to_angular(p.resonance_hz) / constants::C_LIGHT;
        let gamma = hz_to_angular(p.linewidth_hz);
        p.beams.iter().map(|b| LaserBeam::new(hz_to_angular(b.detuning_hz), b.saturation, k, gamma)).collect()
    }

    pub fn trap(&self) -> Result<TrapConfig> {
        let t = &self.physics.trap;
        let trap = TrapConfig {
            mass: t.mass_u * constants::AMU,
            charge: t.charge_e * constants::E_CHARGE,
            secular_z: hz_to_angular(t.secular_z_hz),
            secular_x: hz_to_angular(t.secular_x_hz),
            secular_y: hz_to_angular(t.secular_y_hz),
            drift_rate: t.drift_rate_hz_per_s,
        };
        trap.validate()?;
        Ok(trap)
    }

    /// Converts the file sections into validated physics objects.
    pub fn physics_objects(&self) -> Result<PhysicsObjects> {
        let p = &self.physics;
        let beams = self.beams()?;
        let trap = self.trap()?;
        let d = &p.drive;
        let drive = DriveConfig {
            injection_voltage: d.injection_voltage,
            injection_frequency: hz_to_angular(d.injection_frequency_hz.unwrap_or(p.trap.secular_z_hz)),
            force_per_volt: d.force_per_volt,
            squeeze_gain: d.squeeze_gain,
            squeeze_phase: d.squeeze_phase,
            squeeze_enabled: d.squeeze_enabled,
        };
        drive.validate()?;
        let noise = NoiseModel {
            temperature: p.noise.temperature.unwrap_or_else(|| constants::doppler_temperature(hz_to_angular(p.linewidth_hz))),
            damping: p.noise.damping.unwrap_or_else(|| damping_for_response(&trap, d.force_per_volt, d.amplitude_per_volt)),
        };
        noise.validate()?;
        let detection = DetectionConfig {
            efficiency: self.pipeline.efficiency,
            snr: self.pipeline.snr,
            timing_jitter: self.pipeline.timing_jitter,
        };
        let electric = ElectricNoise::from_bandwidth_hz(p.electric_noise.rms_voltage, p.electric_noise.bandwidth_hz);
        electric.validate()?;
        let e = &self.experiment;
        let drift = match e.drift {
            DriftKind::None => DriftModel::None,
            DriftKind::Linear => DriftModel::Linear { rate_hz_per_s: p.trap.drift_rate_hz_per_s },
            DriftKind::RandomWalk => DriftModel::RandomWalk { rate_hz_per_s: p.trap.drift_rate_hz_per_s, horizon: e.lock_duration },
        };
        let lock = LockModel {
            trap,
            drive,
            noise,
            electric,
            drift,
            amplitude: d.free_amplitude,
            duration: e.lock_duration,
            dt: (electric.correlation_time / 10.0).min(e.lock_duration / 1000.0),
            record_interval: e.lock_duration / 1000.0,
            initial_phase: 0.0,
            threshold: e.lock_threshold,
            window_fraction: e.lock_window_fraction,
        };
        let period = self.pipeline.period.unwrap_or(std::f64::consts::TAU / drive.injection_frequency);
        let fit = FitOptions { weighting: self.fit.weighting, max_iterations: self.fit.max_iterations, ..FitOptions::default() };
        Ok(PhysicsObjects { beams, trap, drive, noise, detection, lock, period, fit })
    }
}

/// Validated, SI-unit objects built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct PhysicsObjects {
    pub beams: Vec<LaserBeam>,
    pub trap: TrapConfig,
    pub drive: DriveConfig,
    pub noise: NoiseModel,
    pub detection: DetectionConfig,
    pub lock: LockModel,
    pub period: f64,
    pub fit: FitOptions,
}
