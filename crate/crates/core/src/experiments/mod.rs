//! Measurement campaigns built on the simulated measurement chain.

mod calibration;
mod campaign;
mod lower_bound;
mod measure;
mod record;
mod sensitivity;
mod squeeze;

pub use calibration::{amplitude_sweep, calibrate_force, linear_regression, run_trials, CalibrationRecord, Regression, SweepPoint};
pub use campaign::{run_campaign, Campaign, CampaignOutput};
pub use lower_bound::{
    critical_voltage, lower_bound_search, monotonicity_violations, LockPoint, LowerBoundResult, LOCK_SUCCESS_TARGET,
};
pub use measure::{
    fit_scale, fit_scenario_histogram, gate_amplitude_phase, measure_amplitude, simulate_gate, synthesize_histogram, TrialOutcome,
};
pub use record::{load_run, persist_run, RunRecord, SCHEMA_VERSION};
pub use sensitivity::{sensitivity, sensitivity_campaign, SensitivityReport};
pub use squeeze::{squeeze_sweep, SqueezePoint, SqueezeSettings};

use crate::config::{PhysicsObjects, RunConfig};
use crate::Result;

/// A validated configuration together with the objects built from it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: RunConfig,
    pub objects: PhysicsObjects,
    pub hash: String,
}

impl Scenario {
    pub fn from_config(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let objects = config.physics_objects()?;
        let hash = config.hash();
        Ok(Self { config, objects, hash })
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::from_config(RunConfig::default()).expect("default configuration is valid")
    }
}
