use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyFactor {
    pub name: String,
    pub value: f64,
}

/// Ordered product of detection losses between the ion and the TAC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub factors: Vec<EfficiencyFactor>,
}

/// Fraction of the full sphere inside a cone of numerical aperture `na`.
pub fn solid_angle_fraction(na: f64) -> Result<f64> {
    if !(na > 0.0 && na <= 1.0) {
        return Err(Error::invalid(format!("numerical aperture must lie in (0, 1], got {na}")));
    }
    Ok((1.0 - (1.0 - na * na).sqrt()) / 2.0)
}

impl EfficiencyChain {
    pub fn new() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.factors.push(EfficiencyFactor { name: name.to_string(), value });
        self
    }

    /// Imaging NA 0.36, lens transmittance 0.80, PMT 0.23, splitter 0.70,
    /// 12 % residual loss, TAC conversion 0.66.
    pub fn nominal() -> Self {
        Self::new()
            .with("solid_angle", solid_angle_fraction(0.36).expect("valid NA"))
            .with("lens_transmittance", 0.80)
            .with("detector_quantum_efficiency", 0.23)
            .with("beam_splitter", 0.70)
            .with("residual_loss", 0.88)
            .with("converter", 0.66)
    }

    /// Single-factor chain pinned to a measured efficiency.
    pub fn measured(value: f64) -> Self {
        Self::new().with("measured", value)
    }
}

impl Default for EfficiencyChain {
    fn default() -> Self {
        Self::nominal()
    }
}

pub fn collection_efficiency(chain: &EfficiencyChain) -> Result<f64> {
    if chain.factors.is_empty() {
        return Err(Error::invalid("efficiency chain is empty"));
    }
    chain.factors.iter().try_fold(1.0, |acc, f| {
        if f.value > 0.0 && f.value <= 1.0 {
            Ok(acc * f.value)
        } else {
            Err(Error::invalid(format!("efficiency factor {} = {} outside (0, 1]", f.name, f.value)))
        }
    })
}
