use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::LockModel;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Success probability defining the critical voltage.
pub const LOCK_SUCCESS_TARGET: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockPoint {
    pub voltage: f64,
    pub trials: usize,
    pub locked: usize,
    pub probability: f64,
    /// Binomial standard error √(p(1−p)/n).
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundResult {
    pub points: Vec<LockPoint>,
    /// V
    pub critical_voltage: f64,
    /// N
    pub critical_force: f64,
    pub force_per_volt: f64,
    pub squeezing_enabled: bool,
}

/// Pairs (i < j) whose probabilities decrease by more than `n_sigma`
/// combined standard errors (with a floor of one count per run).
pub fn monotonicity_violations(points: &[LockPoint], n_sigma: f64) -> Vec<(usize, usize)> {
    let se = |p: &LockPoint| p.std_error.max(1.0 / p.trials as f64);
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let tol = n_sigma * (se(&points[i]).powi(2) + se(&points[j]).powi(2)).sqrt();
            if points[i].probability > points[j].probability + tol {
                out.push((i, j));
            }
        }
    }
    out
}

/// Log-voltage interpolation of the first upward crossing of the target.
pub fn critical_voltage(points: &[LockPoint], target: f64) -> Result<f64> {
    let i = points.iter().position(|p| p.probability >= target).ok_or(Error::Unbracketed { all_above: false })?;
    if i == 0 {
        return Err(Error::Unbracketed { all_above: true });
    }
    let (a, b) = (&points[i - 1], &points[i]);
    let f = (target - a.probability) / (b.probability - a.probability);
    Ok((a.voltage.ln() + f * (b.voltage.ln() - a.voltage.ln())).exp())
}

/// Lock probability over an ascending voltage grid and the 90% crossing.
pub fn lower_bound_search(
    model: &LockModel,
    voltages: &[f64],
    trials: usize,
    force_per_volt: f64,
    seed: u64,
) -> Result<LowerBoundResult> {
    if trials < 20 {
        return Err(Error::invalid(format!("lock probabilities need ≥ 20 trials, got {trials}")));
    }
    if voltages.len() < 2 || voltages.iter().any(|v| !(*v > 0.0)) || voltages.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("voltage grid must be positive, strictly ascending and have ≥ 2 points"));
    }
    model.validate()?;
    let jobs: Vec<(usize, usize)> = (0..voltages.len()).flat_map(|i| (0..trials).map(move |j| (i, j))).collect();
    let verdicts: Vec<bool> = jobs
        .par_iter()
        .map(|(i, j)| {
            let m = model.clone().with_voltage(voltages[*i]);
            m.verdict(derive_seed(derive_seed(seed, *i as u64), *j as u64)).map(|v| v.locked)
        })
        .collect::<Result<_>>()?;
    let points: Vec<LockPoint> = voltages
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let locked = verdicts[i * trials..(i + 1) * trials].iter().filter(|l| **l).count();
            let p = locked as f64 / trials as f64;
            LockPoint { voltage: *v, trials, locked, probability: p, std_error: (p * (1.0 - p) / trials as f64).sqrt() }
        })
        .collect();
    let critical = critical_voltage(&points, LOCK_SUCCESS_TARGET)?;
    Ok(LowerBoundResult {
        points,
        critical_voltage: critical,
        critical_force: critical * force_per_volt,
        force_per_volt,
        squeezing_enabled: model.drive.squeeze_enabled && model.drive.squeeze_gain > 0.0,
    })
}
