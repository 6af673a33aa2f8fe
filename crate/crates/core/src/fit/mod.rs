//! Least-squares recovery of (A, φ, α, β, σ_t) from a folded histogram.

mod guess;
mod lm;
mod model;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use guess::{initial_guess, is_flat};
pub use lm::{fit_counts, fit_histogram, FitOptions, Weighting};
pub use model::{model_curve, second_peak_height, smeared_rate_at_phase, ModelGeometry, DEFAULT_OVERSAMPLE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitModelParams {
    /// m
    pub amplitude: f64,
    /// rad
    pub phase: f64,
    pub alpha: f64,
    /// Background counts per bin.
    pub beta: f64,
    /// Gaussian smear width, s.
    pub sigma_t: f64,
}

impl FitModelParams {
    pub fn validate(&self) -> Result<()> {
        for p in Param::ALL {
            crate::error::ensure_finite(p.name(), self.get(p))?;
        }
        if self.amplitude < 0.0 || self.beta < 0.0 || self.sigma_t < 0.0 || self.alpha < 0.0 {
            return Err(Error::invalid("amplitude, alpha, beta and sigma_t must be ≥ 0"));
        }
        Ok(())
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Amplitude => self.amplitude,
            Param::Phase => self.phase,
            Param::Alpha => self.alpha,
            Param::Beta => self.beta,
            Param::SigmaT => self.sigma_t,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Amplitude => self.amplitude = v,
            Param::Phase => self.phase = v,
            Param::Alpha => self.alpha = v,
            Param::Beta => self.beta = v,
            Param::SigmaT => self.sigma_t = v,
        }
    }

    pub fn wrapped(mut self) -> Self {
        self.phase = wrap_phase(self.phase);
        self
    }
}

/// Maps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Amplitude,
    Phase,
    Alpha,
    Beta,
    SigmaT,
}

impl Param {
    pub const ALL: [Param; 5] = [Param::Amplitude, Param::Phase, Param::Alpha, Param::Beta, Param::SigmaT];

    pub fn name(self) -> &'static str {
        match self {
            Param::Amplitude => "amplitude",
            Param::Phase => "phase",
            Param::Alpha => "alpha",
            Param::Beta => "beta",
            Param::SigmaT => "sigma_t",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Param {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "amplitude" => Ok(Param::Amplitude),
            "phi" | "phase" => Ok(Param::Phase),
            "alpha" => Ok(Param::Alpha),
            "beta" => Ok(Param::Beta),
            "sigma_t" | "sigma" => Ok(Param::SigmaT),
            other => Err(Error::invalid(format!("unknown fit parameter {other:?}"))),
        }
    }
}

/// Parameters held fixed during a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrozenMask([bool; 5]);

impl FrozenMask {
    pub fn none() -> Self {
        Self([false; 5])
    }

    /// σ_t, α and β held at their supplied values; only (A, φ) fitted.
    pub fn standard() -> Self {
        Self::from_params(&[Param::SigmaT, Param::Alpha, Param::Beta])
    }

    pub fn all_but(keep: &[Param]) -> Self {
        let mut m = Self([true; 5]);
        for p in keep {
            m.0[p.index()] = false;
        }
        m
    }

    pub fn from_params(ps: &[Param]) -> Self {
        let mut m = Self::none();
        for p in ps {
            m.0[p.index()] = true;
        }
        m
    }

    pub fn is_frozen(&self, p: Param) -> bool {
        self.0[p.index()]
    }

    pub fn free(&self) -> Vec<Param> {
        Param::ALL.into_iter().filter(|p| !self.is_frozen(*p)).collect()
    }

    pub fn frozen(&self) -> Vec<Param> {
        Param::ALL.into_iter().filter(|p| self.is_frozen(*p)).collect()
    }
}

impl FromStr for FrozenMask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::none());
        }
        let ps = s.split(',').map(Param::from_str).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_params(&ps))
    }
}

impl std::fmt::Display for FrozenMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.frozen().iter().map(|p| p.name()).collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

/// α = ηt_m/n and β = N/(n(1 + SNR)).
pub fn derive_alpha_beta(eta: f64, gate_time: f64, n: usize, total_counts: f64, snr: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::invalid("number of intervals must be > 0"));
    }
    if !(snr > -1.0) {
        return Err(Error::invalid(format!("snr must exceed −1, got {snr}")));
    }
    if !(eta > 0.0 && eta <= 1.0) || !(gate_time > 0.0) || !(total_counts >= 0.0) {
        return Err(Error::invalid("η ∈ (0, 1], t_m > 0 and N ≥ 0 required"));
    }
    let n = n as f64;
    Ok((eta * gate_time / n, total_counts / (n * (1.0 + snr))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FitModelParams,
    /// One-sigma errors; zero for frozen parameters.
    pub errors: FitModelParams,
    pub rss: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub frozen: FrozenMask,
    pub weighting: Weighting,
}

const REPORT_MAGIC: &str = "# phonon-twin fit report v1";

impl FitResult {
    /// Stable `key = value` report.
    pub fn report(&self, config_hash: Option<&str>) -> String {
        let mut s = String::new();
        writeln!(s, "{REPORT_MAGIC}").unwrap();
        for p in Param::ALL {
            writeln!(s, "{} = {:e}", p.name(), self.params.get(p)).unwrap();
            writeln!(s, "{}_err = {:e}", p.name(), self.errors.get(p)).unwrap();
        }
        writeln!(s, "rss = {:e}", self.rss).unwrap();
        writeln!(s, "dof = {}", self.dof).unwrap();
        writeln!(s, "reduced_chi2 = {:e}", self.reduced_chi2).unwrap();
        writeln!(s, "converged = {}", self.converged).unwrap();
        writeln!(s, "iterations = {}", self.iterations).unwrap();
        writeln!(s, "frozen = {}", self.frozen).unwrap();
        writeln!(s, "weighting = {}", self.weighting.name()).unwrap();
        writeln!(s, "config_hash = {}", config_hash.unwrap_or("none")).unwrap();
        s
    }

    /// Parses a report; returns the result and the config hash.
    pub fn parse_report(text: &str) -> Result<(Self, Option<String>)> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(REPORT_MAGIC) {
            return Err(Error::Parse("not a fit report".into()));
        }
        let mut kv = BTreeMap::new();
        for line in lines.map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("malformed line {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Parse(format!("missing key {k}")));
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parse(format!("bad value for {k}")))
        }
        let mut params = FitModelParams { amplitude: 0.0, phase: 0.0, alpha: 0.0, beta: 0.0, sigma_t: 0.0 };
        let mut errors = params;
        for p in Param::ALL {
            params.set(p, num(p.name(), get(p.name())?)?);
            let ek = format!("{}_err", p.name());
            errors.set(p, num(&ek, get(&ek)?)?);
        }
        let weighting = match get("weighting")?.as_str() {
            "poisson" => Weighting::Poisson,
            "unweighted" => Weighting::Unweighted,
            w => return Err(Error::Parse(format!("unknown weighting {w}"))),
        };
        let hash = match get("config_hash")?.as_str() {
            "none" => None,
            h => Some(h.to_string()),
        };
        Ok((
            Self {
                params,
                errors,
                rss: num("rss", get("rss")?)?,
                dof: num("dof", get("dof")?)?,
                reduced_chi2: num("reduced_chi2", get("reduced_chi2")?)?,
                converged: num("converged", get("converged")?)?,
                iterations: num("iterations", get("iterations")?)?,
                frozen: get("frozen")?.parse().map_err(|e: Error| Error::Parse(e.to_string()))?,
                weighting,
            },
            hash,
        ))
    }
}
