//! Photon arrival sampling, detection losses, background and TAC folding.

mod tac;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::constants;
use crate::physics::FluorescenceModel;
use crate::{Error, Result};

pub use tac::{merge, tac_fold, TacHistogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhotonSource {
    Signal,
    Background,
}

/// Time-ordered photon arrivals inside the gate [0, gate].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhotonStream {
    pub times: Vec<f64>,
    pub sources: Vec<PhotonSource>,
    pub gate: f64,
}

impl PhotonStream {
    pub fn empty(gate: f64) -> Self {
        Self { times: Vec::new(), sources: Vec::new(), gate }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn count(&self, source: PhotonSource) -> usize {
        self.sources.iter().filter(|s| **s == source).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.sources.len() {
            return Err(Error::invalid("times and sources differ in length"));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("arrival times are not sorted"));
        }
        if self.times.iter().any(|t| !(*t >= 0.0 && *t <= self.gate)) {
            return Err(Error::invalid("arrival outside the gate"));
        }
        Ok(())
    }

    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|a, b| self.times[*a].total_cmp(&self.times[*b]));
        self.times = idx.iter().map(|i| self.times[*i]).collect();
        self.sources = idx.iter().map(|i| self.sources[*i]).collect();
    }
}

/// Detection stage: efficiency, uniform background and timing jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Overall detection efficiency η.
    pub efficiency: f64,
    /// Signal-to-background ratio; `None` disables background.
    pub snr: Option<f64>,
    /// RMS Gaussian jitter of signal arrival times relative to the
    /// injection reference, s.
    pub timing_jitter: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { efficiency: constants::MEASURED_EFFICIENCY, snr: Some(constants::SNR), timing_jitter: constants::SIGMA_T }
    }
}

impl DetectionConfig {
    pub fn ideal() -> Self {
        Self { efficiency: 1.0, snr: None, timing_jitter: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(format!("efficiency must lie in (0, 1], got {}", self.efficiency)));
        }
        if let Some(snr) = self.snr {
            if !(snr > 0.0 && snr.is_finite()) {
                return Err(Error::invalid(format!("snr must be > 0, got {snr}")));
            }
        }
        if !(self.timing_jitter >= 0.0 && self.timing_jitter.is_finite()) {
            return Err(Error::invalid("timing jitter must be ≥ 0"));
        }
        Ok(())
    }
}

fn check_gate(t_m: f64) -> Result<()> {
    if !(t_m > 0.0 && t_m.is_finite()) {
        return Err(Error::invalid(format!("gate time must be > 0, got {t_m}")));
    }
    Ok(())
}

/// Visits the accepted points of a thinned homogeneous process of rate
/// `bound` on [0, t_m]; stops at the first rate violation.
fn thin<R, F, V>(rate: F, bound: f64, t_m: f64, rng: &mut R, mut visit: V) -> Result<()>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
    V: FnMut(f64),
{
    check_gate(t_m)?;
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(Error::invalid(format!("rate bound must be finite and ≥ 0, got {bound}")));
    }
    if bound == 0.0 {
        return Ok(());
    }
    let mut t = 0.0;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / bound;
        if t > t_m {
            return Ok(());
        }
        let r = rate(t);
        if !(r >= 0.0) {
            return Err(Error::invalid(format!("negative or undefined rate {r} at t = {t:e}")));
        }
        if r > bound * (1.0 + 1e-9) {
            return Err(Error::invalid(format!("rate {r:e} exceeds bound {bound:e} at t = {t:e}")));
        }
        if rng.random::<f64>() * bound < r {
            visit(t);
        }
    }
}

/// Inhomogeneous Poisson arrivals by thinning against a known upper bound.
pub fn sample_arrivals<R, F>(rate: F, bound: f64, t_m: f64, rng: &mut R) -> Result<PhotonStream>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let mut out = PhotonStream::empty(t_m);
    thin(rate, bound, t_m, rng, |t| out.times.push(t))?;
    out.sources = vec![PhotonSource::Signal; out.times.len()];
    Ok(out)
}

/// Number of arrivals only, without storing the stream.
pub fn count_arrivals<R, F>(rate: F, bound: f64, t_m: f64, rng: &mut R) -> Result<u64>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let mut n = 0u64;
    thin(rate, bound, t_m, rng, |_| n += 1)?;
    Ok(n)
}

fn jitter_in_gate<R: Rng + ?Sized>(t: f64, normal: &Normal<f64>, gate: f64, rng: &mut R) -> f64 {
    let mut x = t + normal.sample(rng);
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > gate {
            x = 2.0 * gate - x;
        } else {
            return x;
        }
    }
}

/// Uniform background with mean count (signal/snr), jitter on the signal,
/// then sort.
fn finish<R: Rng + ?Sized>(mut stream: PhotonStream, det: &DetectionConfig, rng: &mut R) -> Result<PhotonStream> {
    let gate = stream.gate;
    if det.timing_jitter > 0.0 {
        let normal = Normal::new(0.0, det.timing_jitter).map_err(|e| Error::invalid(e.to_string()))?;
        for t in stream.times.iter_mut() {
            *t = jitter_in_gate(*t, &normal, gate, rng);
        }
    }
    if let Some(snr) = det.snr {
        let mean = stream.len() as f64 / snr;
        if mean > 0.0 {
            let n = Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?.sample(rng) as usize;
            for _ in 0..n {
                stream.times.push(rng.random::<f64>() * gate);
                stream.sources.push(PhotonSource::Background);
            }
        }
    }
    stream.sort();
    Ok(stream)
}

/// Keeps each emitted photon with probability η, then adds background and
/// jitter.
pub fn detect<R: Rng + ?Sized>(stream: &PhotonStream, det: &DetectionConfig, rng: &mut R) -> Result<PhotonStream> {
    det.validate()?;
    let mut out = PhotonStream::empty(stream.gate);
    for (t, s) in stream.times.iter().zip(&stream.sources) {
        if *s == PhotonSource::Background || det.efficiency >= 1.0 || rng.random::<f64>() < det.efficiency {
            out.times.push(*t);
            out.sources.push(*s);
        }
    }
    finish(out, det, rng)
}

/// Detected stream drawn directly at rate ηρ(t): statistically identical to
/// `detect(sample_arrivals(ρ))` without materializing every emission.
pub fn sample_detected<R: Rng + ?Sized>(
    model: &FluorescenceModel,
    det: &DetectionConfig,
    t_m: f64,
    rng: &mut R,
) -> Result<PhotonStream> {
    det.validate()?;
    let eta = det.efficiency;
    let signal = sample_arrivals(|t| eta * model.rate(t), eta * model.upper_bound(), t_m, rng)?;
    finish(signal, det, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::LaserBeam;
    use crate::rng::{rng_from_seed, trial_rng};

    #[test]
    fn zero_rate_gives_empty_stream() {
        let s = sample_arrivals(|_| 0.0, 0.0, 1.0, &mut rng_from_seed(1)).unwrap();
        assert!(s.is_empty());
        let s = sample_arrivals(|_| 0.0, 10.0, 1.0, &mut rng_from_seed(1)).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn bad_rates_are_rejected() {
        let mut rng = rng_from_seed(2);
        assert!(sample_arrivals(|_| -1.0, 10.0, 1.0, &mut rng).is_err());
        assert!(sample_arrivals(|_| 20.0, 10.0, 1.0, &mut rng).is_err());
        assert!(sample_arrivals(|_| 1.0, f64::INFINITY, 1.0, &mut rng).is_err());
        assert!(sample_arrivals(|_| 1.0, 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn homogeneous_counts_are_poisson() {
        let (r, t) = (500.0, 2.0);
        let counts: Vec<f64> =
            (0..100).map(|i| sample_arrivals(|_| r, r, t, &mut trial_rng(7, i)).unwrap().len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / 100.0;
        assert!((mean - r * t).abs() < 3.0 * (r * t / 100.0).sqrt());
    }

    #[test]
    fn stream_is_sorted_and_gated() {
        let model = FluorescenceModel::new(LaserBeam::default_pair(), 22e-6, 0.0, 2.0 * std::f64::consts::PI * 186.02e3).unwrap();
        let det = DetectionConfig { efficiency: 0.01, ..DetectionConfig::default() };
        let s = sample_detected(&model, &det, 0.05, &mut rng_from_seed(3)).unwrap();
        s.validate().unwrap();
        assert!(s.count(PhotonSource::Background) > 0);
    }

    #[test]
    fn ideal_detection_is_identity() {
        let s = sample_arrivals(|_| 1e3, 1e3, 1.0, &mut rng_from_seed(4)).unwrap();
        let d = detect(&s, &DetectionConfig::ideal(), &mut rng_from_seed(5)).unwrap();
        assert_eq!(s, d);
    }

    #[test]
    fn thinning_ratio() {
        let det = DetectionConfig { efficiency: 0.5, snr: None, timing_jitter: 0.0 };
        let mut kept = 0usize;
        let mut total = 0usize;
        for i in 0..100 {
            let s = sample_arrivals(|_| 1e3, 1e3, 1.0, &mut trial_rng(8, i)).unwrap();
            total += s.len();
            kept += detect(&s, &det, &mut trial_rng(9, i)).unwrap().len();
        }
        let p = kept as f64 / total as f64;
        let sd = (0.25 / total as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * sd);
    }

    #[test]
    fn jitter_stays_in_gate() {
        let normal = Normal::new(0.0, 5.0).unwrap();
        let mut rng = rng_from_seed(6);
        for _ in 0..1000 {
            let x = jitter_in_gate(0.5, &normal, 1.0, &mut rng);
            assert!((0.0..=1.0).contains(&x));
        }
    }
}
