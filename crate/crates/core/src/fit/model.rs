use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::FitModelParams;
use crate::photon::TacHistogram;
use crate::physics::LaserBeam;
use crate::{Error, Result};

/// Default fine-grid samples per TAC bin.
pub const DEFAULT_OVERSAMPLE: usize = 8;

/// Precomputed geometry for evaluating the folded model
/// P_i = α ∫_bin (ρ ∗ G) dt / w̄ + β w_i / w̄, with w̄ = T/n.
#[derive(Clone)]
pub struct ModelGeometry {
    pub period: f64,
    pub bin_width: f64,
    pub omega: f64,
    beams: Vec<LaserBeam>,
    n_bins: usize,
    fine: usize,
    /// Bin i integrates fine cells overlaps[i] with the given lengths.
    overlaps: Vec<Vec<(usize, f64)>>,
    widths: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ModelGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelGeometry")
            .field("period", &self.period)
            .field("bin_width", &self.bin_width)
            .field("n_bins", &self.n_bins)
            .field("fine", &self.fine)
            .finish()
    }
}

impl ModelGeometry {
    pub fn new(period: f64, bin_width: f64, beams: &[LaserBeam], omega: f64, oversample: usize) -> Result<Self> {
        let template = TacHistogram::empty(period, bin_width)?;
        if beams.is_empty() {
            return Err(Error::invalid("model needs at least one beam"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid("injection frequency must be > 0"));
        }
        if oversample < 4 {
            return Err(Error::invalid("oversample must be ≥ 4"));
        }
        let n = template.n_intervals();
        let fine = n * oversample;
        let h = period / fine as f64;
        let edges = template.bin_edges();
        let overlaps = edges
            .iter()
            .map(|(lo, w)| {
                let hi = lo + w;
                let k0 = ((lo / h).floor() as usize).min(fine - 1);
                let k1 = ((hi / h).ceil() as usize).min(fine);
                (k0..k1)
                    .filter_map(|k| {
                        let a = (k as f64 * h).max(*lo);
                        let b = ((k + 1) as f64 * h).min(hi);
                        (b > a).then_some((k, b - a))
                    })
                    .collect()
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            period,
            bin_width,
            omega,
            beams: beams.to_vec(),
            n_bins: n,
            fine,
            overlaps,
            widths: edges.iter().map(|e| e.1).collect(),
            forward: planner.plan_fft_forward(fine),
            inverse: planner.plan_fft_inverse(fine),
        })
    }

    pub fn for_histogram(hist: &TacHistogram, beams: &[LaserBeam], omega: f64) -> Result<Self> {
        Self::new(hist.period, hist.bin_width, beams, omega, DEFAULT_OVERSAMPLE)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn beams(&self) -> &[LaserBeam] {
        &self.beams
    }

    fn mean_width(&self) -> f64 {
        self.period / self.n_bins as f64
    }

    /// ρ sampled at cell midpoints.
    fn rate_grid(&self, amplitude: f64, phase: f64) -> Vec<f64> {
        let h = self.period / self.fine as f64;
        (0..self.fine)
            .map(|k| {
                let theta = self.omega * (k as f64 + 0.5) * h + phase;
                self.beams.iter().map(|b| b.rate_at_phase(amplitude, self.omega, theta)).sum()
            })
            .collect()
    }

    /// Discrete periodic Gaussian on the fine grid, normalized to unit sum.
    pub fn kernel(&self, sigma_t: f64) -> Vec<f64> {
        let m = self.fine;
        let mut g = vec![0.0; m];
        if sigma_t <= 0.0 {
            g[0] = 1.0;
            return g;
        }
        let h = self.period / m as f64;
        let images = (6.0 * sigma_t / self.period).ceil() as i64 + 1;
        for (k, gk) in g.iter_mut().enumerate() {
            let d = if k <= m / 2 { k as f64 * h } else { (k as f64 - m as f64) * h };
            *gk = (-images..=images)
                .map(|j| {
                    let x = (d + j as f64 * self.period) / sigma_t;
                    (-0.5 * x * x).exp()
                })
                .sum();
        }
        let s: f64 = g.iter().sum();
        g.iter_mut().for_each(|x| *x /= s);
        g
    }

    /// Circular convolution of `x` with `kernel` on the fine grid.
    pub fn convolve(&self, x: &[f64], kernel: &[f64]) -> Vec<f64> {
        let mut a: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let mut b: Vec<Complex64> = kernel.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.forward.process(&mut a);
        self.forward.process(&mut b);
        for (u, v) in a.iter_mut().zip(&b) {
            *u *= v;
        }
        self.inverse.process(&mut a);
        let scale = 1.0 / self.fine as f64;
        a.iter().map(|c| c.re * scale).collect()
    }

    /// (ρ ∗ G) on the fine grid.
    pub fn smeared_rate(&self, amplitude: f64, phase: f64, sigma_t: f64) -> Vec<f64> {
        let rho = self.rate_grid(amplitude, phase);
        if sigma_t <= 0.0 {
            return rho;
        }
        self.convolve(&rho, &self.kernel(sigma_t))
    }

    fn bin_integrals(&self, fine: &[f64]) -> Vec<f64> {
        self.overlaps.iter().map(|cells| cells.iter().map(|(k, w)| fine[*k] * w).sum()).collect()
    }

    /// Expected counts per bin; skips validation.
    pub(crate) fn evaluate_raw(&self, p: &FitModelParams) -> Vec<f64> {
        let fine = self.smeared_rate(p.amplitude, p.phase, p.sigma_t.max(0.0));
        let wbar = self.mean_width();
        self.bin_integrals(&fine)
            .iter()
            .zip(&self.widths)
            .map(|(s, w)| p.alpha * s / wbar + p.beta * w / wbar)
            .collect()
    }

    pub fn evaluate(&self, p: &FitModelParams) -> Result<Vec<f64>> {
        p.validate()?;
        if p.sigma_t > self.period / 2.0 {
            return Err(Error::invalid(format!("σ_t = {:e} s exceeds T/2", p.sigma_t)));
        }
        Ok(self.evaluate_raw(p))
    }
}

/// Expected counts per TAC bin for the given parameters.
pub fn model_curve(p: &FitModelParams, beams: &[LaserBeam], omega: f64, hist: &TacHistogram) -> Result<Vec<f64>> {
    ModelGeometry::for_histogram(hist, beams, omega)?.evaluate(p)
}

/// (ρ ∗ G) at oscillation phase θ, by direct periodic quadrature.
pub fn smeared_rate_at_phase(beams: &[LaserBeam], amplitude: f64, omega: f64, sigma_t: f64, theta: f64) -> f64 {
    const M: usize = 8192;
    let rate = |th: f64| beams.iter().map(|b| b.rate_at_phase(amplitude, omega, th)).sum::<f64>();
    if sigma_t <= 0.0 {
        return rate(theta);
    }
    let s = sigma_t * omega;
    let images = (6.0 * s / TAU).ceil() as i64 + 1;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..M {
        let d = -std::f64::consts::PI + TAU * k as f64 / M as f64;
        let w: f64 = (-images..=images).map(|j| (-0.5 * ((d + j as f64 * TAU) / s).powi(2)).exp()).sum();
        num += w * rate(theta - d);
        den += w;
    }
    num / den
}

/// Height of the second fluorescence peak, (ρ ∗ G) at θ = π where the red
/// beam's Doppler resonance sits; grows monotonically with A over the
/// working range.
pub fn second_peak_height(beams: &[LaserBeam], amplitude: f64, omega: f64, sigma_t: f64) -> f64 {
    smeared_rate_at_phase(beams, amplitude, omega, sigma_t, std::f64::consts::PI)
}
