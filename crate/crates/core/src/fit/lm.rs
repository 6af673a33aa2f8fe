use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{guess::is_flat, FitModelParams, FitResult, FrozenMask, ModelGeometry, Param};
use crate::photon::TacHistogram;
use crate::physics::LaserBeam;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Residuals scaled by 1/√max(count, 1).
    #[default]
    Poisson,
    Unweighted,
}

impl Weighting {
    pub fn name(self) -> &'static str {
        match self {
            Weighting::Poisson => "poisson",
            Weighting::Unweighted => "unweighted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub weighting: Weighting,
    pub max_iterations: usize,
    /// Relative RSS change that ends the search.
    pub rss_tolerance: f64,
    /// Scaled step norm that ends the search.
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { weighting: Weighting::Poisson, max_iterations: 200, rss_tolerance: 1e-8, step_tolerance: 1e-10 }
    }
}

/// Levenberg–Marquardt fit of the folded model to a histogram.
pub fn fit_histogram(
    hist: &TacHistogram,
    beams: &[LaserBeam],
    omega: f64,
    init: &FitModelParams,
    frozen: FrozenMask,
    opts: &FitOptions,
) -> Result<FitResult> {
    hist.validate()?;
    if hist.total_counts == 0 {
        return Err(Error::invalid("histogram is empty"));
    }
    let geom = ModelGeometry::for_histogram(hist, beams, omega)?;
    let data: Vec<f64> = hist.counts.iter().map(|c| *c as f64).collect();
    fit_counts(&geom, &data, init, frozen, opts)
}

struct Problem<'a> {
    geom: &'a ModelGeometry,
    data: &'a [f64],
    weights: Vec<f64>,
    base: FitModelParams,
    free: Vec<Param>,
    scales: Vec<f64>,
}

impl Problem<'_> {
    fn params(&self, u: &DVector<f64>) -> FitModelParams {
        let mut p = self.base;
        for (j, par) in self.free.iter().enumerate() {
            p.set(*par, u[j] * self.scales[j]);
        }
        p
    }

    fn lower(&self, j: usize) -> f64 {
        match self.free[j] {
            Param::Phase => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    fn upper(&self, j: usize) -> f64 {
        match self.free[j] {
            Param::SigmaT => self.geom.period / 2.0 / self.scales[j],
            _ => f64::INFINITY,
        }
    }

    fn clamp(&self, u: &mut DVector<f64>) {
        for j in 0..u.len() {
            u[j] = u[j].clamp(self.lower(j), self.upper(j));
        }
    }

    fn residuals(&self, u: &DVector<f64>) -> DVector<f64> {
        let model = self.geom.evaluate_raw(&self.params(u));
        DVector::from_iterator(
            self.data.len(),
            self.data.iter().zip(&model).zip(&self.weights).map(|((c, m), w)| (c - m) * w),
        )
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.data.len();
        let k = u.len();
        let mut jac = DMatrix::zeros(n, k);
        for j in 0..k {
            let h = 1e-5 * u[j].abs().max(1.0);
            let (mut up, mut dn) = (u.clone(), u.clone());
            let (hi, lo) = if u[j] - h < self.lower(j) {
                up[j] += h;
                (h, 0.0)
            } else if u[j] + h > self.upper(j) {
                dn[j] -= h;
                (0.0, h)
            } else {
                up[j] += h;
                dn[j] -= h;
                (h, h)
            };
            let ru = if hi > 0.0 { self.residuals(&up) } else { self.residuals(u) };
            let rd = if lo > 0.0 { self.residuals(&dn) } else { self.residuals(u) };
            jac.set_column(j, &((ru - rd) / (hi + lo)));
        }
        jac
    }
}

/// Fits expected-count data (not necessarily integer) on a prepared geometry.
pub fn fit_counts(
    geom: &ModelGeometry,
    data: &[f64],
    init: &FitModelParams,
    frozen: FrozenMask,
    opts: &FitOptions,
) -> Result<FitResult> {
    init.validate()?;
    if data.len() != geom.n_bins() {
        return Err(Error::BinningMismatch(format!("{} data points for {} bins", data.len(), geom.n_bins())));
    }
    if data.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::invalid("counts must be finite and ≥ 0"));
    }
    if init.sigma_t > geom.period / 2.0 {
        return Err(Error::invalid("initial σ_t exceeds T/2"));
    }
    let free = frozen.free();
    if (!frozen.is_frozen(Param::Amplitude) || !frozen.is_frozen(Param::Phase)) && is_flat(data, geom.bin_widths()) {
        return Err(Error::NoModulation);
    }
    let weights: Vec<f64> = match opts.weighting {
        Weighting::Poisson => data.iter().map(|c| 1.0 / c.max(1.0).sqrt()).collect(),
        Weighting::Unweighted => vec![1.0; data.len()],
    };
    let scales: Vec<f64> = free
        .iter()
        .map(|p| match p {
            Param::Amplitude => 1e-6,
            Param::Phase => 1.0,
            Param::Alpha => if init.alpha > 0.0 { init.alpha } else { 1.0 },
            Param::Beta => init.beta.max(1.0),
            Param::SigmaT => 1e-7,
        })
        .collect();
    let prob = Problem { geom, data, weights, base: *init, free: free.clone(), scales };
    let k = free.len();
    let mut u = DVector::from_iterator(k, free.iter().zip(&prob.scales).map(|(p, s)| init.get(*p) / s));

    let mut r = prob.residuals(&u);
    let mut rss = r.norm_squared();
    let mut converged = k == 0;
    let mut iterations = 0;
    let mut mu = 1e-3;
    let mut nu = 2.0;
    let mut jac = if k > 0 { prob.jacobian(&u) } else { DMatrix::zeros(data.len(), 0) };

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut lhs = jtj.clone();
        let dmax = (0..k).map(|i| jtj[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
        for i in 0..k {
            lhs[(i, i)] += mu * jtj[(i, i)].max(1e-12 * dmax);
        }
        let Some(step) = lhs.clone().cholesky().map(|c| c.solve(&(-&g))).or_else(|| lhs.lu().solve(&(-&g))) else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let mut trial = &u + &step;
        prob.clamp(&mut trial);
        let actual_step = &trial - &u;
        let r_new = prob.residuals(&trial);
        let rss_new = r_new.norm_squared();
        let predicted = -(2.0 * g.dot(&actual_step) + (&jtj * &actual_step).dot(&actual_step));
        if rss_new.is_finite() && rss_new <= rss {
            let rel = if rss > 0.0 { (rss - rss_new) / rss } else { 0.0 };
            let gain = if predicted > 0.0 { (rss - rss_new) / predicted } else { 1.0 };
            let step_norm = actual_step.norm();
            u = trial;
            r = r_new;
            rss = rss_new;
            mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * gain.min(1.0) - 1.0).powi(3));
            nu = 2.0;
            if rel < opts.rss_tolerance || step_norm < opts.step_tolerance || rss == 0.0 {
                converged = true;
            } else {
                jac = prob.jacobian(&u);
            }
        } else {
            if actual_step.norm() < opts.step_tolerance {
                converged = true;
            }
            mu *= nu;
            nu *= 2.0;
        }
    }

    let params = prob.params(&u).wrapped();
    let n_data = data.len();
    let dof = n_data.saturating_sub(k);
    let reduced_chi2 = if dof > 0 { rss / dof as f64 } else { f64::NAN };
    let mut errors = FitModelParams { amplitude: 0.0, phase: 0.0, alpha: 0.0, beta: 0.0, sigma_t: 0.0 };
    if k > 0 {
        let jac = prob.jacobian(&u);
        let jtj = jac.transpose() * &jac;
        let cov = jtj.clone().cholesky().map(|c| c.inverse()).or_else(|| jtj.try_inverse());
        match cov {
            Some(cov) => {
                let scale = match opts.weighting {
                    Weighting::Poisson => 1.0,
                    Weighting::Unweighted => reduced_chi2,
                };
                for (j, p) in free.iter().enumerate() {
                    errors.set(*p, (cov[(j, j)] * scale).max(0.0).sqrt() * prob.scales[j]);
                }
            }
            None => {
                for p in &free {
                    errors.set(*p, f64::NAN);
                }
                converged = false;
            }
        }
    }
    Ok(FitResult { params, errors, rss, dof, reduced_chi2, converged, iterations, frozen, weighting: opts.weighting })
}
