use super::{wrap_phase, FitModelParams, ModelGeometry};
use crate::photon::TacHistogram;
use crate::physics::LaserBeam;
use crate::{Error, Result};

/// Significance threshold, in Poisson χ² units, of the first four
/// harmonics of the folded profile.
pub const MODULATION_CHI2_THRESHOLD: f64 = 50.0;

/// True when the histogram shows no periodic structure: the χ² reduction
/// from fitting harmonics 1–4 of the period, with Poisson variance set by
/// the mean count, stays below [`MODULATION_CHI2_THRESHOLD`].
pub fn is_flat(counts: &[f64], widths: &[f64]) -> bool {
    let n = counts.len();
    let period: f64 = widths.iter().sum();
    let total: f64 = counts.iter().sum();
    if total <= 0.0 || n < 9 {
        return true;
    }
    let wbar = period / n as f64;
    let density: Vec<f64> = counts.iter().zip(widths).map(|(c, w)| c * wbar / w).collect();
    let mean = density.iter().sum::<f64>() / n as f64;
    let mut t = 0.0;
    let mut chi2 = 0.0;
    let mut centres = Vec::with_capacity(n);
    for w in widths {
        centres.push(t + 0.5 * w);
        t += w;
    }
    for k in 1..=4 {
        let (mut a, mut b) = (0.0, 0.0);
        for (d, tc) in density.iter().zip(&centres) {
            let (s, c) = (std::f64::consts::TAU * k as f64 * tc / period).sin_cos();
            a += (d - mean) * c;
            b += (d - mean) * s;
        }
        chi2 += 2.0 * (a * a + b * b) / n as f64;
    }
    chi2 / mean.max(1.0) < MODULATION_CHI2_THRESHOLD
}

fn grid() -> Vec<f64> {
    (1..=90).map(|i| i as f64 * 0.5e-6).collect()
}

/// Starting point for the fit: for every amplitude on a coarse grid the
/// zero-phase template is matched to the data at all circular bin shifts;
/// the best (A, shift) wins and the shift is refined by a parabola through
/// its neighbours. With `scale = Some((α, β))` the template is compared at
/// that absolute scale, which is what pins A; otherwise α and β come from
/// linear least squares and only the phase is reliable.
pub fn initial_guess(
    hist: &TacHistogram,
    beams: &[LaserBeam],
    omega: f64,
    sigma_t: f64,
    scale: Option<(f64, f64)>,
) -> Result<FitModelParams> {
    hist.validate()?;
    let geom = ModelGeometry::for_histogram(hist, beams, omega)?;
    let data: Vec<f64> = hist.counts.iter().map(|c| *c as f64).collect();
    if is_flat(&data, geom.bin_widths()) {
        return Err(Error::NoModulation);
    }
    let n = data.len();
    let w = geom.bin_widths();
    let wbar = hist.period / n as f64;
    let scc: f64 = data.iter().map(|c| c * c).sum();
    let sww: f64 = w.iter().map(|x| (x / wbar).powi(2)).sum();
    let scw: f64 = data.iter().zip(w).map(|(c, x)| c * x / wbar).sum();

    struct Best {
        sse: f64,
        amplitude: f64,
        shift: usize,
        alpha: f64,
        beta: f64,
        curve: Vec<f64>,
    }
    let mut best: Option<Best> = None;
    for a in grid() {
        let tpl = geom.evaluate_raw(&FitModelParams { amplitude: a, phase: 0.0, alpha: 1.0, beta: 0.0, sigma_t });
        let stt: f64 = tpl.iter().map(|t| t * t).sum();
        let mut sses = Vec::with_capacity(n);
        for s in 0..n {
            let (mut sct, mut stw) = (0.0, 0.0);
            for i in 0..n {
                let t = tpl[(i + s) % n];
                sct += data[i] * t;
                stw += t * w[i] / wbar;
            }
            let (alpha, beta) = match scale {
                Some(ab) => ab,
                None => {
                    let det = stt * sww - stw * stw;
                    if det.abs() < 1e-300 {
                        sses.push(f64::INFINITY);
                        continue;
                    }
                    ((sct * sww - stw * scw) / det, (stt * scw - stw * sct) / det)
                }
            };
            let sse = scc - 2.0 * alpha * sct - 2.0 * beta * scw
                + alpha * alpha * stt
                + 2.0 * alpha * beta * stw
                + beta * beta * sww;
            sses.push(sse);
            if alpha > 0.0 && best.as_ref().is_none_or(|b| sse < b.sse) {
                best = Some(Best { sse, amplitude: a, shift: s, alpha, beta, curve: Vec::new() });
            }
        }
        if let Some(b) = best.as_mut() {
            if b.amplitude == a && b.curve.is_empty() {
                b.curve = sses;
            }
        }
    }
    let b = best.ok_or(Error::NoModulation)?;
    let s = b.shift;
    let (ym, y0, yp) = (b.curve[(s + n - 1) % n], b.curve[s], b.curve[(s + 1) % n]);
    let denom = ym - 2.0 * y0 + yp;
    let frac = if denom > 0.0 { (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let phase = wrap_phase(omega * (s as f64 + frac) * hist.bin_width);
    Ok(FitModelParams { amplitude: b.amplitude, phase, alpha: b.alpha, beta: b.beta.max(0.0), sigma_t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn flatness_detection() {
        let n = 538;
        let widths = vec![1.0; n];
        let mut rng = rng_from_seed(2);
        for _ in 0..20 {
            let noise: Vec<f64> = (0..n).map(|_| 100.0 + 10.0 * (rng.random::<f64>() - 0.5) * 3.46).collect();
            assert!(is_flat(&noise, &widths));
        }
        let modulated: Vec<f64> =
            (0..n).map(|i| 100.0 + 10.0 * (std::f64::consts::TAU * (i as f64 + 0.5) / n as f64).cos()).collect();
        assert!(!is_flat(&modulated, &widths));
        assert!(is_flat(&vec![0.0; n], &widths));
    }
}
