use std::f64::consts::TAU;

use super::{QuadraturePath, Trajectory};
use crate::{Error, Result};

/// Sliding lock-in projection X = (2/W)∫z sin ω_i t, Y = (2/W)∫z cos ω_i t.
///
/// The window is rounded to a whole number of injection periods and one
/// output sample is produced per period, stamped at the window centre.
/// The trajectory must be uniformly sampled.
pub fn demodulate(traj: &Trajectory, omega_i: f64, window: f64) -> Result<QuadraturePath> {
    if !(omega_i > 0.0 && omega_i.is_finite()) {
        return Err(Error::invalid("demodulation frequency must be > 0"));
    }
    let period = TAU / omega_i;
    if !(window >= period) {
        return Err(Error::invalid(format!("window {window:e} s is shorter than one period {period:e} s")));
    }
    if traj.len() < 2 {
        return Err(Error::invalid("trajectory needs at least two samples"));
    }
    let dt = (traj.times[traj.len() - 1] - traj.times[0]) / (traj.len() - 1) as f64;
    if !(dt > 0.0) || traj.times.windows(2).any(|w| ((w[1] - w[0]) / dt - 1.0).abs() > 1e-6) {
        return Err(Error::invalid("trajectory must be uniformly sampled"));
    }
    let periods = (window / period).round().max(1.0);
    let w = ((periods * period) / dt).round() as usize;
    if w == 0 || w > traj.len() {
        return Err(Error::invalid("window longer than the trajectory"));
    }
    let stride = ((period / dt).round() as usize).max(1);

    let mut ps = Vec::with_capacity(traj.len() + 1);
    let mut pc = Vec::with_capacity(traj.len() + 1);
    let (mut s, mut c) = (0.0, 0.0);
    ps.push(0.0);
    pc.push(0.0);
    for (t, z) in traj.times.iter().zip(&traj.positions) {
        let (sn, cs) = (omega_i * t).sin_cos();
        s += z * sn;
        c += z * cs;
        ps.push(s);
        pc.push(c);
    }

    let mut out = QuadraturePath::with_capacity((traj.len() - w) / stride + 1);
    let scale = 2.0 / w as f64;
    let mut start = 0;
    while start + w <= traj.len() {
        let end = start + w;
        let t_mid = 0.5 * (traj.times[start] + traj.times[end - 1]);
        out.push(t_mid, scale * (ps[end] - ps[start]), scale * (pc[end] - pc[start]));
        start += stride;
    }
    Ok(out)
}
