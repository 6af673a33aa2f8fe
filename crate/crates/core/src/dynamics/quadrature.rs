use rand::Rng;
use rand_distr::StandardNormal;

use super::{NoiseModel, QuadraturePath};
use crate::physics::{DriveConfig, TrapConfig};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureOptions {
    pub duration: f64,
    pub dt: f64,
    /// Starting (X, Y); `None` draws from the stationary distribution.
    pub initial: Option<(f64, f64)>,
}

/// Exact Ornstein–Uhlenbeck update of the slow quadratures
/// Ẋ = −λ_X X + f_x/(2mω_z), Ẏ = −λ_Y (Y − Ȳ) + f_y/(2mω_z).
#[derive(Debug, Clone)]
pub struct QuadratureStepper {
    decay_x: f64,
    decay_y: f64,
    kick_x: f64,
    kick_y: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub rate_x: f64,
    pub rate_y: f64,
    pub x: f64,
    pub y: f64,
}

impl QuadratureStepper {
    pub fn new(trap: &TrapConfig, drive: &DriveConfig, noise: &NoiseModel, dt: f64) -> Result<Self> {
        trap.validate()?;
        drive.validate()?;
        noise.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
        }
        let zeta = noise.damping;
        if zeta <= 0.0 {
            return Err(Error::Unstable(format!("quadrature damping ζ = {zeta} must be > 0")));
        }
        let gc = drive.squeeze_product();
        if gc >= 1.0 {
            return Err(Error::Unstable(format!("g cos 2φ = {gc} ≥ 1 drives Y unstable")));
        }
        if gc <= -1.0 {
            return Err(Error::Unstable(format!("g cos 2φ = {gc} ≤ −1 drives X unstable")));
        }
        let (m, w) = (trap.mass, trap.secular_z);
        let rate_x = 0.5 * zeta * (1.0 + gc);
        let rate_y = 0.5 * zeta * (1.0 - gc);
        let drive_scale = 1.0 / (2.0 * m * w);
        let s = noise.quadrature_force_density(m) * drive_scale * drive_scale;
        let var_x = s / (2.0 * rate_x);
        let var_y = s / (2.0 * rate_y);
        let mean_y = drive.force_amplitude() * drive_scale / rate_y;
        let (ex, ey) = ((-rate_x * dt).exp(), (-rate_y * dt).exp());
        Ok(Self {
            decay_x: ex,
            decay_y: ey,
            kick_x: (var_x * (1.0 - ex * ex)).sqrt(),
            kick_y: (var_y * (1.0 - ey * ey)).sqrt(),
            mean_y,
            var_x,
            var_y,
            rate_x,
            rate_y,
            x: 0.0,
            y: mean_y,
        })
    }

    pub fn set_state(&mut self, x: f64, y: f64) {
        self.x = x;
        self.y = y;
    }

    pub fn draw_stationary<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (nx, ny): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        self.x = self.var_x.sqrt() * nx;
        self.y = self.mean_y + self.var_y.sqrt() * ny;
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (f64, f64) {
        let (nx, ny): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        self.x = self.x * self.decay_x + self.kick_x * nx;
        self.y = self.mean_y + (self.y - self.mean_y) * self.decay_y + self.kick_y * ny;
        (self.x, self.y)
    }
}

pub fn integrate_quadratures(
    trap: &TrapConfig,
    drive: &DriveConfig,
    noise: &NoiseModel,
    opts: &QuadratureOptions,
    seed: u64,
) -> Result<QuadraturePath> {
    if !(opts.duration > 0.0 && opts.duration.is_finite()) {
        return Err(Error::invalid("duration must be > 0"));
    }
    let mut st = QuadratureStepper::new(trap, drive, noise, opts.dt)?;
    let mut rng = rng_from_seed(seed);
    match opts.initial {
        Some((x, y)) => {
            crate::error::ensure_finite("initial X", x)?;
            crate::error::ensure_finite("initial Y", y)?;
            st.set_state(x, y);
        }
        None => st.draw_stationary(&mut rng),
    }
    let steps = (opts.duration / opts.dt).round() as usize;
    let mut path = QuadraturePath::with_capacity(steps + 1);
    path.push(0.0, st.x, st.y);
    for i in 1..=steps {
        let (x, y) = st.step(&mut rng);
        path.push(i as f64 * opts.dt, x, y);
    }
    Ok(path)
}
