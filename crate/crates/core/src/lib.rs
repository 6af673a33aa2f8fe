//! Digital twin of a trapped-ion phonon-laser force sensor.
//!
//! The crate is organised bottom-up:
//!
//! * [`physics`] – closed-form kernels (scattering rate, light damping, static
//!   force, collection efficiency, squeezing law).
//! * [`dynamics`] – stochastic integration of the driven, optionally squeezed
//!   oscillator, its rotating-frame quadratures and the injection-lock phase.
//! * [`photon`] – Monte Carlo photon arrivals, detection and TAC folding.
//! * [`fit`] – recovery of amplitude and phase from a folded histogram.
//! * [`experiments`] – calibration, sweeps, sensitivity and lower-bound
//!   campaigns plus run-record persistence.
//!
//! All angular frequencies are rad/s internally; Hz only appears in
//! [`config`] keys and file headers.

pub mod config;
pub mod constants;
pub mod dynamics;
mod error;
pub mod experiments;
pub mod fit;
pub mod io;
pub mod photon;
pub mod physics;
pub mod rng;
pub mod svg;

pub use error::{Error, Result};
