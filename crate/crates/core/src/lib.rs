//! Ambiguity-free GNSS carrier-phase positioning with a Rao-Blackwellized
//! particle filter.
//!
//! Position is tracked by a particle filter whose likelihood comes from the
//! ambiguity function value (AFV) of double-differenced carrier phases, so the
//! integer ambiguities are never estimated. Each particle carries its own
//! Kalman filter over the 3D velocity, fed by Doppler least-squares
//! velocities computed on an NLOS-gated satellite subset and by the particle's
//! own displacement.
//!
//! Module map:
//! - [`geo`]: frames, ranges and double-difference geometry.
//! - [`obs`]: observation types, residuals, AFV, likelihoods, NLOS gate and
//!   Doppler velocity least squares.
//! - [`filters`]: the particle ensemble, per-particle Kalman filter, the
//!   Rao-Blackwellized step and the conventional position-only baseline.
//! - [`sim`]: deterministic synthetic urban GNSS scenarios and their file
//!   formats.

pub mod error;
pub mod filters;
pub mod geo;
pub mod obs;
pub mod sim;

pub use error::{Error, Result};
pub use filters::{
    conventional_pf_step, init_particles, rbpf_step, FilterConfig, FilterEstimate, NoiseModel,
    Particle, ParticleSet, StepReport,
};
pub use geo::{EcefPosition, EnuVector, LocalFrame, SatelliteGeometry};
pub use obs::{DdObservation, EpochObservation, ObsFlags, SatelliteObservation, VelocitySolution};
pub use sim::{generate_scenario, pseudorange_ls_fix, Scenario, ScenarioConfig, ScenarioTruth};

/// GPS L1 carrier wavelength in meters.
pub const GPS_L1_WAVELENGTH: f64 = 299_792_458.0 / 1_575.42e6;
