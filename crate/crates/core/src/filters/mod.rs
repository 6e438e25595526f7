//! Particle filters over rover position.
//!
//! [`rbpf_step`] is the Rao-Blackwellized filter: each particle owns a 3D
//! velocity Kalman filter that drives its own state transition.
//! [`conventional_pf_step`] is the position-only baseline in which every
//! particle is moved with one shared Doppler velocity.

mod config;
mod conventional;
pub mod kalman;
mod particles;
mod rbpf;
mod rng;

pub use config::{FilterConfig, NoiseModel};
pub use conventional::conventional_pf_step;
pub use particles::{
    effective_sample_size, init_particles, pf_correct, pf_predict, systematic_resample,
    Correction, FilterEstimate, Particle, ParticleSet,
};
pub use rbpf::{kf_measurement_update, kf_time_update, rbpf_step, MeasurementStatus};

/// Per-epoch diagnostics emitted alongside a [`FilterEstimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub estimate: FilterEstimate,
    pub correction: Correction,
    /// Mean number of satellites the NLOS gate removed per particle.
    pub mean_excluded_sats: f64,
    /// Particles whose Kalman measurement update was skipped as singular.
    pub singular_updates: usize,
}
