use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every tunable of both filters. Missing JSON fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub num_particles: usize,
    pub seed: u64,
    /// Carrier-phase DD noise, cycles.
    pub sigma_phi: f64,
    /// Pseudorange DD noise, meters.
    pub sigma_rho: f64,
    /// NLOS gate threshold on the DD pseudorange residual, meters.
    pub eta: f64,
    pub use_pseudorange_likelihood: bool,
    /// Feed AFV rows into the velocity measurement update.
    pub afv_block: bool,
    /// Gate Doppler satellites per particle before the velocity fit.
    pub nlos_gate: bool,
    /// Resample when `N_eff < resample_threshold * N`.
    pub resample_threshold: f64,
    /// Position process noise per second, m (Q_n = sigma^2 I).
    pub position_noise: f64,
    /// Velocity process noise per second, m/s (Q_l = sigma^2 I).
    pub velocity_noise: f64,
    /// Doppler velocity observation noise, m/s (R = sigma^2 I).
    pub velocity_obs_noise: f64,
    /// Initial per-axis velocity standard deviation, m/s.
    pub initial_velocity_sigma: f64,
    /// Spread of the initial particle cloud around the prior, meters.
    pub prior_sigma: f64,
    /// Q_n multiplier for the baseline when no velocity can be computed.
    pub outage_inflation: f64,
    /// Particle spread above which a run is declared diverged, meters.
    pub divergence_spread: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            num_particles: 2000,
            seed: 0,
            sigma_phi: 0.02,
            sigma_rho: 1.0,
            eta: 5.0,
            use_pseudorange_likelihood: true,
            afv_block: true,
            nlos_gate: true,
            resample_threshold: 0.5,
            position_noise: 0.1,
            velocity_noise: 0.2,
            velocity_obs_noise: 0.05,
            initial_velocity_sigma: 1.0,
            prior_sigma: 1.0,
            outage_inflation: 25.0,
            divergence_spread: 1000.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_phi", self.sigma_phi),
            ("sigma_rho", self.sigma_rho),
            ("eta", self.eta),
            ("position_noise", self.position_noise),
            ("velocity_noise", self.velocity_noise),
            ("velocity_obs_noise", self.velocity_obs_noise),
            ("initial_velocity_sigma", self.initial_velocity_sigma),
            ("prior_sigma", self.prior_sigma),
            ("outage_inflation", self.outage_inflation),
            ("divergence_spread", self.divergence_spread),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.num_particles == 0 {
            return Err(Error::InvalidArgument("num_particles must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::InvalidArgument("resample_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Noise model for an epoch interval of `dt` seconds. Process noise
    /// variances grow linearly with `dt`.
    pub fn noise_model(&self, dt: f64) -> NoiseModel {
        NoiseModel {
            q_n: Matrix3::identity() * self.position_noise.powi(2) * dt,
            q_l: Matrix3::identity() * self.velocity_noise.powi(2) * dt,
            r_vel: Matrix3::identity() * self.velocity_obs_noise.powi(2),
            sigma_phi: self.sigma_phi,
            sigma_rho: self.sigma_rho,
            eta: self.eta,
            dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Position process noise, m^2.
    pub q_n: Matrix3<f64>,
    /// Velocity process noise, (m/s)^2.
    pub q_l: Matrix3<f64>,
    /// Doppler velocity observation covariance, (m/s)^2.
    pub r_vel: Matrix3<f64>,
    pub sigma_phi: f64,
    pub sigma_rho: f64,
    pub eta: f64,
    /// Seconds.
    pub dt: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        for (name, m) in [("q_l", &self.q_l), ("r_vel", &self.r_vel)] {
            if (m - m.transpose()).norm() > 1e-12 || m.cholesky().is_none() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be symmetric positive definite"
                )));
            }
        }
        Ok(())
    }
}
