use nalgebra::Vector3;

use super::config::{FilterConfig, NoiseModel};
use super::particles::{pf_correct, pf_predict, ParticleSet};
use super::StepReport;
use crate::error::Result;
use crate::geo::EcefPosition;
use crate::obs::{doppler_velocity_ls, EpochObservation};

/// One epoch of the position-only baseline.
///
/// A single Doppler least-squares velocity over all satellites, evaluated at
/// the current mean position, moves every particle. Without a velocity the
/// particles stay put and the position noise is inflated by
/// `cfg.outage_inflation`. The likelihood correction is the same as for the
/// Rao-Blackwellized filter.
pub fn conventional_pf_step(
    set: &mut ParticleSet,
    epoch: &EpochObservation,
    base: &EcefPosition,
    noise: &NoiseModel,
    cfg: &FilterConfig,
) -> Result<StepReport> {
    let rcv = set.mean_position();
    let velocity = doppler_velocity_ls(epoch, &epoch.sat_ids(), &rcv)?.map(|s| s.velocity);
    let shared = velocity.unwrap_or_else(Vector3::zeros);
    for p in &mut set.particles {
        p.vel_mean = shared;
    }
    if set.epoch_index > 0 {
        let mut model = *noise;
        if velocity.is_none() {
            model.q_n *= cfg.outage_inflation;
        }
        pf_predict(set, &model);
    }
    let correction = pf_correct(set, epoch, base, cfg)?;
    set.epoch_index += 1;
    Ok(StepReport {
        estimate: set.estimate(velocity),
        correction,
        mean_excluded_sats: 0.0,
        singular_updates: 0,
    })
}
