use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::config::{FilterConfig, NoiseModel};
use super::kalman;
use super::particles::{pf_correct, pf_predict, Particle, ParticleSet};
use super::StepReport;
use crate::error::{Error, Result};
use crate::geo::{dd_range_gradient, EcefPosition};
use crate::obs::{afv, doppler_velocity_ls, nlos_gate, EpochObservation, VelocitySolution};

/// What happened to a particle in the Kalman measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementStatus {
    Updated,
    /// Neither a velocity fix nor AFV rows were available.
    NoObservations,
    /// The innovation covariance was not positive definite; the particle is
    /// left untouched.
    Singular,
}

/// Velocity time update from the particle's displacement `after - before`.
pub fn kf_time_update(
    p: &mut Particle,
    before: &EcefPosition,
    after: &EcefPosition,
    noise: &NoiseModel,
) -> Result<()> {
    let (mean, cov) = kalman::time_update(
        &p.vel_mean,
        &p.vel_cov,
        &(*after - *before),
        noise.dt,
        &noise.q_n,
        &noise.q_l,
    )?;
    p.vel_mean = mean;
    p.vel_cov = cov;
    Ok(())
}

/// Velocity measurement update with up to two blocks, applied in sequence.
///
/// 1. Velocity block (when `vel_obs` is present): `C = I`, `R = noise.r_vel`,
///    innovation `v_obs - v`.
/// 2. AFV block (when `cfg.afv_block`): one row per carrier satellite with
///    `C_k = dt * grad_k^T` and `R_k = (lambda sigma_phi)^2`. The innovation is
///    the wrapped carrier residual in meters, `-lambda * psi_k`, which is zero
///    for a particle on a carrier-consistent position and otherwise steers the
///    next transition towards it.
///
/// The AFV rows carry no information about the velocity itself, only about
/// the correction the particle needs. Stacking them jointly with the Doppler
/// block would pin the velocity to its prior with millimeter confidence, so
/// they act on the Doppler-updated state instead.
pub fn kf_measurement_update(
    p: &mut Particle,
    epoch: &EpochObservation,
    vel_obs: Option<&VelocitySolution>,
    base: &EcefPosition,
    noise: &NoiseModel,
    cfg: &FilterConfig,
) -> Result<MeasurementStatus> {
    let reference = match (cfg.afv_block, epoch.reference) {
        (true, Some(r)) => Some(r.position),
        _ => None,
    };
    let afv_sats: Vec<_> = match reference {
        Some(_) => epoch
            .satellites
            .iter()
            .filter(|s| s.obs.flags.has_carrier)
            .collect(),
        None => Vec::new(),
    };
    if vel_obs.is_none() && afv_sats.is_empty() {
        return Ok(MeasurementStatus::NoObservations);
    }

    let mut mean = p.vel_mean;
    let mut cov = p.vel_cov;
    if let Some(v) = vel_obs {
        let c = DMatrix::identity(3, 3);
        let r = DMatrix::from_column_slice(3, 3, noise.r_vel.as_slice());
        let d = v.velocity - mean;
        let innovation = DVector::from_column_slice(d.as_slice());
        match kalman::measurement_update(&mean, &cov, &c, &r, &innovation) {
            Ok((m, c)) => (mean, cov) = (m, c),
            Err(Error::Singular(_)) => return Ok(MeasurementStatus::Singular),
            Err(e) => return Err(e),
        }
    }
    if let Some(reference) = reference.filter(|_| !afv_sats.is_empty()) {
        let rows = afv_sats.len();
        let mut c = DMatrix::zeros(rows, 3);
        let mut innovation = DVector::zeros(rows);
        let r = DMatrix::identity(rows, rows) * (epoch.wavelength * noise.sigma_phi).powi(2);
        for (row, sat) in afv_sats.iter().enumerate() {
            let psi = afv(sat, &reference, &p.position, base, epoch.wavelength)?;
            let g = dd_range_gradient(&sat.geometry.position, &reference, &p.position)? * noise.dt;
            c[(row, 0)] = g.x;
            c[(row, 1)] = g.y;
            c[(row, 2)] = g.z;
            innovation[row] = -epoch.wavelength * psi;
        }
        match kalman::measurement_update(&mean, &cov, &c, &r, &innovation) {
            Ok((m, c)) => (mean, cov) = (m, c),
            Err(Error::Singular(_)) => return Ok(MeasurementStatus::Singular),
            Err(e) => return Err(e),
        }
    }
    p.vel_mean = mean;
    p.vel_cov = cov;
    Ok(MeasurementStatus::Updated)
}

/// One epoch of the Rao-Blackwellized particle filter.
///
/// Order: predict each particle with its own velocity, Kalman time update
/// from the displacement (both skipped on the first epoch), likelihood
/// correction and resampling, per-particle NLOS gate and Doppler velocity fit,
/// Kalman measurement update.
pub fn rbpf_step(
    set: &mut ParticleSet,
    epoch: &EpochObservation,
    base: &EcefPosition,
    noise: &NoiseModel,
    cfg: &FilterConfig,
) -> Result<StepReport> {
    if set.epoch_index > 0 {
        let before = pf_predict(set, noise);
        set.particles
            .par_iter_mut()
            .zip(before.par_iter())
            .try_for_each(|(p, b)| {
                let after = p.position;
                kf_time_update(p, b, &after, noise)
            })?;
    }

    let correction = pf_correct(set, epoch, base, cfg)?;

    let all_ids = epoch.sat_ids();
    let n_pseudorange = epoch
        .satellites
        .iter()
        .filter(|s| s.obs.flags.has_pseudorange)
        .count();
    let outcomes: Vec<(usize, MeasurementStatus)> = set
        .particles
        .par_iter_mut()
        .map(|p| {
            let (subset, excluded) = if cfg.nlos_gate {
                let kept = nlos_gate(epoch, &p.position, base, noise.eta)?;
                let excluded = n_pseudorange - kept.len();
                (kept, excluded)
            } else {
                (all_ids.clone(), 0)
            };
            let vel = doppler_velocity_ls(epoch, &subset, &p.position)?;
            let status = kf_measurement_update(p, epoch, vel.as_ref(), base, noise, cfg)?;
            Ok((excluded, status))
        })
        .collect::<Result<_>>()?;

    set.epoch_index += 1;
    let n = outcomes.len().max(1) as f64;
    let mean_excluded_sats = outcomes.iter().map(|(e, _)| *e as f64).sum::<f64>() / n;
    let singular_updates = outcomes
        .iter()
        .filter(|(_, s)| *s == MeasurementStatus::Singular)
        .count();
    Ok(StepReport {
        estimate: set.estimate(Some(set.mean_velocity())),
        correction,
        mean_excluded_sats,
        singular_updates,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::{Matrix3, Vector3};

    use super::*;
    use crate::filters::init_particles;
    use crate::sim::tests::open_sky;
    use crate::sim::{generate_scenario, EpochWindow, Scenario, Trajectory};

    fn cfg(n: usize) -> FilterConfig {
        FilterConfig {
            num_particles: n,
            seed: 3,
            velocity_noise: 0.05,
            ..FilterConfig::default()
        }
    }

    fn still() -> Scenario {
        generate_scenario(&open_sky(Trajectory::Static {
            position_enu: [30.0, -20.0, 1.5],
        }))
        .unwrap()
    }

    fn gentle_circle() -> Trajectory {
        Trajectory::Circle {
            center_enu: [150.0, 80.0, 1.5],
            radius_m: 200.0,
            speed_mps: 3.0,
        }
    }

    fn particle(position: EcefPosition) -> Particle {
        Particle {
            position,
            log_weight: 0.0,
            vel_mean: Vector3::zeros(),
            vel_cov: Matrix3::identity(),
        }
    }

    fn run(sc: &Scenario, c: &FilterConfig, sigma: f64) -> Vec<StepReport> {
        let base = sc.base();
        let mut set = init_particles(c, sc.truth.epochs[0].position, sigma, None).unwrap();
        let noise = c.noise_model(1.0 / sc.config.rate_hz);
        sc.epochs
            .iter()
            .map(|e| rbpf_step(&mut set, e, &base, &noise, c).unwrap())
            .collect()
    }

    #[test]
    fn blocked_epoch_leaves_the_particle_alone() {
        let mut config = open_sky(Trajectory::Static {
            position_enu: [0.0, 0.0, 1.5],
        });
        config.blockage_windows = vec![EpochWindow {
            start_epoch: 2,
            end_epoch: 4,
        }];
        let sc = generate_scenario(&config).unwrap();
        let c = cfg(1);
        let mut p = particle(sc.truth.epochs[2].position);
        let before = p.clone();
        let status =
            kf_measurement_update(&mut p, &sc.epochs[2], None, &sc.base(), &c.noise_model(1.0), &c)
                .unwrap();
        assert_eq!(status, MeasurementStatus::NoObservations);
        assert_eq!(p, before);
    }

    #[test]
    fn doppler_block_alone_is_a_textbook_update() {
        let sc = still();
        let c = FilterConfig {
            afv_block: false,
            ..cfg(1)
        };
        let noise = c.noise_model(1.0);
        let mut p = particle(sc.truth.epochs[0].position);
        let obs = VelocitySolution {
            velocity: Vector3::new(1.0, -2.0, 0.5),
            clock_drift: 0.0,
            used_sats: vec![],
            residual_rms: 0.0,
        };
        kf_measurement_update(&mut p, &sc.epochs[0], Some(&obs), &sc.base(), &noise, &c).unwrap();
        // P = I and R = r I give K = 1 / (1 + r).
        let r = c.velocity_obs_noise.powi(2);
        let k = 1.0 / (1.0 + r);
        assert!((p.vel_mean - obs.velocity * k).norm() < 1e-12);
        assert!((p.vel_cov - Matrix3::identity() * (1.0 - k)).norm() < 1e-12);
    }

    #[test]
    fn afv_rows_steer_back_onto_the_carrier_peak() {
        let sc = still();
        let c = cfg(1);
        let noise = c.noise_model(1.0);
        let truth = sc.truth.epochs[0].position;
        let offset = sc.frame.rotate_to_ecef(&crate::geo::EnuVector::new(0.004, -0.003, 0.002));
        let mut p = particle(truth.offset(&offset));
        let status =
            kf_measurement_update(&mut p, &sc.epochs[0], None, &sc.base(), &noise, &c).unwrap();
        assert_eq!(status, MeasurementStatus::Updated);
        let next = p.position.offset(&(p.vel_mean * noise.dt));
        assert!(next.distance(&truth) < 1e-4, "{}", next.distance(&truth));
    }

    #[test]
    fn tracks_a_noiseless_circle() {
        let sc = generate_scenario(&open_sky(gentle_circle())).unwrap();
        let reports = run(&sc, &cfg(300), 0.02);
        let sq: f64 = reports
            .iter()
            .zip(&sc.truth.epochs)
            .map(|(r, t)| r.estimate.position.distance(&t.position).powi(2))
            .sum();
        let rmse = (sq / reports.len() as f64).sqrt();
        assert!(rmse < 0.05, "rmse {rmse}");
        let last = reports.last().unwrap().estimate.velocity.unwrap();
        assert!((last - sc.truth.epochs.last().unwrap().velocity).norm() < 0.1);
    }

    #[test]
    fn blockage_grows_the_cloud_and_keeps_velocity() {
        let mut config = open_sky(gentle_circle());
        config.blockage_windows = vec![EpochWindow {
            start_epoch: 10,
            end_epoch: 15,
        }];
        let sc = generate_scenario(&config).unwrap();
        let reports = run(&sc, &cfg(200), 0.02);
        for i in 10..15 {
            assert!(reports[i].estimate.particle_spread > reports[i - 1].estimate.particle_spread);
        }
        assert!(reports.iter().all(|r| r.estimate.velocity.is_some()));
    }

    #[test]
    fn steps_are_deterministic() {
        let sc = generate_scenario(&open_sky(gentle_circle())).unwrap();
        let c = cfg(100);
        assert_eq!(run(&sc, &c, 0.05), run(&sc, &c, 0.05));
    }
}
