use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::{FilterConfig, NoiseModel};
use super::rng;
use crate::error::{Error, Result};
use crate::geo::EcefPosition;
use crate::obs::{particle_likelihood, EpochObservation};

/// A position hypothesis together with its private velocity Kalman filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: EcefPosition,
    /// Normalized log weight.
    pub log_weight: f64,
    /// ECEF velocity mean, m/s.
    pub vel_mean: Vector3<f64>,
    pub vel_cov: Matrix3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Number of epochs processed so far.
    pub epoch_index: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterEstimate {
    /// Weighted mean position.
    pub position: EcefPosition,
    /// ECEF velocity, `None` when the filter has no velocity this epoch.
    pub velocity: Option<Vector3<f64>>,
    pub position_cov: Matrix3<f64>,
    /// Weighted RMS distance of the particles about the mean, meters.
    pub particle_spread: f64,
}

impl FilterEstimate {
    pub fn velocity_available(&self) -> bool {
        self.velocity.is_some()
    }
}

/// Outcome of a likelihood correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    /// False when the epoch had no usable observation.
    pub applied: bool,
    /// Effective sample size after weighting, before any resampling.
    pub n_eff: f64,
    pub resampled: bool,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Normalized linear weights.
    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight.exp()).collect()
    }

    pub fn mean_position(&self) -> EcefPosition {
        // Accumulate offsets from the first particle; absolute ECEF sums lose
        // millimeters.
        let origin = self.particles[0].position;
        let mut acc = Vector3::zeros();
        for p in &self.particles {
            acc += (p.position - origin) * p.log_weight.exp();
        }
        origin.offset(&acc)
    }

    pub fn mean_velocity(&self) -> Vector3<f64> {
        self.particles
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.vel_mean * p.log_weight.exp())
    }

    pub fn estimate(&self, velocity: Option<Vector3<f64>>) -> FilterEstimate {
        let mean = self.mean_position();
        let mut cov = Matrix3::zeros();
        for p in &self.particles {
            let d = p.position - mean;
            cov += d * d.transpose() * p.log_weight.exp();
        }
        let cov = (cov + cov.transpose()) * 0.5;
        FilterEstimate {
            position: mean,
            velocity,
            position_cov: cov,
            particle_spread: cov.trace().max(0.0).sqrt(),
        }
    }

    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&self.weights())
    }

    /// Shift log weights so that the linear weights sum to one.
    pub fn normalize(&mut self) {
        let max = self
            .particles
            .iter()
            .map(|p| p.log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self
            .particles
            .iter()
            .map(|p| (p.log_weight - max).exp())
            .sum();
        let shift = max + sum.ln();
        for p in &mut self.particles {
            p.log_weight -= shift;
        }
    }
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Scatter `cfg.num_particles` particles around `prior_pos`.
pub fn init_particles(
    cfg: &FilterConfig,
    prior_pos: EcefPosition,
    prior_sigma: f64,
    prior_vel: Option<Vector3<f64>>,
) -> Result<ParticleSet> {
    if cfg.num_particles == 0 {
        return Err(Error::InvalidArgument("num_particles must be at least 1".into()));
    }
    if !(prior_sigma > 0.0) {
        return Err(Error::InvalidArgument("prior_sigma must be positive".into()));
    }
    let n = cfg.num_particles;
    let log_w = -(n as f64).ln();
    let vel_cov = Matrix3::identity() * cfg.initial_velocity_sigma.powi(2);
    let vel_mean = prior_vel.unwrap_or_else(Vector3::zeros);
    let particles = (0..n)
        .map(|i| {
            let mut rng = rng::stream(cfg.seed, 0, i as u64, rng::INIT);
            let d = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)) * prior_sigma;
            Particle {
                position: prior_pos.offset(&d),
                log_weight: log_w,
                vel_mean,
                vel_cov,
            }
        })
        .collect();
    Ok(ParticleSet {
        particles,
        epoch_index: 0,
        seed: cfg.seed,
    })
}

/// Symmetric square root of a positive semidefinite matrix.
fn psd_sqrt(m: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Move every particle with its own velocity plus position process noise.
/// Returns the positions before the move.
pub fn pf_predict(set: &mut ParticleSet, noise: &NoiseModel) -> Vec<EcefPosition> {
    let sqrt_q = psd_sqrt(&noise.q_n);
    let (seed, epoch) = (set.seed, set.epoch_index);
    set.particles
        .par_iter_mut()
        .enumerate()
        .map(|(i, p)| {
            let before = p.position;
            let mut rng = rng::stream(seed, epoch, i as u64, rng::PREDICT);
            let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            p.position = before.offset(&(p.vel_mean * noise.dt + sqrt_q * z));
            before
        })
        .collect()
}

/// Low-variance resampling. `u0` in `[0, 1)` offsets the comb of
/// `weights.len()` evenly spaced pointers.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for j in 0..n {
        let u = (u0 + j as f64) * step;
        while u >= cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

/// Weight particles by the epoch likelihood, normalize, and resample when the
/// effective sample size drops below `cfg.resample_threshold * N`.
pub fn pf_correct(
    set: &mut ParticleSet,
    epoch: &EpochObservation,
    base: &EcefPosition,
    cfg: &FilterConfig,
) -> Result<Correction> {
    let log_l: Vec<Option<f64>> = set
        .particles
        .par_iter()
        .map(|p| particle_likelihood(epoch, &p.position, base, cfg))
        .collect::<Result<_>>()?;
    if log_l.iter().all(Option::is_none) {
        return Ok(Correction {
            applied: false,
            n_eff: set.effective_sample_size(),
            resampled: false,
        });
    }
    for (p, l) in set.particles.iter_mut().zip(&log_l) {
        p.log_weight += l.unwrap_or(f64::NEG_INFINITY);
    }
    set.normalize();
    let weights = set.weights();
    let n_eff = effective_sample_size(&weights);
    let n = set.len();
    let resampled = n_eff < cfg.resample_threshold * n as f64;
    if resampled {
        let u0: f64 = rng::stream(set.seed, set.epoch_index, 0, rng::RESAMPLE).random();
        let idx = systematic_resample(&weights, u0);
        let log_w = -(n as f64).ln();
        set.particles = idx
            .into_iter()
            .map(|i| Particle {
                log_weight: log_w,
                ..set.particles[i].clone()
            })
            .collect();
    }
    Ok(Correction {
        applied: true,
        n_eff,
        resampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> FilterConfig {
        FilterConfig {
            num_particles: n,
            seed: 11,
            ..FilterConfig::default()
        }
    }

    #[test]
    fn single_particle_has_unit_weight() {
        let set = init_particles(&cfg(1), EcefPosition::new(1.0, 2.0, 3.0), 1.0, None).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.particles[0].log_weight, 0.0);
        assert_eq!(set.weights(), vec![1.0]);
    }

    #[test]
    fn init_rejects_bad_inputs() {
        assert!(init_particles(&cfg(0), EcefPosition::default(), 1.0, None).is_err());
        assert!(init_particles(&cfg(3), EcefPosition::default(), 0.0, None).is_err());
    }

    #[test]
    fn init_sample_mean_converges() {
        let prior = EcefPosition::new(-3.9e6, 3.4e6, 3.6e6);
        let sigma = 2.0;
        let set = init_particles(&cfg(100_000), prior, sigma, None).unwrap();
        let mean = set.mean_position();
        let bound = 5.0 * sigma / (100_000f64).sqrt();
        let d = mean - prior;
        assert!(d.iter().all(|c| c.abs() < bound), "{d:?} vs {bound}");
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_particles(&cfg(64), EcefPosition::default(), 1.0, Some(Vector3::x())).unwrap();
        let b = init_particles(&cfg(64), EcefPosition::default(), 1.0, Some(Vector3::x())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.particles[5].vel_mean, Vector3::x());
        assert_eq!(a.particles[5].vel_cov, Matrix3::identity());
    }

    fn noise(q_n: f64) -> NoiseModel {
        let mut m = cfg(1).noise_model(1.0);
        m.q_n = Matrix3::identity() * q_n;
        m
    }

    #[test]
    fn noiseless_prediction_is_exact() {
        // Within one binade a unit shift is exact.
        let prior = EcefPosition::new(10.0, 10.0, 10.0);
        let mut set = init_particles(&cfg(16), prior, 0.5, None).unwrap();
        let start: Vec<_> = set.particles.iter().map(|p| p.position).collect();
        let before = pf_predict(&mut set, &noise(0.0));
        assert_eq!(before, start);
        assert!(set.particles.iter().zip(&start).all(|(p, s)| p.position == *s));

        for p in &mut set.particles {
            p.vel_mean = Vector3::new(1.0, 0.0, 0.0);
        }
        pf_predict(&mut set, &noise(0.0));
        for (p, s) in set.particles.iter().zip(&start) {
            assert_eq!(p.position - *s, Vector3::new(1.0, 0.0, 0.0));
        }
    }

    #[test]
    fn prediction_uses_each_particles_velocity() {
        let mut set = init_particles(&cfg(4), EcefPosition::default(), 1.0, None).unwrap();
        for (i, p) in set.particles.iter_mut().enumerate() {
            p.vel_mean = Vector3::new(i as f64, 0.0, 0.0);
        }
        let before = pf_predict(&mut set, &noise(0.0));
        for (i, (p, b)) in set.particles.iter().zip(&before).enumerate() {
            assert_eq!((p.position - *b).x, i as f64);
        }
    }

    #[test]
    fn prediction_noise_matches_q_n() {
        let q = Matrix3::new(0.04, 0.01, 0.0, 0.01, 0.09, -0.02, 0.0, -0.02, 0.01);
        let mut model = noise(0.0);
        model.q_n = q;
        let mut set = init_particles(&cfg(100_000), EcefPosition::default(), 1.0, None).unwrap();
        for p in &mut set.particles {
            p.vel_mean = Vector3::new(0.5, -0.25, 2.0);
        }
        let before = pf_predict(&mut set, &model);
        let n = set.len() as f64;
        let mut emp = Matrix3::zeros();
        for (p, b) in set.particles.iter().zip(&before) {
            let w = p.position - *b - p.vel_mean * model.dt;
            emp += w * w.transpose() / n;
        }
        for (i, j) in [(0, 0), (1, 1), (2, 2)] {
            assert!((emp[(i, j)] - q[(i, j)]).abs() < 0.05 * q[(i, j)], "{emp}");
        }
        // off-diagonals relative to the geometric mean of their variances
        for (i, j) in [(0, 1), (1, 2)] {
            let scale = (q[(i, i)] * q[(j, j)]).sqrt();
            assert!((emp[(i, j)] - q[(i, j)]).abs() < 0.05 * scale, "{emp}");
        }
    }

    #[test]
    fn systematic_resample_examples() {
        assert_eq!(systematic_resample(&[0.25; 4], 0.5), vec![0, 1, 2, 3]);
        assert_eq!(systematic_resample(&[0.0, 1.0, 0.0, 0.0], 0.3), vec![1; 4]);
        assert_eq!(systematic_resample(&[0.5, 0.0, 0.0, 0.5], 0.0), vec![0, 0, 3, 3]);
        let w = [0.1, 0.2, 0.3, 0.4];
        let idx = systematic_resample(&w, 0.999_999);
        assert_eq!(idx.len(), 4);
        assert!(idx.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn ess_bounds() {
        assert_eq!(effective_sample_size(&[0.25; 4]), 4.0);
        assert_eq!(effective_sample_size(&[1.0, 0.0, 0.0]), 1.0);
    }
}
