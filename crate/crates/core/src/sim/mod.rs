//! Deterministic synthetic GNSS scenarios.
//!
//! Satellites are fixed in ECEF for the whole scenario and the base station
//! coordinates are exact. Double-differenced observations are synthesized
//! directly from the true rover state:
//!
//! - pseudorange: `r + nlos_bias + N(0, sigma_rho)`
//! - carrier: `r / lambda + N_k + carrier_bias + N(0, sigma_phi)`, reported on
//!   a `2^-30` cycle grid
//! - Doppler range rate: `grad r . v + doppler_bias + N(0, sigma_doppler)`
//!
//! The integer ambiguities `N_k` are drawn once and redrawn at cycle slips.
//! Blockage windows produce epochs without any satellite.

mod io;
mod trajectory;

pub use io::{load_scenario, read_observations, write_scenario};
pub use trajectory::{Segment, Trajectory};

use nalgebra::{DMatrix, DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{
    dd_range, dd_range_gradient, select_reference_satellite, EcefPosition, EnuVector, LocalFrame,
    SatelliteGeometry,
};
use crate::obs::{
    dd_pseudorange_residual, DdObservation, EpochObservation, ObsFlags, SatelliteObservation,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Carrier phases are multiples of this many cycles.
pub const CARRIER_RESOLUTION: f64 = 1.0 / (1u64 << 30) as f64;
/// Ambiguities are drawn uniformly from `[-MAX_AMBIGUITY, MAX_AMBIGUITY]`.
pub const MAX_AMBIGUITY: i64 = 500_000;

fn default_rate() -> f64 {
    1.0
}
fn default_wavelength() -> f64 {
    crate::GPS_L1_WAVELENGTH
}
fn default_orbit_radius() -> f64 {
    26_560_000.0
}
fn default_pr_bias() -> f64 {
    20.0
}
fn default_cp_bias() -> f64 {
    0.25
}
fn default_dop_bias() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    pub base: BaseStation,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
    pub constellation: Vec<SatelliteSpec>,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub noise: SimNoise,
    #[serde(default)]
    pub nlos_events: Vec<NlosEvent>,
    #[serde(default)]
    pub blockage_windows: Vec<EpochWindow>,
    #[serde(default)]
    pub cycle_slips: Vec<CycleSlip>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseStation {
    pub lat_deg: f64,
    pub lon_deg: f64,
    #[serde(default)]
    pub height_m: f64,
}

impl BaseStation {
    pub fn frame(&self) -> LocalFrame {
        LocalFrame::from_spherical(self.lat_deg.to_radians(), self.lon_deg.to_radians(), self.height_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteSpec {
    pub sat_id: u32,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Distance from the Earth's center, meters.
    #[serde(default = "default_orbit_radius")]
    pub orbit_radius_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimNoise {
    /// DD pseudorange noise, meters.
    pub sigma_rho_sim: f64,
    /// DD carrier noise, cycles.
    pub sigma_phi_sim: f64,
    /// DD range-rate noise, m/s.
    pub sigma_doppler_sim: f64,
}

/// Multipath on one satellite over epochs `[start_epoch, end_epoch)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlosEvent {
    pub sat_id: u32,
    pub start_epoch: u64,
    pub end_epoch: u64,
    #[serde(default = "default_pr_bias")]
    pub pseudorange_bias: f64,
    #[serde(default = "default_cp_bias")]
    pub carrier_bias: f64,
    #[serde(default = "default_dop_bias")]
    pub doppler_bias: f64,
}

/// Epochs `[start_epoch, end_epoch)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochWindow {
    pub start_epoch: u64,
    pub end_epoch: u64,
}

impl EpochWindow {
    pub fn contains(&self, epoch: u64) -> bool {
        (self.start_epoch..self.end_epoch).contains(&epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSlip {
    pub sat_id: u32,
    pub epoch: u64,
}

impl ScenarioConfig {
    pub fn num_epochs(&self) -> u64 {
        (self.duration_s * self.rate_hz).round() as u64
    }

    pub fn epoch_time(&self, epoch: u64) -> f64 {
        epoch as f64 / self.rate_hz
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Satellite geometry as seen from the base station, sorted by id.
    pub fn satellites(&self) -> Result<Vec<SatelliteGeometry>> {
        let frame = self.base.frame();
        let b = frame.anchor.to_vector();
        let mut sats = Vec::with_capacity(self.constellation.len());
        for s in &self.constellation {
            let (az, el) = (s.azimuth_deg.to_radians(), s.elevation_deg.to_radians());
            let los = frame.rotate_to_ecef(&EnuVector::new(
                el.cos() * az.sin(),
                el.cos() * az.cos(),
                el.sin(),
            ));
            let bd = b.dot(&los);
            let disc = bd * bd - b.norm_squared() + s.orbit_radius_m.powi(2);
            if !(disc >= 0.0) || s.orbit_radius_m <= b.norm() {
                return Err(Error::InvalidScenario(format!(
                    "satellite {}: orbit radius below the base station",
                    s.sat_id
                )));
            }
            let range = -bd + disc.sqrt();
            let pos = frame.anchor.offset(&(los * range));
            sats.push(SatelliteGeometry::from_position(s.sat_id, pos, &frame));
        }
        sats.sort_by_key(|s| s.sat_id);
        Ok(sats)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive".into());
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return bad("rate_hz must be positive".into());
        }
        if self.num_epochs() == 0 {
            return bad("scenario has no epochs".into());
        }
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return bad("wavelength_m must be positive".into());
        }
        if self.constellation.len() < 5 {
            return bad(format!(
                "{} satellites configured; at least 5 are needed",
                self.constellation.len()
            ));
        }
        let mut ids: Vec<u32> = self.constellation.iter().map(|s| s.sat_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate sat_id in constellation".into());
        }
        for s in &self.constellation {
            if !(s.elevation_deg > 0.0 && s.elevation_deg <= 90.0) || !s.azimuth_deg.is_finite() {
                return bad(format!("satellite {}: elevation must be in (0, 90]", s.sat_id));
            }
        }
        let n = &self.noise;
        if [n.sigma_rho_sim, n.sigma_phi_sim, n.sigma_doppler_sim]
            .iter()
            .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return bad("noise sigmas must be finite and nonnegative".into());
        }
        self.trajectory.validate()?;

        let sats = self.satellites()?;
        let reference = select_reference_satellite(&sats)?;
        let epochs = self.num_epochs();
        for ev in &self.nlos_events {
            if !ids.contains(&ev.sat_id) {
                return bad(format!("NLOS event on unknown satellite {}", ev.sat_id));
            }
            if ev.sat_id == reference {
                return bad(format!(
                    "NLOS event on satellite {} which is the DD reference",
                    ev.sat_id
                ));
            }
            if ev.start_epoch >= ev.end_epoch || ev.end_epoch > epochs {
                return bad(format!(
                    "NLOS window [{}, {}) outside the {epochs} epochs",
                    ev.start_epoch, ev.end_epoch
                ));
            }
            if ![ev.pseudorange_bias, ev.carrier_bias, ev.doppler_bias]
                .iter()
                .all(|b| b.is_finite())
            {
                return bad("NLOS biases must be finite".into());
            }
        }
        for w in &self.blockage_windows {
            if w.start_epoch >= w.end_epoch || w.end_epoch > epochs {
                return bad(format!(
                    "blockage window [{}, {}) outside the {epochs} epochs",
                    w.start_epoch, w.end_epoch
                ));
            }
        }
        for slip in &self.cycle_slips {
            if !ids.contains(&slip.sat_id) || slip.sat_id == reference {
                return bad(format!("cycle slip on invalid satellite {}", slip.sat_id));
            }
            if slip.epoch >= epochs {
                return bad(format!("cycle slip epoch {} out of range", slip.epoch));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteTruth {
    pub sat_id: u32,
    /// Integer DD ambiguity, cycles.
    pub ambiguity: i64,
    pub nlos: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEpoch {
    pub epoch_index: u64,
    pub time: f64,
    pub position: EcefPosition,
    /// ECEF velocity, m/s.
    pub velocity: Vector3<f64>,
    pub satellites: Vec<SatelliteTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub epochs: Vec<TruthEpoch>,
}

/// A generated or loaded scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub frame: LocalFrame,
    pub epochs: Vec<EpochObservation>,
    pub truth: ScenarioTruth,
}

impl Scenario {
    pub fn base(&self) -> EcefPosition {
        self.frame.anchor
    }
}

fn normal(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("validated sigma"))
}

fn draw(dist: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    dist.as_ref().map_or(0.0, |d| d.sample(rng))
}

fn quantize_carrier(cycles: f64) -> f64 {
    (cycles / CARRIER_RESOLUTION).round() * CARRIER_RESOLUTION
}

/// Generate the observation stream and ground truth for `cfg`.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let frame = cfg.base.frame();
    let base = frame.anchor;
    let sats = cfg.satellites()?;
    let ref_id = select_reference_satellite(&sats)?;
    let reference = *sats.iter().find(|s| s.sat_id == ref_id).expect("reference exists");
    let dd_sats: Vec<SatelliteGeometry> =
        sats.iter().copied().filter(|s| s.sat_id != ref_id).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amb_dist = Uniform::new_inclusive(-MAX_AMBIGUITY, MAX_AMBIGUITY).expect("valid range");
    let mut ambiguities: Vec<i64> = dd_sats.iter().map(|_| amb_dist.sample(&mut rng)).collect();
    let pr_noise = normal(cfg.noise.sigma_rho_sim);
    let cp_noise = normal(cfg.noise.sigma_phi_sim);
    let dop_noise = normal(cfg.noise.sigma_doppler_sim);

    let n = cfg.num_epochs();
    let times: Vec<f64> = (0..n).map(|e| cfg.epoch_time(e)).collect();
    let states = cfg.trajectory.sample(&times);

    let mut epochs = Vec::with_capacity(n as usize);
    let mut truth = Vec::with_capacity(n as usize);
    for (e, (time, (pos_enu, vel_enu))) in (0..n).zip(times.iter().zip(states)) {
        let position = frame.to_ecef(&EnuVector::from(pos_enu));
        let velocity = frame.rotate_to_ecef(&EnuVector::from(vel_enu));
        for slip in cfg.cycle_slips.iter().filter(|s| s.epoch == e) {
            let k = dd_sats.iter().position(|s| s.sat_id == slip.sat_id).expect("validated");
            ambiguities[k] = amb_dist.sample(&mut rng);
        }
        let blocked = cfg.blockage_windows.iter().any(|w| w.contains(e));
        let mut sat_truth = Vec::with_capacity(dd_sats.len());
        let mut observations = Vec::new();
        for (k, geometry) in dd_sats.iter().enumerate() {
            let event = cfg
                .nlos_events
                .iter()
                .find(|ev| ev.sat_id == geometry.sat_id && (ev.start_epoch..ev.end_epoch).contains(&e));
            sat_truth.push(SatelliteTruth {
                sat_id: geometry.sat_id,
                ambiguity: ambiguities[k],
                nlos: event.is_some(),
            });
            if blocked {
                continue;
            }
            let (pr_bias, cp_bias, dop_bias) =
                event.map_or((0.0, 0.0, 0.0), |ev| (ev.pseudorange_bias, ev.carrier_bias, ev.doppler_bias));
            let r = dd_range(&geometry.position, &reference.position, &position, &base)?;
            let grad = dd_range_gradient(&geometry.position, &reference.position, &position)?;
            let pseudorange_dd = r + pr_bias + draw(&pr_noise, &mut rng);
            let carrier = r / cfg.wavelength_m
                + ambiguities[k] as f64
                + cp_bias
                + draw(&cp_noise, &mut rng);
            let doppler_dd = grad.dot(&velocity) + dop_bias + draw(&dop_noise, &mut rng);
            observations.push(SatelliteObservation {
                geometry: *geometry,
                obs: DdObservation {
                    sat_id: geometry.sat_id,
                    pseudorange_dd,
                    carrier_dd: quantize_carrier(carrier),
                    doppler_dd,
                    flags: ObsFlags::ALL,
                },
            });
        }
        epochs.push(EpochObservation {
            epoch_index: e,
            time: *time,
            reference: (!blocked).then_some(reference),
            satellites: observations,
            wavelength: cfg.wavelength_m,
        });
        truth.push(TruthEpoch {
            epoch_index: e,
            time: *time,
            position,
            velocity,
            satellites: sat_truth,
        });
    }
    Ok(Scenario {
        config: cfg.clone(),
        frame,
        epochs,
        truth: ScenarioTruth { epochs: truth },
    })
}

pub const LS_MAX_ITERATIONS: usize = 20;
pub const LS_STEP_TOLERANCE: f64 = 1e-4;

/// Gauss-Newton position fix from DD pseudoranges.
///
/// Returns `None` with fewer than three pseudoranges, a rank-deficient
/// geometry, or no convergence within [`LS_MAX_ITERATIONS`].
pub fn pseudorange_ls_fix(
    epoch: &EpochObservation,
    base: &EcefPosition,
    initial: &EcefPosition,
) -> Result<Option<EcefPosition>> {
    let Some(reference) = epoch.reference else {
        return Ok(None);
    };
    let sats: Vec<&SatelliteObservation> = epoch
        .satellites
        .iter()
        .filter(|s| s.obs.flags.has_pseudorange)
        .collect();
    if sats.len() < 3 {
        return Ok(None);
    }
    let mut x = *initial;
    let mut jac = DMatrix::zeros(sats.len(), 3);
    let mut resid = DVector::zeros(sats.len());
    for _ in 0..LS_MAX_ITERATIONS {
        for (row, sat) in sats.iter().enumerate() {
            let g = dd_range_gradient(&sat.geometry.position, &reference.position, &x)?;
            jac.set_row(row, &g.transpose());
            resid[row] = dd_pseudorange_residual(sat, &reference.position, &x, base)?;
        }
        let svd = jac.clone().svd(true, true);
        let smin = svd.singular_values.min();
        let smax = svd.singular_values.max();
        if !(smin > 0.0) || smax / smin > 1e8 {
            return Ok(None);
        }
        let step = svd
            .solve(&resid, 0.0)
            .map_err(|_| Error::Singular("pseudorange normal equations"))?;
        let step = Vector3::new(step[0], step[1], step[2]);
        if !step.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
        x = x.offset(&step);
        if step.norm() < LS_STEP_TOLERANCE {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::obs::{afv, doppler_velocity_ls};

    pub(crate) fn open_sky(trajectory: Trajectory) -> ScenarioConfig {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            duration_s: 30.0,
            rate_hz: 1.0,
            base: BaseStation {
                lat_deg: 35.17,
                lon_deg: 136.88,
                height_m: 40.0,
            },
            wavelength_m: crate::GPS_L1_WAVELENGTH,
            constellation: [
                (1, 0.0, 78.0),
                (2, 45.0, 35.0),
                (3, 100.0, 55.0),
                (4, 150.0, 25.0),
                (5, 200.0, 45.0),
                (6, 250.0, 30.0),
                (7, 300.0, 60.0),
                (8, 340.0, 20.0),
            ]
            .into_iter()
            .map(|(sat_id, azimuth_deg, elevation_deg)| SatelliteSpec {
                sat_id,
                azimuth_deg,
                elevation_deg,
                orbit_radius_m: default_orbit_radius(),
            })
            .collect(),
            trajectory,
            noise: SimNoise::default(),
            nlos_events: vec![],
            blockage_windows: vec![],
            cycle_slips: vec![],
            seed: 7,
        }
    }

    fn moving() -> Trajectory {
        Trajectory::Circle {
            center_enu: [200.0, 100.0, 1.5],
            radius_m: 80.0,
            speed_mps: 6.0,
        }
    }

    #[test]
    fn noiseless_residuals_vanish_at_truth() {
        let sc = generate_scenario(&open_sky(moving())).unwrap();
        let base = sc.base();
        for (ep, tr) in sc.epochs.iter().zip(&sc.truth.epochs) {
            let reference = ep.reference.unwrap().position;
            assert_eq!(ep.satellites.len(), 7);
            for s in &ep.satellites {
                let d = dd_pseudorange_residual(s, &reference, &tr.position, &base).unwrap();
                assert!(d.abs() < 1e-9, "residual {d}");
                let psi = afv(s, &reference, &tr.position, &base, ep.wavelength).unwrap();
                // carrier grid is 2^-30 cycles
                assert!(psi.abs() < 1e-8, "afv {psi}");
            }
        }
    }

    #[test]
    fn ambiguities_are_integers_and_change_only_at_slips() {
        let mut cfg = open_sky(moving());
        cfg.cycle_slips = vec![CycleSlip { sat_id: 4, epoch: 12 }];
        let sc = generate_scenario(&cfg).unwrap();
        let amb = |e: usize, id: u32| {
            sc.truth.epochs[e]
                .satellites
                .iter()
                .find(|s| s.sat_id == id)
                .unwrap()
                .ambiguity
        };
        assert_eq!(amb(0, 4), amb(11, 4));
        assert_ne!(amb(11, 4), amb(12, 4));
        assert_eq!(amb(12, 4), amb(29, 4));
        assert_eq!(amb(0, 3), amb(29, 3));
    }

    #[test]
    fn static_rover_has_zero_doppler_velocity() {
        let sc = generate_scenario(&open_sky(Trajectory::Static {
            position_enu: [30.0, -20.0, 1.0],
        }))
        .unwrap();
        let ep = &sc.epochs[3];
        let sol = doppler_velocity_ls(ep, &ep.sat_ids(), &sc.truth.epochs[3].position)
            .unwrap()
            .unwrap();
        assert!(sol.velocity.norm() < 1e-12);
        assert!(sol.residual_rms < 1e-9);
    }

    #[test]
    fn moving_rover_doppler_velocity() {
        let sc = generate_scenario(&open_sky(moving())).unwrap();
        for (ep, tr) in sc.epochs.iter().zip(&sc.truth.epochs) {
            let sol = doppler_velocity_ls(ep, &ep.sat_ids(), &tr.position).unwrap().unwrap();
            assert!((sol.velocity - tr.velocity).norm() < 1e-6);
            assert!(sol.residual_rms < 1e-9);
        }
    }

    #[test]
    fn blockage_and_nlos_are_applied() {
        let mut cfg = open_sky(moving());
        cfg.blockage_windows = vec![EpochWindow { start_epoch: 5, end_epoch: 8 }];
        cfg.nlos_events = vec![NlosEvent {
            sat_id: 3,
            start_epoch: 10,
            end_epoch: 12,
            pseudorange_bias: 20.0,
            carrier_bias: 0.25,
            doppler_bias: 0.5,
        }];
        let sc = generate_scenario(&cfg).unwrap();
        assert!((5..8).all(|e| sc.epochs[e].is_blocked()));
        assert!(!sc.epochs[4].is_blocked() && !sc.epochs[8].is_blocked());
        let base = sc.base();
        let ep = &sc.epochs[10];
        let s = ep.satellites.iter().find(|s| s.sat_id() == 3).unwrap();
        let d = dd_pseudorange_residual(s, &ep.reference.unwrap().position, &sc.truth.epochs[10].position, &base)
            .unwrap();
        assert!((d - 20.0).abs() < 1e-9);
        assert!(sc.truth.epochs[10].satellites.iter().any(|s| s.sat_id == 3 && s.nlos));
        assert!(sc.truth.epochs[12].satellites.iter().all(|s| !s.nlos));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = open_sky(moving());
        cfg.constellation.truncate(4);
        assert!(matches!(generate_scenario(&cfg), Err(Error::InvalidScenario(_))));

        let mut cfg = open_sky(moving());
        cfg.blockage_windows = vec![EpochWindow { start_epoch: 20, end_epoch: 40 }];
        assert!(matches!(cfg.validate(), Err(Error::InvalidScenario(_))));

        let mut cfg = open_sky(moving());
        cfg.nlos_events = vec![NlosEvent {
            sat_id: 1,
            start_epoch: 0,
            end_epoch: 3,
            pseudorange_bias: 20.0,
            carrier_bias: 0.0,
            doppler_bias: 0.0,
        }];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("reference"), "{err}");

        let mut cfg = open_sky(moving());
        cfg.schema_version = 9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ls_fix_recovers_truth() {
        let sc = generate_scenario(&open_sky(moving())).unwrap();
        let base = sc.base();
        for (ep, tr) in sc.epochs.iter().zip(&sc.truth.epochs).take(5) {
            let fix = pseudorange_ls_fix(ep, &base, &base).unwrap().unwrap();
            assert!(fix.distance(&tr.position) < 1e-6);
            let far = tr.position.offset(&Vector3::new(60.0, -70.0, 40.0));
            let fix = pseudorange_ls_fix(ep, &base, &far).unwrap().unwrap();
            assert!(fix.distance(&tr.position) < 1e-6);
        }
        let mut ep = sc.epochs[0].clone();
        ep.satellites.truncate(2);
        assert_eq!(pseudorange_ls_fix(&ep, &base, &base).unwrap(), None);
    }

    #[test]
    fn generation_is_deterministic() {
        let mut cfg = open_sky(moving());
        cfg.noise = SimNoise {
            sigma_rho_sim: 0.5,
            sigma_phi_sim: 0.01,
            sigma_doppler_sim: 0.03,
        };
        let a = generate_scenario(&cfg).unwrap();
        let b = generate_scenario(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed += 1;
        let c = generate_scenario(&cfg).unwrap();
        assert_ne!(a.epochs, c.epochs);
    }
}
