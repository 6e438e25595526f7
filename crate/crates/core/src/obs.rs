//! Observation-domain math on double-differenced (DD) observations:
//! residuals, the ambiguity function value, particle likelihoods, the NLOS
//! gate and Doppler velocity least squares.
//!
//! Nothing here mutates an epoch, so every function can be evaluated for many
//! particles concurrently.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterConfig;
use crate::geo::{dd_range, dd_range_gradient, EcefPosition, SatelliteGeometry};

/// Design matrices with a worse condition number yield no velocity.
pub const MAX_VELOCITY_CONDITION: f64 = 1e8;

/// Which measurements a DD observation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsFlags {
    pub has_pseudorange: bool,
    pub has_carrier: bool,
    pub has_doppler: bool,
}

impl ObsFlags {
    pub const ALL: ObsFlags = ObsFlags {
        has_pseudorange: true,
        has_carrier: true,
        has_doppler: true,
    };
}

/// One satellite's observations double-differenced against the pivot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdObservation {
    pub sat_id: u32,
    /// Meters.
    pub pseudorange_dd: f64,
    /// Cycles, including an unknown integer ambiguity.
    pub carrier_dd: f64,
    /// DD range rate, m/s.
    pub doppler_dd: f64,
    pub flags: ObsFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteObservation {
    pub geometry: SatelliteGeometry,
    pub obs: DdObservation,
}

impl SatelliteObservation {
    pub fn sat_id(&self) -> u32 {
        self.geometry.sat_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochObservation {
    pub epoch_index: u64,
    /// Seconds since scenario start.
    pub time: f64,
    /// DD observations; the pivot is not part of this list.
    pub satellites: Vec<SatelliteObservation>,
    /// Pivot satellite. `None` only when nothing is visible.
    pub reference: Option<SatelliteGeometry>,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
}

impl EpochObservation {
    pub fn reference_sat(&self) -> Option<u32> {
        self.reference.map(|r| r.sat_id)
    }

    pub fn is_blocked(&self) -> bool {
        self.satellites.is_empty() || self.reference.is_none()
    }

    pub fn sat_ids(&self) -> Vec<u32> {
        self.satellites.iter().map(|s| s.sat_id()).collect()
    }

    /// Checks the structural invariants of a single epoch.
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epoch {}: wavelength must be positive",
                self.epoch_index
            )));
        }
        if !self.satellites.is_empty() {
            let Some(reference) = self.reference else {
                return Err(Error::InvalidArgument(format!(
                    "epoch {}: observations without a reference satellite",
                    self.epoch_index
                )));
            };
            if self.satellites.iter().any(|s| s.sat_id() == reference.sat_id) {
                return Err(Error::InvalidArgument(format!(
                    "epoch {}: reference satellite {} appears in the DD list",
                    self.epoch_index, reference.sat_id
                )));
            }
        }
        for s in &self.satellites {
            if s.obs.flags.has_carrier && !s.obs.carrier_dd.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "epoch {}: satellite {} carrier is not finite",
                    self.epoch_index,
                    s.sat_id()
                )));
            }
        }
        Ok(())
    }

    fn reference_position(&self) -> Result<EcefPosition> {
        self.reference
            .map(|r| r.position)
            .ok_or(Error::NoSatellites)
    }
}

/// Doppler least-squares velocity and receiver clock drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocitySolution {
    /// ECEF velocity, m/s.
    pub velocity: Vector3<f64>,
    /// m/s.
    pub clock_drift: f64,
    pub used_sats: Vec<u32>,
    /// m/s.
    pub residual_rms: f64,
}

/// `rho - r(x)`: observed DD pseudorange minus the DD range at `pos`.
pub fn dd_pseudorange_residual(
    sat: &SatelliteObservation,
    reference: &EcefPosition,
    pos: &EcefPosition,
    base: &EcefPosition,
) -> Result<f64> {
    if !sat.obs.flags.has_pseudorange {
        return Err(Error::MissingObservation {
            sat_id: sat.sat_id(),
            kind: "pseudorange",
        });
    }
    Ok(sat.obs.pseudorange_dd - dd_range(&sat.geometry.position, reference, pos, base)?)
}

/// Ambiguity function value in cycles, in `[-0.5, 0.5]`.
///
/// The carrier is reduced to its fractional part before the geometric term is
/// removed. For an exactly representable integer shift `n`, `carrier + n` and
/// `carrier` have bit-identical fractional parts, so the result does not
/// depend on the ambiguity at all, not even in the last bit.
pub fn afv(
    sat: &SatelliteObservation,
    reference: &EcefPosition,
    pos: &EcefPosition,
    base: &EcefPosition,
    wavelength: f64,
) -> Result<f64> {
    if !sat.obs.flags.has_carrier {
        return Err(Error::MissingObservation {
            sat_id: sat.sat_id(),
            kind: "carrier phase",
        });
    }
    if !(wavelength > 0.0) {
        return Err(Error::InvalidArgument("wavelength must be positive".into()));
    }
    let r = dd_range(&sat.geometry.position, reference, pos, base)?;
    Ok(afv_from_parts(sat.obs.carrier_dd, r, wavelength))
}

fn afv_from_parts(carrier: f64, range: f64, wavelength: f64) -> f64 {
    let frac = carrier - carrier.round();
    let t = frac - range / wavelength;
    t.round() - t
}

fn gaussian_log_density(x: f64, sigma: f64) -> f64 {
    -0.5 * (x / sigma).powi(2) - sigma.ln() - 0.5 * TAU.ln()
}

/// Gaussian density of an AFV value.
pub fn carrier_likelihood(psi: f64, sigma_phi: f64) -> Result<f64> {
    if !(sigma_phi > 0.0) {
        return Err(Error::InvalidArgument("sigma_phi must be positive".into()));
    }
    Ok(gaussian_log_density(psi, sigma_phi).exp())
}

/// Log-likelihood of a particle position given one epoch.
///
/// The product runs over every satellite with carrier phase; when
/// `cfg.use_pseudorange_likelihood` is set, each satellite with a pseudorange
/// also contributes a Gaussian factor on its DD pseudorange residual. Returns
/// `None` when no satellite carries a carrier phase.
pub fn particle_likelihood(
    epoch: &EpochObservation,
    pos: &EcefPosition,
    base: &EcefPosition,
    cfg: &FilterConfig,
) -> Result<Option<f64>> {
    if epoch.is_blocked() || !epoch.satellites.iter().any(|s| s.obs.flags.has_carrier) {
        return Ok(None);
    }
    let reference = epoch.reference_position()?;
    let mut log_l = 0.0;
    for sat in &epoch.satellites {
        if !sat.obs.flags.has_carrier && !sat.obs.flags.has_pseudorange {
            continue;
        }
        let r = dd_range(&sat.geometry.position, &reference, pos, base)?;
        if sat.obs.flags.has_carrier {
            let psi = afv_from_parts(sat.obs.carrier_dd, r, epoch.wavelength);
            log_l += gaussian_log_density(psi, cfg.sigma_phi);
        }
        if cfg.use_pseudorange_likelihood && sat.obs.flags.has_pseudorange {
            log_l += gaussian_log_density(sat.obs.pseudorange_dd - r, cfg.sigma_rho);
        }
    }
    Ok(Some(log_l))
}

/// Satellites whose DD pseudorange residual at `pos` is within `eta` meters.
/// Satellites without a pseudorange cannot be checked and are not returned.
pub fn nlos_gate(
    epoch: &EpochObservation,
    pos: &EcefPosition,
    base: &EcefPosition,
    eta: f64,
) -> Result<Vec<u32>> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    let Some(reference) = epoch.reference else {
        return Ok(Vec::new());
    };
    let mut kept = Vec::with_capacity(epoch.satellites.len());
    for sat in epoch.satellites.iter().filter(|s| s.obs.flags.has_pseudorange) {
        if dd_pseudorange_residual(sat, &reference.position, pos, base)?.abs() <= eta {
            kept.push(sat.sat_id());
        }
    }
    Ok(kept)
}

/// Least-squares velocity from DD range rates of the satellites in `subset`.
///
/// Each row is `rate_k = grad_k . v + drift`, where `grad_k` is the DD range
/// gradient at `rcv_pos` (the difference of unit line-of-sight vectors).
/// Satellites are assumed static. Needs at least four Doppler satellites and a
/// design matrix with condition number below [`MAX_VELOCITY_CONDITION`].
pub fn doppler_velocity_ls(
    epoch: &EpochObservation,
    subset: &[u32],
    rcv_pos: &EcefPosition,
) -> Result<Option<VelocitySolution>> {
    let Some(reference) = epoch.reference else {
        return Ok(None);
    };
    let used: Vec<&SatelliteObservation> = epoch
        .satellites
        .iter()
        .filter(|s| s.obs.flags.has_doppler && subset.contains(&s.sat_id()))
        .collect();
    if used.len() < 4 {
        return Ok(None);
    }
    let mut a = DMatrix::zeros(used.len(), 4);
    let mut b = DVector::zeros(used.len());
    for (row, sat) in used.iter().enumerate() {
        let g = dd_range_gradient(&sat.geometry.position, &reference.position, rcv_pos)?;
        a[(row, 0)] = g.x;
        a[(row, 1)] = g.y;
        a[(row, 2)] = g.z;
        a[(row, 3)] = 1.0;
        b[row] = sat.obs.doppler_dd;
    }
    let svd = a.clone().svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0_f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    if !(smin > 0.0) || smax / smin > MAX_VELOCITY_CONDITION {
        return Ok(None);
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|_| Error::Singular("velocity design matrix"))?;
    let resid = &b - &a * &x;
    Ok(Some(VelocitySolution {
        velocity: Vector3::new(x[0], x[1], x[2]),
        clock_drift: x[3],
        used_sats: used.iter().map(|s| s.sat_id()).collect(),
        residual_rms: (resid.norm_squared() / used.len() as f64).sqrt(),
    }))
}
