//! Coordinate frames, satellite geometry and double-difference ranges.
//!
//! Filtering happens in ECEF. The ENU frame anchored at the base station is
//! only used for scenario authoring and error reporting.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::ops::Sub;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spherical Earth radius used to anchor local frames.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// A point in the Earth-centered Earth-fixed frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcefPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPosition {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Position on a spherical Earth from geodetic-style coordinates.
    pub fn from_spherical(lat: f64, lon: f64, height: f64) -> Self {
        let r = EARTH_RADIUS_M + height;
        Self::new(
            r * lat.cos() * lon.cos(),
            r * lat.cos() * lon.sin(),
            r * lat.sin(),
        )
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn offset(self, d: &Vector3<f64>) -> Self {
        Self::new(self.x + d.x, self.y + d.y, self.z + d.z)
    }

    pub fn distance(&self, other: &EcefPosition) -> f64 {
        (*self - *other).norm()
    }
}

impl From<Vector3<f64>> for EcefPosition {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

impl Sub for EcefPosition {
    type Output = Vector3<f64>;

    fn sub(self, rhs: Self) -> Vector3<f64> {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// East-north-up components in the local frame (meters, or m/s for velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnuVector {
    pub e: f64,
    pub n: f64,
    pub u: f64,
}

impl EnuVector {
    pub const fn new(e: f64, n: f64, u: f64) -> Self {
        Self { e, n, u }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.e, self.n, self.u)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

impl From<Vector3<f64>> for EnuVector {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

fn ecef_to_enu_rotation(lat: f64, lon: f64) -> Matrix3<f64> {
    let (slat, clat) = lat.sin_cos();
    let (slon, clon) = lon.sin_cos();
    Matrix3::new(
        -slon,
        clon,
        0.0,
        -slat * clon,
        -slat * slon,
        clat,
        clat * clon,
        clat * slon,
        slat,
    )
}

pub fn ecef_to_enu(p: &EcefPosition, anchor: &EcefPosition, lat: f64, lon: f64) -> EnuVector {
    (ecef_to_enu_rotation(lat, lon) * (*p - *anchor)).into()
}

pub fn enu_to_ecef(v: &EnuVector, anchor: &EcefPosition, lat: f64, lon: f64) -> EcefPosition {
    anchor.offset(&(ecef_to_enu_rotation(lat, lon).transpose() * v.to_vector()))
}

/// Local ENU frame anchored at a fixed ECEF point, with the rotation cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub anchor: EcefPosition,
    pub lat: f64,
    pub lon: f64,
    rot: Matrix3<f64>,
}

impl LocalFrame {
    pub fn new(anchor: EcefPosition, lat: f64, lon: f64) -> Self {
        Self {
            anchor,
            lat,
            lon,
            rot: ecef_to_enu_rotation(lat, lon),
        }
    }

    /// Frame anchored at a spherical-Earth point.
    pub fn from_spherical(lat: f64, lon: f64, height: f64) -> Self {
        Self::new(EcefPosition::from_spherical(lat, lon, height), lat, lon)
    }

    /// Frame whose latitude/longitude are the spherical angles of `anchor`.
    pub fn at(anchor: EcefPosition) -> Self {
        let lon = anchor.y.atan2(anchor.x);
        let lat = anchor.z.atan2(anchor.x.hypot(anchor.y));
        Self::new(anchor, lat, lon)
    }

    pub fn to_enu(&self, p: &EcefPosition) -> EnuVector {
        (self.rot * (*p - self.anchor)).into()
    }

    pub fn to_ecef(&self, v: &EnuVector) -> EcefPosition {
        self.anchor.offset(&(self.rot.transpose() * v.to_vector()))
    }

    /// Rotate a free vector (e.g. a velocity) from ECEF into ENU.
    pub fn rotate_to_enu(&self, v: &Vector3<f64>) -> EnuVector {
        (self.rot * v).into()
    }

    pub fn rotate_to_ecef(&self, v: &EnuVector) -> Vector3<f64> {
        self.rot.transpose() * v.to_vector()
    }
}

pub fn geometric_range(sat: &EcefPosition, rcv: &EcefPosition) -> Result<f64> {
    let r = (*sat - *rcv).norm();
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(Error::Geometry("satellite and receiver coincide"))
    }
}

/// Double-differenced geometric range between satellite `k` and the pivot,
/// across the rover and base receivers.
pub fn dd_range(
    sat_k: &EcefPosition,
    sat_ref: &EcefPosition,
    rover: &EcefPosition,
    base: &EcefPosition,
) -> Result<f64> {
    let sd_k = geometric_range(sat_k, rover)? - geometric_range(sat_k, base)?;
    let sd_ref = geometric_range(sat_ref, rover)? - geometric_range(sat_ref, base)?;
    Ok(sd_k - sd_ref)
}

/// Gradient of [`dd_range`] with respect to the rover position: `e_ref - e_k`
/// with `e` the unit line-of-sight from rover to satellite.
pub fn dd_range_gradient(
    sat_k: &EcefPosition,
    sat_ref: &EcefPosition,
    rover: &EcefPosition,
) -> Result<Vector3<f64>> {
    let to_k = *sat_k - *rover;
    let to_ref = *sat_ref - *rover;
    let (nk, nref) = (to_k.norm(), to_ref.norm());
    if nk == 0.0 || nref == 0.0 || !nk.is_finite() || !nref.is_finite() {
        return Err(Error::Geometry("rover coincides with a satellite"));
    }
    Ok(to_ref / nref - to_k / nk)
}

/// A satellite as seen from the base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteGeometry {
    pub sat_id: u32,
    pub position: EcefPosition,
    /// Radians in `[0, pi/2]`.
    pub elevation: f64,
    /// Radians in `[0, 2pi)`, clockwise from north.
    pub azimuth: f64,
}

impl SatelliteGeometry {
    pub fn from_position(sat_id: u32, position: EcefPosition, frame: &LocalFrame) -> Self {
        let (elevation, azimuth) = elevation_azimuth(&position, frame);
        Self {
            sat_id,
            position,
            elevation,
            azimuth,
        }
    }
}

/// Elevation and azimuth of `p` seen from the frame anchor. Elevation is
/// clamped to `[0, pi/2]`.
pub fn elevation_azimuth(p: &EcefPosition, frame: &LocalFrame) -> (f64, f64) {
    let enu = frame.to_enu(p);
    let horiz = enu.e.hypot(enu.n);
    let el = enu.u.atan2(horiz).clamp(0.0, FRAC_PI_2);
    let mut az = enu.e.atan2(enu.n);
    if az < 0.0 {
        az += TAU;
    }
    if az >= TAU {
        az -= TAU;
    }
    (el, az)
}

/// Highest-elevation satellite, ties broken by the lowest id.
pub fn select_reference_satellite(sats: &[SatelliteGeometry]) -> Result<u32> {
    sats.iter()
        .max_by(|a, b| {
            a.elevation
                .total_cmp(&b.elevation)
                .then_with(|| b.sat_id.cmp(&a.sat_id))
        })
        .map(|s| s.sat_id)
        .ok_or(Error::NoSatellites)
}
