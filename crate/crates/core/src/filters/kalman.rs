//! Kalman algebra for the 3D velocity state carried by each particle.
//!
//! The transition is `pos' = pos + dt * vel + w_n`, `vel' = vel + w_l`, so
//! `A_n = dt I` and `A_l = I`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

pub fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Time update conditioned on the particle's own displacement.
///
/// With `N = A_n P A_n^T + Q_n` and `L = P A_n^T N^-1`, the velocity mean moves
/// by `L (displacement - A_n v)` and the covariance becomes
/// `P - L N L^T + Q_l`.
pub fn time_update(
    mean: &Vector3<f64>,
    cov: &Matrix3<f64>,
    displacement: &Vector3<f64>,
    dt: f64,
    q_n: &Matrix3<f64>,
    q_l: &Matrix3<f64>,
) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let n = symmetrize(&(cov * (dt * dt) + q_n));
    if n.cholesky().is_none() {
        return Err(Error::Singular("time-update innovation covariance"));
    }
    // L^T = N^-1 A_n P; elimination keeps the small hand cases exact.
    let gain = n
        .lu()
        .solve(&(cov * dt))
        .ok_or(Error::Singular("time-update innovation covariance"))?
        .transpose();
    let mean = mean + gain * (displacement - mean * dt);
    let cov = symmetrize(&(cov - gain * n * gain.transpose() + q_l));
    Ok((mean, cov))
}

/// Linear measurement update of the velocity state.
///
/// `c` is `m x 3`, `r` is `m x m` and `innovation` has `m` rows. Uses
/// `M = C P C^T + R`, `K = P C^T M^-1`, `v += K innovation` and
/// `P -= K M K^T`.
pub fn measurement_update(
    mean: &Vector3<f64>,
    cov: &Matrix3<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    innovation: &DVector<f64>,
) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let m = c.nrows();
    if c.ncols() != 3 || r.shape() != (m, m) || innovation.len() != m {
        return Err(Error::InvalidArgument("measurement dimensions disagree".into()));
    }
    let p = DMatrix::from_column_slice(3, 3, cov.as_slice());
    let pct = &p * c.transpose();
    let mut s = c * &pct + r;
    s = (&s + s.transpose()) * 0.5;
    if s.clone().cholesky().is_none() {
        return Err(Error::Singular("innovation covariance"));
    }
    // K^T = M^-1 C P since M and P are symmetric.
    let gain = s
        .clone()
        .lu()
        .solve(&pct.transpose())
        .ok_or(Error::Singular("innovation covariance"))?
        .transpose();
    let dv = &gain * innovation;
    let dp = &gain * s * gain.transpose();
    let mean = mean + Vector3::new(dv[0], dv[1], dv[2]);
    let cov = symmetrize(&(cov - Matrix3::from_iterator(dp.iter().copied())));
    Ok((mean, cov))
}
