//! Run reports: per-epoch CSV records and a JSON summary.

use std::fs::File;
use std::path::Path;

use nalgebra::Vector3;
use rbgnss::{EcefPosition, EnuVector};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// Position errors below this count as accurate, meters.
pub const POSITION_THRESHOLD_M: f64 = 0.3;
/// Velocity errors below this count as accurate, m/s.
pub const VELOCITY_THRESHOLD_MS: f64 = 0.1;
pub const PERCENTILES: [f64; 5] = [50.0, 68.0, 95.0, 99.0, 100.0];

/// One row of the per-epoch report.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub time_s: f64,
    pub truth_position: EcefPosition,
    pub truth_velocity: Vector3<f64>,
    pub position: Option<EcefPosition>,
    pub velocity: Option<Vector3<f64>>,
    /// Estimate minus truth in the base-station ENU frame.
    pub position_error_enu: Option<EnuVector>,
    pub position_error_m: Option<f64>,
    pub velocity_error_ms: Option<f64>,
    pub blocked: bool,
    pub n_eff: Option<f64>,
    pub resampled: bool,
    /// Mean number of satellites the NLOS gate removed per particle.
    pub excluded_sats: f64,
    pub spread_m: Option<f64>,
    /// `|sum of normalized weights - 1|`.
    pub weight_sum_error: Option<f64>,
    /// Particles whose velocity covariance failed a Cholesky factorization.
    pub cov_failures: usize,
    pub singular_updates: usize,
}

impl EpochRecord {
    pub fn velocity_available(&self) -> bool {
        self.velocity.is_some()
    }

    pub fn position_available(&self) -> bool {
        self.position.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentile {
    pub percent: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error: f64,
    pub fraction: f64,
}

/// Error statistics over the epochs where an estimate exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub samples: usize,
    pub rmse: Option<f64>,
    pub mean: Option<f64>,
    pub percentiles: Vec<Percentile>,
    pub cdf: Vec<CdfPoint>,
    pub threshold: f64,
    pub fraction_under_threshold: Option<f64>,
}

/// Errors at which the empirical CDF is sampled: 1e-4 to 1e2, ten per decade.
pub fn cdf_grid() -> Vec<f64> {
    (-40..=20).map(|k| 10f64.powf(k as f64 / 10.0)).collect()
}

/// Fraction of `sorted` that is `<= x`.
fn fraction_le(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|e| *e <= x) as f64 / sorted.len() as f64
}

/// Empirical CDF on [`cdf_grid`] points below the largest error, closed by
/// `(max, 1.0)`.
pub fn empirical_cdf(errors: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let Some(&max) = sorted.last() else {
        return Vec::new();
    };
    let mut cdf: Vec<CdfPoint> = cdf_grid()
        .into_iter()
        .filter(|x| *x < max)
        .map(|error| CdfPoint {
            error,
            fraction: fraction_le(&sorted, error),
        })
        .collect();
    cdf.push(CdfPoint {
        error: max,
        fraction: 1.0,
    });
    cdf
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64], threshold: f64) -> Self {
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let (rmse, mean, fraction) = if n == 0 {
            (None, None, None)
        } else {
            let nf = n as f64;
            (
                Some((sorted.iter().map(|e| e * e).sum::<f64>() / nf).sqrt()),
                Some(sorted.iter().sum::<f64>() / nf),
                Some(sorted.iter().filter(|e| **e < threshold).count() as f64 / nf),
            )
        };
        let percentiles = if n == 0 {
            Vec::new()
        } else {
            PERCENTILES
                .iter()
                .map(|&percent| {
                    // nearest rank
                    let rank = ((percent / 100.0) * n as f64).ceil().max(1.0) as usize;
                    Percentile {
                        percent,
                        value: sorted[rank.min(n) - 1],
                    }
                })
                .collect()
        };
        Self {
            samples: n,
            rmse,
            mean,
            percentiles,
            cdf: empirical_cdf(&sorted),
            threshold,
            fraction_under_threshold: fraction,
        }
    }
}

/// Filter health counters accumulated over a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hygiene {
    pub max_weight_sum_error: f64,
    pub covariance_failures: usize,
    pub singular_updates: usize,
    /// Blocked epochs that follow a filtered epoch.
    pub blockage_epochs: usize,
    /// Of those, epochs whose particle spread grew.
    pub blockage_spread_increases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub filter: String,
    pub seed: u64,
    pub num_particles: usize,
    pub epochs: usize,
    pub position_available_fraction: f64,
    pub velocity_available_fraction: f64,
    pub position: ErrorStats,
    pub velocity: ErrorStats,
    pub diverged: bool,
    pub diverged_at_epoch: Option<u64>,
    pub hygiene: Hygiene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub records: Vec<EpochRecord>,
    pub summary: RunSummary,
    /// Mean wall-clock seconds per epoch. Kept out of the summary so that
    /// reports stay byte-identical between runs.
    pub wall_clock_per_epoch_s: f64,
}

pub const REPORT_HEADER: [&str; 27] = [
    "epoch",
    "time_s",
    "true_x",
    "true_y",
    "true_z",
    "true_vx",
    "true_vy",
    "true_vz",
    "est_x",
    "est_y",
    "est_z",
    "est_vx",
    "est_vy",
    "est_vz",
    "err_e",
    "err_n",
    "err_u",
    "pos_err_m",
    "vel_err_ms",
    "velocity_available",
    "blocked",
    "n_eff",
    "resampled",
    "excluded_sats",
    "spread_m",
    "weight_sum_error",
    "cov_failures",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

impl RunReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(REPORT_HEADER)?;
        for r in &self.records {
            let p = r.position;
            let v = r.velocity;
            let e = r.position_error_enu;
            w.write_record([
                r.epoch.to_string(),
                r.time_s.to_string(),
                r.truth_position.x.to_string(),
                r.truth_position.y.to_string(),
                r.truth_position.z.to_string(),
                r.truth_velocity.x.to_string(),
                r.truth_velocity.y.to_string(),
                r.truth_velocity.z.to_string(),
                opt(p.map(|p| p.x)),
                opt(p.map(|p| p.y)),
                opt(p.map(|p| p.z)),
                opt(v.map(|v| v.x)),
                opt(v.map(|v| v.y)),
                opt(v.map(|v| v.z)),
                opt(e.map(|e| e.e)),
                opt(e.map(|e| e.n)),
                opt(e.map(|e| e.u)),
                opt(r.position_error_m),
                opt(r.velocity_error_ms),
                flag(r.velocity_available()),
                flag(r.blocked),
                opt(r.n_eff),
                flag(r.resampled),
                r.excluded_sats.to_string(),
                opt(r.spread_m),
                opt(r.weight_sum_error),
                r.cov_failures.to_string(),
            ])?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))?;
        Ok(())
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.summary)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }
}

/// The columns [`compare`](crate::compare::compare) needs from a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub epoch: u64,
    pub pos_err_m: Option<f64>,
    pub vel_err_ms: Option<f64>,
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(REPORT_HEADER.iter().copied()) {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "not a run report (unexpected header)".into(),
        });
    }
    let col = |name: &str| REPORT_HEADER.iter().position(|h| *h == name).expect("known column");
    let (ce, cp, cv) = (col("epoch"), col("pos_err_m"), col("vel_err_ms"));
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |name: &str| HarnessError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("column `{name}` is malformed"),
        };
        let optional = |idx: usize, name: &str| -> Result<Option<f64>> {
            match record.get(idx).unwrap_or("") {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(name)),
            }
        };
        rows.push(ReportRow {
            epoch: record.get(ce).unwrap_or("").parse().map_err(|_| bad("epoch"))?,
            pos_err_m: optional(cp, "pos_err_m")?,
            vel_err_ms: optional(cv, "vel_err_ms")?,
        });
    }
    Ok(rows)
}
