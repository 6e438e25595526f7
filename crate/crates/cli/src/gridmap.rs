//! Likelihood fields on a horizontal grid.

use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use rbgnss::obs::particle_likelihood;
use rbgnss::{EnuVector, FilterConfig, Scenario};

use crate::{HarnessError, Result};

pub const MAX_GRID_CELLS: usize = 1_000_000;

/// A square grid of side `extent_m` centered on `center` (ENU about the base
/// station; the true position when `None`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub epoch_index: u64,
    pub center: Option<EnuVector>,
    pub extent_m: f64,
    pub spacing_m: f64,
}

impl GridSpec {
    /// Cells per side; the center is always a grid point.
    pub fn cells_per_side(&self) -> Result<usize> {
        if !(self.spacing_m > 0.0 && self.spacing_m.is_finite()) {
            return Err(HarnessError::Usage("grid spacing must be positive".into()));
        }
        if !(self.extent_m >= 0.0 && self.extent_m.is_finite()) {
            return Err(HarnessError::Usage("grid extent must be nonnegative".into()));
        }
        let half = (self.extent_m / 2.0 / self.spacing_m + 1e-9).floor();
        let side = 2.0 * half + 1.0;
        if side * side > MAX_GRID_CELLS as f64 {
            return Err(HarnessError::Usage(format!(
                "{side}x{side} grid exceeds {MAX_GRID_CELLS} cells; use a coarser spacing or smaller extent"
            )));
        }
        Ok(side as usize)
    }
}

/// `log_likelihood` is `None` where no satellite carries a carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    /// Offset from the grid center, meters.
    pub east: f64,
    pub north: f64,
    pub log_likelihood: Option<f64>,
}

/// Evaluate the particle likelihood at every grid point, row-major from the
/// south-west corner.
pub fn grid_likelihood_map(scenario: &Scenario, spec: &GridSpec, cfg: &FilterConfig) -> Result<Vec<GridCell>> {
    let side = spec.cells_per_side()?;
    let epoch = scenario
        .epochs
        .iter()
        .position(|e| e.epoch_index == spec.epoch_index)
        .ok_or_else(|| HarnessError::Usage(format!("epoch {} is not in the scenario", spec.epoch_index)))?;
    let obs = &scenario.epochs[epoch];
    let frame = &scenario.frame;
    let center = spec
        .center
        .unwrap_or_else(|| frame.to_enu(&scenario.truth.epochs[epoch].position));
    let base = scenario.base();
    let mid = (side - 1) as f64 / 2.0;
    (0..side * side)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % side, k / side);
            let east = (i as f64 - mid) * spec.spacing_m;
            let north = (j as f64 - mid) * spec.spacing_m;
            let p = frame.to_ecef(&EnuVector::new(center.e + east, center.n + north, center.u));
            Ok(GridCell {
                east,
                north,
                log_likelihood: particle_likelihood(obs, &p, &base, cfg)?,
            })
        })
        .collect()
}

pub fn write_gridmap(cells: &[GridCell], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["east", "north", "log_likelihood"])?;
    for c in cells {
        w.write_record([
            c.east.to_string(),
            c.north.to_string(),
            c.log_likelihood.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(extent_m: f64, spacing_m: f64) -> GridSpec {
        GridSpec {
            epoch_index: 0,
            center: None,
            extent_m,
            spacing_m,
        }
    }

    #[test]
    fn cell_counts() {
        assert_eq!(spec(1.0, 0.01).cells_per_side().unwrap(), 101);
        assert_eq!(spec(0.0, 0.01).cells_per_side().unwrap(), 1);
        assert!(spec(100.0, 0.01).cells_per_side().is_err());
        assert!(spec(1.0, 0.0).cells_per_side().is_err());
    }
}
