//! Particle-count sweeps over both particle filters.

use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use rbgnss::{FilterConfig, Scenario};

use crate::run::{run_scenario, FilterKind, InitMode};
use crate::{HarnessError, Result};

pub const SWEEP_FILTERS: [FilterKind; 2] = [FilterKind::Rbpf, FilterKind::ConventionalPf];

/// Outcome of one (filter, N, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub filter: FilterKind,
    pub num_particles: usize,
    pub seed: u64,
    /// Fractions under the report thresholds, or the error that ended the run.
    pub outcome: std::result::Result<(f64, f64), String>,
    pub diverged: bool,
}

/// Aggregate over seeds for one (filter, N).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub filter: FilterKind,
    pub num_particles: usize,
    pub runs: usize,
    pub failed: usize,
    pub position_fraction_mean: f64,
    pub position_fraction_std: f64,
    pub velocity_fraction_mean: f64,
    pub velocity_fraction_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, filter: FilterKind, num_particles: usize) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.filter == filter && r.num_particles == num_particles)
    }
}

/// Mean and sample standard deviation; zero spread for a single value.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run every (filter, count, seed) combination. A failing cell is recorded
/// and does not stop the sweep.
pub fn particle_sweep(
    scenario: &Scenario,
    counts: &[usize],
    seeds: &[u64],
    cfg: &FilterConfig,
    init: InitMode,
) -> Result<SweepReport> {
    if counts.is_empty() || seeds.is_empty() {
        return Err(HarnessError::Usage("sweep needs at least one count and one seed".into()));
    }
    if let Some(bad) = counts.iter().find(|n| **n == 0) {
        return Err(HarnessError::Usage(format!("invalid particle count {bad}")));
    }
    let jobs: Vec<(FilterKind, usize, u64)> = SWEEP_FILTERS
        .iter()
        .flat_map(|&f| counts.iter().flat_map(move |&n| seeds.iter().map(move |&s| (f, n, s))))
        .collect();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(filter, num_particles, seed)| {
            let cell_cfg = FilterConfig {
                num_particles,
                seed,
                ..cfg.clone()
            };
            let run = run_scenario(scenario, filter, &cell_cfg, init);
            let diverged = run.as_ref().is_ok_and(|r| r.summary.diverged);
            let outcome = run.map_err(|e| e.to_string()).map(|r| {
                (
                    r.summary.position.fraction_under_threshold.unwrap_or(0.0)
                        * r.summary.position_available_fraction,
                    r.summary.velocity.fraction_under_threshold.unwrap_or(0.0),
                )
            });
            SweepCell {
                filter,
                num_particles,
                seed,
                outcome,
                diverged,
            }
        })
        .collect();

    let mut rows = Vec::new();
    for &filter in &SWEEP_FILTERS {
        for &n in counts {
            let group: Vec<&SweepCell> = cells
                .iter()
                .filter(|c| c.filter == filter && c.num_particles == n)
                .collect();
            let ok: Vec<(f64, f64)> = group.iter().filter_map(|c| c.outcome.clone().ok()).collect();
            let (pm, ps) = mean_std(&ok.iter().map(|o| o.0).collect::<Vec<_>>());
            let (vm, vs) = mean_std(&ok.iter().map(|o| o.1).collect::<Vec<_>>());
            rows.push(SweepRow {
                filter,
                num_particles: n,
                runs: group.len(),
                failed: group.len() - ok.len(),
                position_fraction_mean: pm,
                position_fraction_std: ps,
                velocity_fraction_mean: vm,
                velocity_fraction_std: vs,
            });
        }
    }
    Ok(SweepReport { cells, rows })
}

/// Writes `sweep.csv` (aggregates) and `sweep_cells.csv` (every run).
pub fn write_sweep(report: &SweepReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(|e| HarnessError::io(&path, e))?);
    w.write_record([
        "filter",
        "num_particles",
        "runs",
        "failed",
        "pos_frac_under_0.3m_mean",
        "pos_frac_under_0.3m_std",
        "vel_frac_under_0.1ms_mean",
        "vel_frac_under_0.1ms_std",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.filter.to_string(),
            r.num_particles.to_string(),
            r.runs.to_string(),
            r.failed.to_string(),
            r.position_fraction_mean.to_string(),
            r.position_fraction_std.to_string(),
            r.velocity_fraction_mean.to_string(),
            r.velocity_fraction_std.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;

    let path = out_dir.join("sweep_cells.csv");
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(|e| HarnessError::io(&path, e))?);
    w.write_record(["filter", "num_particles", "seed", "status", "pos_frac_under_0.3m", "vel_frac_under_0.1ms"])?;
    for c in &report.cells {
        let (status, p, v) = match &c.outcome {
            Ok((p, v)) => (
                if c.diverged { "diverged".to_owned() } else { "ok".to_owned() },
                p.to_string(),
                v.to_string(),
            ),
            Err(e) => (format!("error: {e}"), String::new(), String::new()),
        };
        w.write_record([c.filter.to_string(), c.num_particles.to_string(), c.seed.to_string(), status, p, v])?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
