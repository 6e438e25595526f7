//! Evaluation harness: runs scenarios through the filters and writes reports.
//!
//! Everything the `rbgnss` binary does is available here so that tests can
//! drive it without spawning processes.

pub mod compare;
pub mod gridmap;
pub mod report;
pub mod run;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use compare::{compare, compare_files, ComparisonRow};
pub use gridmap::{grid_likelihood_map, write_gridmap, GridCell, GridSpec, MAX_GRID_CELLS};
pub use report::{EpochRecord, ErrorStats, RunReport, RunSummary};
pub use run::{load_filter_config, load_scenario_path, run_filter, run_scenario, FilterKind, InitMode};
pub use sweep::{particle_sweep, SweepCell, SweepReport, SweepRow};

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] rbgnss::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("reports differ: {0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Bad inputs map to [`EXIT_USAGE`]; numerical failures during a run to
    /// [`EXIT_DIVERGED`].
    pub fn exit_code(&self) -> i32 {
        use rbgnss::Error as E;
        match self {
            Self::Core(E::Geometry(_) | E::Singular(_) | E::NoSatellites) => EXIT_DIVERGED,
            _ => EXIT_USAGE,
        }
    }
}
