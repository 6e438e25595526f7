use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    Geometry(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("satellite {sat_id} has no {kind} observation")]
    MissingObservation { sat_id: u32, kind: &'static str },
    #[error("empty satellite list")]
    NoSatellites,
    #[error("matrix is not positive definite: {0}")]
    Singular(&'static str),
    #[error("invalid scenario config: {0}")]
    InvalidScenario(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
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
