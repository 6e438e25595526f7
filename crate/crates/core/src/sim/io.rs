//! Scenario directories on disk.
//!
//! ```text
//! scenario.json     the generating ScenarioConfig
//! observations.csv  epoch,time_s,sat_id,az_rad,el_rad,sat_x,sat_y,sat_z,pr_dd_m,cp_dd_cyc,dop_dd_ms,flags
//! truth.csv         epoch,time_s,x,y,z,vx,vy,vz
//! ambiguities.csv   epoch,sat_id,ambiguity_cyc,nlos
//! ```
//!
//! `flags` is `REF` for the pivot row (measurement columns empty), `EMPTY`
//! for the placeholder row of an epoch without satellites, and otherwise the
//! letters of the carried measurements out of `P`, `C`, `D`. Floats are
//! written in shortest round-trip form, so reading a scenario back yields
//! bit-identical values.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;

use super::{Scenario, ScenarioConfig, ScenarioTruth, SatelliteTruth, TruthEpoch};
use crate::error::{Error, Result};
use crate::geo::{EcefPosition, SatelliteGeometry};
use crate::obs::{DdObservation, EpochObservation, ObsFlags, SatelliteObservation};

pub const CONFIG_FILE: &str = "scenario.json";
pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const AMBIGUITIES_FILE: &str = "ambiguities.csv";

const OBS_HEADER: [&str; 12] = [
    "epoch", "time_s", "sat_id", "az_rad", "el_rad", "sat_x", "sat_y", "sat_z", "pr_dd_m",
    "cp_dd_cyc", "dop_dd_ms", "flags",
];
const TRUTH_HEADER: [&str; 8] = ["epoch", "time_s", "x", "y", "z", "vx", "vy", "vz"];
const AMB_HEADER: [&str; 4] = ["epoch", "sat_id", "ambiguity_cyc", "nlos"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `scenario` into `dir`, creating it if needed.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg_path = dir.join(CONFIG_FILE);
    let mut json = serde_json::to_string_pretty(&scenario.config)?;
    json.push('\n');
    fs::write(&cfg_path, json).map_err(io_err(&cfg_path))?;
    write_observations(&dir.join(OBSERVATIONS_FILE), &scenario.epochs)?;
    write_truth(dir, &scenario.truth)
}

fn opt(present: bool, v: f64) -> String {
    if present {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn write_observations(path: &Path, epochs: &[EpochObservation]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(OBS_HEADER)?;
    for ep in epochs {
        let (e, t) = (ep.epoch_index.to_string(), ep.time.to_string());
        let geo_cols = |g: &SatelliteGeometry| {
            [
                g.sat_id.to_string(),
                g.azimuth.to_string(),
                g.elevation.to_string(),
                g.position.x.to_string(),
                g.position.y.to_string(),
                g.position.z.to_string(),
            ]
        };
        match ep.reference {
            None => {
                w.write_record([&e, &t, "", "", "", "", "", "", "", "", "", "EMPTY"])?;
                continue;
            }
            Some(r) => {
                let g = geo_cols(&r);
                w.write_record([
                    &e, &t, &g[0], &g[1], &g[2], &g[3], &g[4], &g[5], "", "", "", "REF",
                ])?;
            }
        }
        for s in &ep.satellites {
            let g = geo_cols(&s.geometry);
            let f = s.obs.flags;
            let mut flags = String::new();
            for (on, c) in [(f.has_pseudorange, 'P'), (f.has_carrier, 'C'), (f.has_doppler, 'D')] {
                if on {
                    flags.push(c);
                }
            }
            w.write_record([
                e.clone(),
                t.clone(),
                g[0].clone(),
                g[1].clone(),
                g[2].clone(),
                g[3].clone(),
                g[4].clone(),
                g[5].clone(),
                opt(f.has_pseudorange, s.obs.pseudorange_dd),
                opt(f.has_carrier, s.obs.carrier_dd),
                opt(f.has_doppler, s.obs.doppler_dd),
                flags,
            ])?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_truth(dir: &Path, truth: &ScenarioTruth) -> Result<()> {
    let path = dir.join(TRUTH_FILE);
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(io_err(&path))?);
    w.write_record(TRUTH_HEADER)?;
    for ep in &truth.epochs {
        let p = ep.position;
        let v = ep.velocity;
        w.write_record(
            [ep.epoch_index as f64, ep.time, p.x, p.y, p.z, v.x, v.y, v.z]
                .iter()
                .enumerate()
                .map(|(i, x)| if i == 0 { ep.epoch_index.to_string() } else { x.to_string() }),
        )?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(AMBIGUITIES_FILE);
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(io_err(&path))?);
    w.write_record(AMB_HEADER)?;
    for ep in &truth.epochs {
        for s in &ep.satellites {
            w.write_record([
                ep.epoch_index.to_string(),
                s.sat_id.to_string(),
                s.ambiguity.to_string(),
                u8::from(s.nlos).to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

/// Row reader that reports parse failures with file and line.
struct Rows {
    path: PathBuf,
    reader: csv::Reader<File>,
}

struct Row {
    record: csv::StringRecord,
    line: u64,
}

impl Rows {
    fn open(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let got = reader.headers()?.clone();
        if got.iter().ne(header.iter().copied()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header `{}`", header.join(",")),
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            reader,
        })
    }

    fn next(&mut self) -> Option<Result<Row>> {
        let mut record = csv::StringRecord::new();
        match self.reader.read_record(&mut record) {
            Ok(false) => None,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                Some(Ok(Row { record, line }))
            }
            Err(e) => Some(Err(self.fail(
                e.position().map_or(0, |p| p.line()),
                e.to_string(),
            ))),
        }
    }

    fn fail(&self, line: u64, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn field<T: FromStr>(&self, row: &Row, idx: usize, name: &str) -> Result<T> {
        let raw = row.record.get(idx).unwrap_or("");
        raw.trim()
            .parse()
            .map_err(|_| self.fail(row.line, format!("column `{name}`: cannot parse {raw:?}")))
    }

    fn finite(&self, row: &Row, idx: usize, name: &str) -> Result<f64> {
        let v: f64 = self.field(row, idx, name)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.fail(row.line, format!("column `{name}` is not finite")))
        }
    }

    fn optional(&self, row: &Row, idx: usize, name: &str, present: bool) -> Result<f64> {
        let raw = row.record.get(idx).unwrap_or("").trim();
        match (present, raw.is_empty()) {
            (true, false) => self.finite(row, idx, name),
            (false, true) => Ok(f64::NAN),
            (true, true) => Err(self.fail(row.line, format!("column `{name}` is empty but flagged"))),
            (false, false) => Err(self.fail(row.line, format!("column `{name}` is set but not flagged"))),
        }
    }
}

/// Read an observation stream. Epochs must appear in increasing order with
/// increasing times, each starting with its `REF` row (or a single `EMPTY`
/// row).
pub fn read_observations(path: &Path, wavelength: f64) -> Result<Vec<EpochObservation>> {
    let mut rows = Rows::open(path, &OBS_HEADER)?;
    let mut epochs: Vec<EpochObservation> = Vec::new();
    let mut empty_epoch = false;
    while let Some(row) = rows.next() {
        let row = row?;
        let epoch: u64 = rows.field(&row, 0, "epoch")?;
        let time = rows.finite(&row, 1, "time_s")?;
        let flags = row.record.get(11).unwrap_or("").trim().to_owned();
        let new_epoch = epochs.last().is_none_or(|e| e.epoch_index != epoch);
        if new_epoch {
            if let Some(prev) = epochs.last() {
                if epoch <= prev.epoch_index || time <= prev.time {
                    return Err(rows.fail(row.line, "epochs and times must increase".into()));
                }
            }
            if flags != "REF" && flags != "EMPTY" {
                return Err(rows.fail(row.line, "an epoch must start with a REF or EMPTY row".into()));
            }
            epochs.push(EpochObservation {
                epoch_index: epoch,
                time,
                satellites: Vec::new(),
                reference: None,
                wavelength,
            });
            empty_epoch = flags == "EMPTY";
            if empty_epoch {
                continue;
            }
        } else if empty_epoch {
            return Err(rows.fail(row.line, "rows after an EMPTY row in the same epoch".into()));
        } else if time != epochs.last().expect("nonempty").time {
            return Err(rows.fail(row.line, "time_s differs within one epoch".into()));
        }

        let position = EcefPosition::new(
            rows.finite(&row, 5, "sat_x")?,
            rows.finite(&row, 6, "sat_y")?,
            rows.finite(&row, 7, "sat_z")?,
        );
        let geometry = SatelliteGeometry {
            sat_id: rows.field(&row, 2, "sat_id")?,
            position,
            azimuth: rows.finite(&row, 3, "az_rad")?,
            elevation: rows.finite(&row, 4, "el_rad")?,
        };
        let ep = epochs.last_mut().expect("nonempty");
        if flags == "REF" {
            if !new_epoch {
                return Err(rows.fail(row.line, "second REF row in one epoch".into()));
            }
            ep.reference = Some(geometry);
            continue;
        }
        if flags.is_empty() || !flags.chars().all(|c| "PCD".contains(c)) {
            return Err(rows.fail(row.line, format!("unknown flags {flags:?}")));
        }
        let obs_flags = ObsFlags {
            has_pseudorange: flags.contains('P'),
            has_carrier: flags.contains('C'),
            has_doppler: flags.contains('D'),
        };
        let obs = DdObservation {
            sat_id: geometry.sat_id,
            pseudorange_dd: rows.optional(&row, 8, "pr_dd_m", obs_flags.has_pseudorange)?,
            carrier_dd: rows.optional(&row, 9, "cp_dd_cyc", obs_flags.has_carrier)?,
            doppler_dd: rows.optional(&row, 10, "dop_dd_ms", obs_flags.has_doppler)?,
            flags: obs_flags,
        };
        if ep.satellites.iter().any(|s| s.sat_id() == geometry.sat_id)
            || ep.reference_sat() == Some(geometry.sat_id)
        {
            return Err(rows.fail(row.line, format!("duplicate satellite {}", geometry.sat_id)));
        }
        ep.satellites.push(SatelliteObservation { geometry, obs });
    }
    Ok(epochs)
}

fn read_truth(dir: &Path) -> Result<ScenarioTruth> {
    let path = dir.join(TRUTH_FILE);
    let mut rows = Rows::open(&path, &TRUTH_HEADER)?;
    let mut epochs: Vec<TruthEpoch> = Vec::new();
    while let Some(row) = rows.next() {
        let row = row?;
        let mut v = [0.0; 7];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = rows.finite(&row, i + 1, TRUTH_HEADER[i + 1])?;
        }
        epochs.push(TruthEpoch {
            epoch_index: rows.field(&row, 0, "epoch")?,
            time: v[0],
            position: EcefPosition::new(v[1], v[2], v[3]),
            velocity: Vector3::new(v[4], v[5], v[6]),
            satellites: Vec::new(),
        });
    }

    let path = dir.join(AMBIGUITIES_FILE);
    let mut rows = Rows::open(&path, &AMB_HEADER)?;
    while let Some(row) = rows.next() {
        let row = row?;
        let epoch: u64 = rows.field(&row, 0, "epoch")?;
        let nlos: u8 = rows.field(&row, 3, "nlos")?;
        if nlos > 1 {
            return Err(rows.fail(row.line, "nlos must be 0 or 1".into()));
        }
        let sat = SatelliteTruth {
            sat_id: rows.field(&row, 1, "sat_id")?,
            ambiguity: rows.field(&row, 2, "ambiguity_cyc")?,
            nlos: nlos == 1,
        };
        let Some(ep) = epochs.iter_mut().find(|e| e.epoch_index == epoch) else {
            return Err(rows.fail(row.line, format!("epoch {epoch} is not in {TRUTH_FILE}")));
        };
        ep.satellites.push(sat);
    }
    Ok(ScenarioTruth { epochs })
}

/// Load a scenario directory written by [`write_scenario`].
pub fn load_scenario(dir: &Path) -> Result<Scenario> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: cfg_path.clone(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    config.validate()?;
    let epochs = read_observations(&dir.join(OBSERVATIONS_FILE), config.wavelength_m)?;
    let truth = read_truth(dir)?;
    if truth.epochs.len() != epochs.len()
        || truth.epochs.iter().zip(&epochs).any(|(t, e)| t.epoch_index != e.epoch_index)
    {
        return Err(Error::InvalidScenario(format!(
            "{OBSERVATIONS_FILE} and {TRUTH_FILE} cover different epochs"
        )));
    }
    Ok(Scenario {
        frame: config.base.frame(),
        config,
        epochs,
        truth,
    })
}
