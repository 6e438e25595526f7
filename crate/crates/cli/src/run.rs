//! Streaming a scenario through one estimator.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rbgnss::filters::ParticleSet;
use rbgnss::obs::doppler_velocity_ls;
use rbgnss::sim::load_scenario;
use rbgnss::{
    conventional_pf_step, generate_scenario, init_particles, pseudorange_ls_fix, rbpf_step,
    EcefPosition, FilterConfig, Scenario, ScenarioConfig, StepReport,
};
use serde::{Deserialize, Serialize};

use crate::report::{
    EpochRecord, ErrorStats, Hygiene, RunReport, RunSummary, POSITION_THRESHOLD_M,
    VELOCITY_THRESHOLD_MS,
};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Rbpf,
    ConventionalPf,
    /// Epoch-wise pseudorange least squares with a Doppler velocity.
    LsFix,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [Self::Rbpf, Self::ConventionalPf, Self::LsFix];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rbpf => "rbpf",
            Self::ConventionalPf => "conventional_pf",
            Self::LsFix => "ls_fix",
        }
    }
}

/// Where the particle cloud is centered at the first usable epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Pseudorange least-squares fix of that epoch.
    #[default]
    LsFix,
    /// True position of that epoch. Isolates tracking from acquisition: with
    /// a meter-level fix and static satellites the cloud settles on a false
    /// carrier peak and never leaves it.
    Truth,
}

impl FromStr for InitMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls_fix" => Ok(Self::LsFix),
            "truth" => Ok(Self::Truth),
            _ => Err(HarnessError::Usage(format!("unknown init mode `{s}` (ls_fix, truth)"))),
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Usage(format!("unknown filter `{s}` (rbpf, conventional_pf, ls_fix)")))
    }
}

fn json_error(path: &Path, e: serde_json::Error) -> HarnessError {
    HarnessError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    }
}

/// A scenario directory, or a scenario config JSON that is generated on the
/// fly.
pub fn load_scenario_path(path: &Path) -> Result<Scenario> {
    if path.is_dir() {
        return Ok(load_scenario(path)?);
    }
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    Ok(generate_scenario(&cfg)?)
}

/// Filter config from JSON; `None` gives the defaults.
pub fn load_filter_config(path: Option<&Path>) -> Result<FilterConfig> {
    let Some(path) = path else {
        return Ok(FilterConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let cfg: FilterConfig = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    cfg.validate()?;
    Ok(cfg)
}

enum Estimator {
    Particles(ParticleSet),
    Fix(EcefPosition),
}

/// Per-epoch outcome before it is compared with the truth.
struct Output {
    position: Option<EcefPosition>,
    velocity: Option<nalgebra::Vector3<f64>>,
    step: Option<StepReport>,
    weight_sum_error: Option<f64>,
    cov_failures: usize,
}

fn particle_health(set: &ParticleSet) -> (f64, usize) {
    let sum: f64 = set.weights().iter().sum();
    let failures = set
        .particles
        .iter()
        .filter(|p| {
            let asym = (p.vel_cov - p.vel_cov.transpose()).abs().max();
            asym >= 1e-12 || p.vel_cov.cholesky().is_none()
        })
        .count();
    ((sum - 1.0).abs(), failures)
}

/// Run `kind` over every epoch of `scenario`.
///
/// Particle filters start at the first epoch with a pseudorange fix, scattered
/// by `cfg.prior_sigma` around the point chosen by `init`. Epochs before that
/// have no estimate. A run stops early once the particle spread exceeds
/// `cfg.divergence_spread`.
pub fn run_scenario(
    scenario: &Scenario,
    kind: FilterKind,
    cfg: &FilterConfig,
    init: InitMode,
) -> Result<RunReport> {
    cfg.validate()?;
    let base = scenario.base();
    let frame = &scenario.frame;
    let mut estimator: Option<Estimator> = match kind {
        FilterKind::LsFix => Some(Estimator::Fix(base)),
        _ => None,
    };
    let mut prev_time: Option<f64> = None;
    let mut prev_spread: Option<f64> = None;
    let mut records = Vec::with_capacity(scenario.epochs.len());
    let mut hygiene = Hygiene::default();
    let mut diverged_at = None;
    let started = Instant::now();

    for (epoch, truth) in scenario.epochs.iter().zip(&scenario.truth.epochs) {
        let dt = prev_time.map_or(1.0 / scenario.config.rate_hz, |t| epoch.time - t);
        let out = match (&mut estimator, kind) {
            (Some(Estimator::Fix(last)), _) => {
                let fix = pseudorange_ls_fix(epoch, &base, last)?;
                if let Some(f) = fix {
                    *last = f;
                }
                let velocity = match fix {
                    Some(f) => doppler_velocity_ls(epoch, &epoch.sat_ids(), &f)?.map(|s| s.velocity),
                    None => None,
                };
                Output {
                    position: fix,
                    velocity,
                    step: None,
                    weight_sum_error: None,
                    cov_failures: 0,
                }
            }
            (None, _) => match pseudorange_ls_fix(epoch, &base, &base)? {
                Some(fix) => {
                    let center = match init {
                        InitMode::LsFix => fix,
                        InitMode::Truth => truth.position,
                    };
                    let mut set = init_particles(cfg, center, cfg.prior_sigma, None)?;
                    let step = advance(&mut set, kind, epoch, &base, cfg, dt)?;
                    prev_time = Some(epoch.time);
                    let out = particle_output(&set, step);
                    estimator = Some(Estimator::Particles(set));
                    out
                }
                None => Output {
                    position: None,
                    velocity: None,
                    step: None,
                    weight_sum_error: None,
                    cov_failures: 0,
                },
            },
            (Some(Estimator::Particles(set)), _) => {
                let step = advance(set, kind, epoch, &base, cfg, dt)?;
                prev_time = Some(epoch.time);
                particle_output(set, step)
            }
        };

        let blocked = epoch.is_blocked();
        let spread = out.step.as_ref().map(|s| s.estimate.particle_spread);
        if blocked {
            if let (Some(prev), Some(now)) = (prev_spread, spread) {
                hygiene.blockage_epochs += 1;
                if now > prev {
                    hygiene.blockage_spread_increases += 1;
                }
            }
        }
        prev_spread = spread;
        if let Some(e) = out.weight_sum_error {
            hygiene.max_weight_sum_error = hygiene.max_weight_sum_error.max(e);
        }
        hygiene.covariance_failures += out.cov_failures;
        let singular = out.step.as_ref().map_or(0, |s| s.singular_updates);
        hygiene.singular_updates += singular;

        let position_error_enu = out
            .position
            .map(|p| frame.rotate_to_enu(&(p - truth.position)));
        records.push(EpochRecord {
            epoch: epoch.epoch_index,
            time_s: epoch.time,
            truth_position: truth.position,
            truth_velocity: truth.velocity,
            position: out.position,
            velocity: out.velocity,
            position_error_enu,
            position_error_m: position_error_enu.map(|e| e.norm()),
            velocity_error_ms: out.velocity.map(|v| (v - truth.velocity).norm()),
            blocked,
            n_eff: out.step.as_ref().map(|s| s.correction.n_eff),
            resampled: out.step.as_ref().is_some_and(|s| s.correction.resampled),
            excluded_sats: out.step.as_ref().map_or(0.0, |s| s.mean_excluded_sats),
            spread_m: spread,
            weight_sum_error: out.weight_sum_error,
            cov_failures: out.cov_failures,
            singular_updates: singular,
        });
        if spread.is_some_and(|s| !(s <= cfg.divergence_spread)) {
            diverged_at = Some(epoch.epoch_index);
            break;
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    let summary = summarize(kind, cfg, &records, diverged_at, hygiene);
    Ok(RunReport {
        wall_clock_per_epoch_s: elapsed / records.len().max(1) as f64,
        records,
        summary,
    })
}

fn advance(
    set: &mut ParticleSet,
    kind: FilterKind,
    epoch: &rbgnss::EpochObservation,
    base: &EcefPosition,
    cfg: &FilterConfig,
    dt: f64,
) -> Result<StepReport> {
    let noise = cfg.noise_model(dt);
    Ok(match kind {
        FilterKind::Rbpf => rbpf_step(set, epoch, base, &noise, cfg)?,
        FilterKind::ConventionalPf => conventional_pf_step(set, epoch, base, &noise, cfg)?,
        FilterKind::LsFix => unreachable!("ls_fix has no particle set"),
    })
}

fn particle_output(set: &ParticleSet, step: StepReport) -> Output {
    let (weight_sum_error, cov_failures) = particle_health(set);
    Output {
        position: Some(step.estimate.position),
        velocity: step.estimate.velocity,
        step: Some(step),
        weight_sum_error: Some(weight_sum_error),
        cov_failures,
    }
}

fn summarize(
    kind: FilterKind,
    cfg: &FilterConfig,
    records: &[EpochRecord],
    diverged_at: Option<u64>,
    hygiene: Hygiene,
) -> RunSummary {
    let n = records.len().max(1) as f64;
    let pos: Vec<f64> = records.iter().filter_map(|r| r.position_error_m).collect();
    let vel: Vec<f64> = records.iter().filter_map(|r| r.velocity_error_ms).collect();
    let particles = matches!(kind, FilterKind::Rbpf | FilterKind::ConventionalPf);
    RunSummary {
        filter: kind.name().to_owned(),
        seed: cfg.seed,
        num_particles: if particles { cfg.num_particles } else { 0 },
        epochs: records.len(),
        position_available_fraction: pos.len() as f64 / n,
        velocity_available_fraction: vel.len() as f64 / n,
        position: ErrorStats::from_errors(&pos, POSITION_THRESHOLD_M),
        velocity: ErrorStats::from_errors(&vel, VELOCITY_THRESHOLD_MS),
        diverged: diverged_at.is_some(),
        diverged_at_epoch: diverged_at,
        hygiene,
    }
}

/// File names of a run's outputs inside the output directory.
pub fn output_paths(out_dir: &Path, kind: FilterKind) -> [std::path::PathBuf; 3] {
    [
        out_dir.join(format!("{kind}_report.csv")),
        out_dir.join(format!("{kind}_summary.json")),
        out_dir.join(format!("{kind}_timing.json")),
    ]
}

/// Load inputs, run, and write `<filter>_report.csv`, `<filter>_summary.json`
/// and `<filter>_timing.json` into `out_dir`. `seed` overrides the config.
pub fn run_filter(
    scenario_path: &Path,
    kind: FilterKind,
    config_path: Option<&Path>,
    seed: Option<u64>,
    num_particles: Option<usize>,
    init: InitMode,
    out_dir: &Path,
) -> Result<RunReport> {
    let scenario = load_scenario_path(scenario_path)?;
    let mut cfg = load_filter_config(config_path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(n) = num_particles {
        cfg.num_particles = n;
    }
    let report = run_scenario(&scenario, kind, &cfg, init)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let [csv_path, summary_path, timing_path] = output_paths(out_dir, kind);
    report.write_csv(&csv_path)?;
    report.write_summary(&summary_path)?;
    let timing = serde_json::json!({ "wall_clock_per_epoch_s": report.wall_clock_per_epoch_s });
    fs::write(&timing_path, format!("{timing:#}\n")).map_err(|e| HarnessError::io(&timing_path, e))?;
    Ok(report)
}
