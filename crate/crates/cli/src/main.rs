use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rbgnss_cli::run::output_paths;
use rbgnss_cli::sweep::write_sweep;
use rbgnss_cli::{
    compare_files, grid_likelihood_map, load_filter_config, load_scenario_path, particle_sweep,
    run_filter, write_gridmap, FilterKind, GridSpec, InitMode, HarnessError, EXIT_DIVERGED, EXIT_OK,
    EXIT_USAGE,
};
use rbgnss::sim::{write_scenario, ScenarioConfig};
use rbgnss::{generate_scenario, EnuVector};

/// Ambiguity-free GNSS particle filters on synthetic scenarios.
#[derive(Parser)]
#[command(name = "rbgnss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario directory from a scenario config JSON.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run one estimator over a scenario and write its report.
    Run {
        /// Scenario directory or scenario config JSON.
        #[arg(long)]
        scenario: PathBuf,
        /// rbpf, conventional_pf or ls_fix.
        #[arg(long)]
        filter: FilterKind,
        /// Filter config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        particles: Option<usize>,
        /// Center of the initial cloud: ls_fix or truth.
        #[arg(long, default_value = "ls_fix")]
        init: InitMode,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare two run report CSVs epoch by epoch (deltas are b - a).
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Particle-count sweep of both particle filters.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [1000, 1500, 2000, 2500, 3000])]
        counts: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0])]
        seeds: Vec<u64>,
        #[arg(long, default_value = "ls_fix")]
        init: InitMode,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Likelihood field on a horizontal grid at one epoch.
    Gridmap {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        epoch: u64,
        /// Grid center `e,n,u` in meters about the base; the truth by default.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        center: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0)]
        extent: f64,
        #[arg(long, default_value_t = 0.01)]
        spacing: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn simulate(config: &Path, out_dir: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: config.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let scenario = generate_scenario(&cfg).map_err(HarnessError::from)?;
    write_scenario(out_dir, &scenario).map_err(HarnessError::from)?;
    println!("wrote {} epochs to {}", scenario.epochs.len(), out_dir.display());
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Simulate { scenario, out_dir } => simulate(&scenario, &out_dir)?,
        Command::Run {
            scenario,
            filter,
            config,
            seed,
            particles,
            init,
            out_dir,
        } => {
            let report = run_filter(&scenario, filter, config.as_deref(), seed, particles, init, &out_dir)?;
            let s = &report.summary;
            let [csv, summary, _] = output_paths(&out_dir, filter);
            println!(
                "{filter}: {} epochs, position rmse {} m, under 0.3 m {}, velocity under 0.1 m/s {}",
                s.epochs,
                fmt(s.position.rmse),
                fmt(s.position.fraction_under_threshold),
                fmt(s.velocity.fraction_under_threshold),
            );
            println!("wrote {} and {}", csv.display(), summary.display());
            if s.diverged {
                eprintln!(
                    "diverged at epoch {}; partial report written",
                    s.diverged_at_epoch.unwrap_or_default()
                );
                return Ok(EXIT_DIVERGED);
            }
        }
        Command::Compare {
            report_a,
            report_b,
            out_dir,
        } => {
            std::fs::create_dir_all(&out_dir)?;
            let out = out_dir.join("comparison.csv");
            let rows = compare_files(&report_a, &report_b, &out)?;
            for r in rows.iter().filter(|r| r.kind == "fraction_under") {
                println!(
                    "{} < {}: a {} b {} delta {}",
                    r.metric,
                    r.threshold,
                    fmt(r.a),
                    fmt(r.b),
                    fmt(r.delta())
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep {
            scenario,
            config,
            counts,
            seeds,
            init,
            out_dir,
        } => {
            let cfg = load_filter_config(config.as_deref())?;
            if counts.contains(&0) {
                return Err(HarnessError::Usage("particle counts must be at least 1".into()).into());
            }
            let sc = load_scenario_path(&scenario)?;
            let report = particle_sweep(&sc, &counts, &seeds, &cfg, init)?;
            write_sweep(&report, &out_dir)?;
            for r in &report.rows {
                println!(
                    "{} N={}: under 0.3 m {:.4} +- {:.4} ({} failed)",
                    r.filter, r.num_particles, r.position_fraction_mean, r.position_fraction_std, r.failed
                );
            }
        }
        Command::Gridmap {
            scenario,
            config,
            epoch,
            center,
            extent,
            spacing,
            out_dir,
        } => {
            let cfg = load_filter_config(config.as_deref())?;
            let sc = load_scenario_path(&scenario)?;
            let spec = GridSpec {
                epoch_index: epoch,
                center: center.map(|c| EnuVector::new(c[0], c[1], c[2])),
                extent_m: extent,
                spacing_m: spacing,
            };
            let cells = grid_likelihood_map(&sc, &spec, &cfg)?;
            std::fs::create_dir_all(&out_dir)?;
            let out = out_dir.join(format!("gridmap_epoch{epoch}.csv"));
            write_gridmap(&cells, &out)?;
            println!("wrote {} cells to {}", cells.len(), out.display());
        }
    }
    Ok(EXIT_OK)
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"))
}

/// Parse `args` (program name first), execute, and return the exit code.
fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.downcast_ref::<HarnessError>()
                .map_or(EXIT_USAGE, HarnessError::exit_code)
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenarios() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
    }

    fn cli(args: &[&Path]) -> i32 {
        let mut all = vec![OsString::from("rbgnss")];
        all.extend(args.iter().map(|a| a.as_os_str().to_owned()));
        run_cli(all)
    }

    fn p(s: &str) -> &Path {
        Path::new(s)
    }

    fn summary(dir: &Path, kind: &str) -> serde_json::Value {
        let text = std::fs::read_to_string(dir.join(format!("{kind}_summary.json"))).unwrap();
        serde_json::from_str(&text).unwrap()
    }

    /// Short noisy scenario written next to the test's temp files.
    fn short_scenario(dir: &Path) -> PathBuf {
        let mut cfg: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(scenarios().join("urban.json")).unwrap()).unwrap();
        cfg["duration_s"] = 30.into();
        cfg["nlos_events"] = serde_json::json!([]);
        cfg["blockage_windows"] = serde_json::json!([{ "start_epoch": 10, "end_epoch": 13 }]);
        let path = dir.join("short.json");
        std::fs::write(&path, cfg.to_string()).unwrap();
        path
    }

    #[test]
    fn open_sky_runs_are_accurate_and_reproducible() {
        let tmp = tempfile::tempdir().unwrap();
        let sim = tmp.path().join("sim");
        assert_eq!(cli(&[p("simulate"), p("--scenario"), &scenarios().join("open_sky.json"), p("--out-dir"), &sim]), 0);
        let filter_cfg = scenarios().join("open_sky_filter.json");
        let mut outs = Vec::new();
        for name in ["a", "b"] {
            let out = tmp.path().join(name);
            for kind in ["rbpf", "ls_fix"] {
                let code = cli(&[
                    p("run"), p("--scenario"), &sim, p("--filter"), p(kind), p("--config"), &filter_cfg,
                    p("--particles"), p("500"), p("--seed"), p("4"), p("--out-dir"), &out,
                ]);
                assert_eq!(code, 0);
            }
            outs.push(out);
        }
        let rbpf = summary(&outs[0], "rbpf");
        assert_eq!(rbpf["num_particles"], 500);
        assert_eq!(rbpf["seed"], 4);
        assert!(rbpf["position"]["rmse"].as_f64().unwrap() < 0.05, "{rbpf}");
        let ls = summary(&outs[0], "ls_fix");
        assert!(ls["position"]["rmse"].as_f64().unwrap() < 1e-6, "{ls}");
        for file in ["rbpf_report.csv", "rbpf_summary.json", "ls_fix_report.csv", "ls_fix_summary.json"] {
            let a = std::fs::read(outs[0].join(file)).unwrap();
            let b = std::fs::read(outs[1].join(file)).unwrap();
            assert!(a == b, "{file} differs between identical runs");
        }
        assert!(outs[0].join("rbpf_timing.json").exists());

        let cmp = tmp.path().join("cmp");
        let report = outs[0].join("rbpf_report.csv");
        assert_eq!(cli(&[p("compare"), &report, &report, p("--out-dir"), &cmp]), 0);
        let mut rows = csv::Reader::from_path(cmp.join("comparison.csv")).unwrap();
        let deltas: Vec<String> = rows.records().map(|r| r.unwrap()[5].to_owned()).collect();
        assert!(!deltas.is_empty());
        assert!(deltas.iter().all(|d| d.is_empty() || d.parse::<f64>().unwrap() == 0.0));
        let other = outs[0].join("ls_fix_report.csv");
        assert_eq!(cli(&[p("compare"), &report, &other, p("--out-dir"), &cmp]), 0);
    }

    #[test]
    fn compare_rejects_different_epochs() {
        let tmp = tempfile::tempdir().unwrap();
        let short = short_scenario(tmp.path());
        let out = tmp.path().join("out");
        assert_eq!(cli(&[p("run"), p("--scenario"), &short, p("--filter"), p("ls_fix"), p("--out-dir"), &out]), 0);
        let open = tmp.path().join("open");
        let open_sky = scenarios().join("open_sky.json");
        assert_eq!(cli(&[p("run"), p("--scenario"), &open_sky, p("--filter"), p("ls_fix"), p("--out-dir"), &open]), 0);
        let code = cli(&[
            p("compare"), &out.join("ls_fix_report.csv"), &open.join("ls_fix_report.csv"),
            p("--out-dir"), &tmp.path().join("cmp"),
        ]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn sweep_covers_every_cell() {
        let tmp = tempfile::tempdir().unwrap();
        let short = short_scenario(tmp.path());
        let out = tmp.path().join("sweep");
        let cfg = scenarios().join("urban_filter.json");
        let code = cli(&[
            p("sweep"), p("--scenario"), &short, p("--config"), &cfg, p("--counts"), p("50,100"),
            p("--seeds"), p("1,2"), p("--init"), p("truth"), p("--out-dir"), &out,
        ]);
        assert_eq!(code, 0);
        let cells = csv::Reader::from_path(out.join("sweep_cells.csv")).unwrap().records().count();
        assert_eq!(cells, 2 * 2 * 2);
        let rows = csv::Reader::from_path(out.join("sweep.csv")).unwrap().records().count();
        assert_eq!(rows, 2 * 2);
    }

    #[test]
    fn zero_particle_count_is_rejected_before_running() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("sweep");
        let code = cli(&[
            p("sweep"), p("--scenario"), p("does-not-exist.json"), p("--counts"), p("0,100"),
            p("--out-dir"), &out,
        ]);
        assert_eq!(code, EXIT_USAGE);
        assert!(!out.exists());
    }

    #[test]
    fn gridmap_writes_the_field() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("grid");
        let code = cli(&[
            p("gridmap"), p("--scenario"), &scenarios().join("open_sky.json"), p("--epoch"), p("3"),
            p("--extent"), p("0.2"), p("--spacing"), p("0.01"), p("--out-dir"), &out,
        ]);
        assert_eq!(code, 0);
        let mut rdr = csv::Reader::from_path(out.join("gridmap_epoch3.csv")).unwrap();
        assert_eq!(rdr.headers().unwrap(), vec!["east", "north", "log_likelihood"]);
        assert_eq!(rdr.records().count(), 21 * 21);

        let code = cli(&[
            p("gridmap"), p("--scenario"), &scenarios().join("open_sky.json"), p("--extent"), p("100"),
            p("--spacing"), p("0.01"), p("--out-dir"), &out,
        ]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn divergence_exits_two_with_a_partial_report() {
        let tmp = tempfile::tempdir().unwrap();
        let short = short_scenario(tmp.path());
        let cfg = tmp.path().join("tight.json");
        std::fs::write(&cfg, r#"{ "num_particles": 50, "divergence_spread": 0.001 }"#).unwrap();
        let out = tmp.path().join("out");
        let code = cli(&[
            p("run"), p("--scenario"), &short, p("--filter"), p("conventional_pf"), p("--config"), &cfg,
            p("--out-dir"), &out,
        ]);
        assert_eq!(code, EXIT_DIVERGED);
        let s = summary(&out, "conventional_pf");
        assert_eq!(s["diverged"], true);
        assert!(s["epochs"].as_u64().unwrap() < 30);
        assert!(out.join("conventional_pf_report.csv").exists());
    }

    #[test]
    fn usage_and_parse_errors_exit_one() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        assert_eq!(cli(&[p("fly")]), EXIT_USAGE);
        assert_eq!(cli(&[p("run"), p("--scenario"), &scenarios().join("open_sky.json")]), EXIT_USAGE);
        let open_sky = scenarios().join("open_sky.json");
        assert_eq!(
            cli(&[p("run"), p("--scenario"), &open_sky, p("--filter"), p("kalman"), p("--out-dir"), &out]),
            EXIT_USAGE
        );
        assert_eq!(
            cli(&[p("run"), p("--scenario"), &tmp.path().join("missing"), p("--filter"), p("rbpf"), p("--out-dir"), &out]),
            EXIT_USAGE
        );
        let bad = tmp.path().join("bad.json");
        std::fs::write(&bad, "{\n  \"num_particles\": 10,\n  \"sigma_phi\": oops\n}\n").unwrap();
        assert_eq!(
            cli(&[p("run"), p("--scenario"), &open_sky, p("--filter"), p("rbpf"), p("--config"), &bad, p("--out-dir"), &out]),
            EXIT_USAGE
        );
        match load_filter_config(Some(&bad)) {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a parse error, got {other:?}"),
        }
        assert_eq!(cli(&[p("--version")]), EXIT_OK);
    }

    #[test]
    fn flags_override_the_config_file() {
        let tmp = tempfile::tempdir().unwrap();
        let short = short_scenario(tmp.path());
        let cfg = tmp.path().join("cfg.json");
        std::fs::write(&cfg, r#"{ "num_particles": 40, "seed": 9, "prior_sigma": 0.05 }"#).unwrap();
        let out = tmp.path().join("out");
        let run = |extra: &[&Path]| {
            let mut args = vec![p("run"), p("--scenario"), &short, p("--filter"), p("rbpf"), p("--config"), &cfg, p("--out-dir"), &out];
            args.extend_from_slice(extra);
            assert_eq!(cli(&args), 0);
            summary(&out, "rbpf")
        };
        let s = run(&[]);
        assert_eq!((s["num_particles"].as_u64(), s["seed"].as_u64()), (Some(40), Some(9)));
        let s = run(&[p("--particles"), p("60"), p("--seed"), p("2")]);
        assert_eq!((s["num_particles"].as_u64(), s["seed"].as_u64()), (Some(60), Some(2)));
    }
}
