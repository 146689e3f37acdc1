use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use racesim_cli::sweep::{run_evasion_sweep, sweep_csv, trials_csv, SweepSpec};
use racesim_cli::{cmd_latency, cmd_run, load_scenario, verdict_exit_code};
use racesim_core::dynamics::kph_to_mps;
use std::path::PathBuf;
use std::process::ExitCode;

/// Deterministic multi-vehicle racing simulation.
#[derive(Parser)]
#[command(name = "racesim", version, about)]
struct Cli {
    /// Override the disturbance seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV/SVG artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Scenario overrides, e.g. --set perception.detection_range_m=130
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write the log CSV plus metadata.
    Run {
        scenario: PathBuf,
    },
    /// Minimum-detection-distance sweep around a standstill obstacle.
    EvasionSweep {
        scenario: PathBuf,
        /// Speeds to test, km/h, comma-separated.
        #[arg(long, value_delimiter = ',')]
        speeds_kph: Vec<f64>,
        /// Range scan as max:min:step in meters.
        #[arg(long, default_value = "300:20:5")]
        ranges: String,
    },
    /// Run with wall-clock instrumentation and write the latency report.
    Latency {
        scenario: PathBuf,
    },
    /// Render a CSV artifact (sweep or trajectory schema) to SVG.
    Plot {
        csv: PathBuf,
        /// sweep | trajectory (auto-detected when omitted).
        #[arg(long)]
        kind: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Parse and validate a scenario configuration.
    ValidateConfig {
        scenario: PathBuf,
    },
}

fn parse_ranges(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.parse::<f64>().context("range spec must be max:min:step"))
        .collect::<Result<_>>()?;
    anyhow::ensure!(parts.len() == 3, "range spec must be max:min:step");
    let (max, min, step) = (parts[0], parts[1], parts[2]);
    anyhow::ensure!(step > 0.0 && max > min && min > 0.0, "bad range spec");
    let mut out = Vec::new();
    let mut r = max;
    while r >= min - 1e-9 {
        out.push(r);
        r -= step;
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario } => {
            let scenario = load_scenario(&scenario, &cli.overrides, cli.seed)?;
            let (log, csv_path) = cmd_run(&scenario, &cli.out_dir)?;
            println!(
                "{}: {:?} after {:.2} s simulated; log at {}",
                scenario.cfg.name,
                log.meta.verdict,
                log.meta.sim_time_s,
                csv_path.display()
            );
            Ok(ExitCode::from(verdict_exit_code(&log) as u8))
        }
        Command::EvasionSweep { scenario, speeds_kph, ranges } => {
            let scenario = load_scenario(&scenario, &cli.overrides, cli.seed)?;
            let mut spec = SweepSpec::default();
            if !speeds_kph.is_empty() {
                spec.speeds_mps = speeds_kph.iter().map(|&k| kph_to_mps(k)).collect();
            }
            spec.ranges_m = parse_ranges(&ranges)?;
            let outcome = run_evasion_sweep(&scenario, &spec)?;
            std::fs::create_dir_all(&cli.out_dir)?;
            let sweep_path = cli.out_dir.join("evasion_sweep.csv");
            std::fs::write(&sweep_path, sweep_csv(&outcome))?;
            std::fs::write(cli.out_dir.join("evasion_sweep_trials.csv"), trials_csv(&outcome))?;
            print!("{}", sweep_csv(&outcome));
            let mut failed = false;
            for row in &outcome.rows {
                if row.min_detection_m.is_none() {
                    eprintln!(
                        "warning: no tested detection range succeeded at {:.0} kph",
                        row.speed_mps * 3.6
                    );
                    failed = true;
                }
            }
            if outcome.success_holes > 0 {
                eprintln!("warning: {} success holes in the scan", outcome.success_holes);
                failed = true;
            }
            println!("sweep written to {}", sweep_path.display());
            Ok(ExitCode::from(if failed { 3 } else { 0 }))
        }
        Command::Latency { scenario } => {
            let scenario = load_scenario(&scenario, &cli.overrides, cli.seed)?;
            let (log, csv) = cmd_latency(&scenario, &cli.out_dir)?;
            print!("{csv}");
            Ok(ExitCode::from(verdict_exit_code(&log) as u8))
        }
        Command::Plot { csv, kind, output } => {
            let content = std::fs::read_to_string(&csv)
                .with_context(|| format!("cannot read {}", csv.display()))?;
            let svg = racesim_cli::plot::plot_csv(&content, kind.as_deref())?;
            let out = output.unwrap_or_else(|| {
                cli.out_dir.join(format!(
                    "{}.svg",
                    csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot")
                ))
            });
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&out, svg)?;
            println!("plot written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { scenario } => {
            let scenario = load_scenario(&scenario, &cli.overrides, cli.seed)?;
            println!(
                "{}: OK ({} agents, track {} ({:.0} m), physics dt {} s)",
                scenario.cfg.name,
                scenario.cfg.agents.len(),
                scenario.cfg.track,
                scenario.track.total_length(),
                scenario.cfg.periods.physics_dt_s
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
