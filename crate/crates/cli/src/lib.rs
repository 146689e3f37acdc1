//! Library surface of the command-line front end; the acceptance suite and
//! the binary share these entry points.

pub mod plot;
pub mod svg;
pub mod sweep;

use anyhow::{Context, Result};
use racesim_core::sim::{
    apply_override, cycle_latency_report, latency_csv, run_scenario, Scenario, SimLog, Verdict,
};
use std::path::{Path, PathBuf};

/// Load a scenario file with `key=value` overrides applied on the raw JSON.
pub fn load_scenario(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<Scenario> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut doc: serde_json::Value =
        serde_json::from_str(&raw).with_context(|| format!("cannot parse {}", path.display()))?;
    for assignment in overrides {
        apply_override(&mut doc, assignment)?;
    }
    if let Some(seed) = seed {
        apply_override(&mut doc, &format!("disturbance.seed={seed}"))?;
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(Scenario::from_value(doc, base)?)
}

/// Exit code a finished run maps to: 0 clean, 2 collision/off-track.
pub fn verdict_exit_code(log: &SimLog) -> i32 {
    match log.meta.verdict {
        Verdict::Clean => 0,
        _ => 2,
    }
}

pub fn cmd_run(scenario: &Scenario, out_dir: &Path) -> Result<(SimLog, PathBuf)> {
    let log = run_scenario(scenario)?;
    let stem = scenario.cfg.name.clone();
    log.write_files(out_dir, &stem)?;
    Ok((log, out_dir.join(format!("{stem}_log.csv"))))
}

pub fn cmd_latency(scenario: &Scenario, out_dir: &Path) -> Result<(SimLog, String)> {
    let mut cfg = scenario.cfg.clone();
    cfg.log.timing = true;
    let timed = scenario.with_config(cfg)?;
    let log = run_scenario(&timed)?;
    let report = cycle_latency_report(&log, timed.cfg.perception.processing_delay_s);
    let csv = latency_csv(&report);
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(format!("{}_latency.csv", timed.cfg.name)), &csv)?;
    Ok((log, csv))
}
