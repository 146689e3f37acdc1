//! Evasion-distance case study: for each approach speed, find the minimum
//! detection range at which the avoidance maneuver around a standstill
//! obstacle still succeeds.

use anyhow::{bail, Context, Result};
use racesim_core::dynamics::kph_to_mps;
use racesim_core::sim::{run_scenario, Scenario, SimLog};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Sweep description: speeds to test and the (descending) detection ranges
/// scanned per speed.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub speeds_mps: Vec<f64>,
    pub ranges_m: Vec<f64>,
    /// Refinement resolution of the bisection stage.
    pub refine_m: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            speeds_mps: (0..9).map(|i| kph_to_mps(100.0 + 25.0 * i as f64)).collect(),
            ranges_m: {
                let mut r: Vec<f64> = (4..=60).map(|i| i as f64 * 5.0).collect();
                r.reverse(); // 300 down to 20
                r
            },
            refine_m: 1.0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.speeds_mps.is_empty() || self.ranges_m.is_empty() {
            bail!("sweep needs non-empty speed and range lists");
        }
        if !self.ranges_m.windows(2).all(|w| w[1] < w[0]) {
            bail!("detection ranges must be strictly descending");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub speed_mps: f64,
    pub range_m: f64,
    pub success: bool,
    pub verdict_clean: bool,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub speed_mps: f64,
    /// Minimum detection range with a successful evasion; None when every
    /// tested range failed.
    pub min_detection_m: Option<f64>,
    pub brake_distance_m: f64,
    pub delay_adjusted_m: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialOutcome>,
    /// Set when a coarse-scan success appeared below a failure (should never
    /// happen; recorded for the consistency audit).
    pub success_holes: usize,
}

/// Processing delay used for the delay-adjusted column (reported additively,
/// matching how the penalty is presented in the study).
pub const DELAY_ADJUST_S: f64 = 0.2;

fn obstacle_station(scenario: &Scenario) -> Result<f64> {
    scenario
        .cfg
        .agents
        .iter()
        .find(|a| matches!(a.policy, racesim_core::sim::PolicyConfig::Static))
        .map(|a| a.start.s_m)
        .context("sweep scenario needs a static obstacle agent")
}

/// Success criterion: clean run, the obstacle actually passed, and the ego
/// back within 2 m of its pre-evasion offset within 500 m after the obstacle.
pub fn evasion_succeeded(log: &SimLog, track_len: f64, s_start: f64, s_obstacle: f64, n_pre: f64) -> bool {
    if !log.meta.verdict.is_clean() {
        return false;
    }
    let gap_to_obstacle = (s_obstacle - s_start).rem_euclid(track_len);
    let mut passed = false;
    for row in log.rows_for(0) {
        // Progress past the obstacle, measured from the start station.
        let progress = (row.s_m - s_start).rem_euclid(track_len);
        if progress > gap_to_obstacle + 10.0 && progress < gap_to_obstacle + 500.0 {
            passed = true;
            if (row.n_m - n_pre).abs() <= 2.0 {
                return true;
            }
        }
    }
    let _ = passed;
    false
}

fn run_trial(base: &Scenario, speed: f64, range: f64) -> Result<TrialOutcome> {
    let mut cfg = base.cfg.clone();
    cfg.agents[0].start.v_mps = speed;
    cfg.agents[0].target_speed_mps = speed;
    cfg.perception.detection_range_m = range;
    let goal = cfg.stop.progress_goal_m.unwrap_or(1200.0);
    cfg.stop.max_time_s = ((goal + 80.0) / speed.max(5.0) + 10.0).clamp(20.0, 120.0);
    let scenario = base.with_config(cfg)?;
    let log = run_scenario(&scenario)?;
    let s_start = scenario.cfg.agents[0].start.s_m;
    let n_pre = scenario.cfg.agents[0].start.n_m;
    let s_obstacle = obstacle_station(&scenario)?;
    let success =
        evasion_succeeded(&log, scenario.track.total_length(), s_start, s_obstacle, n_pre);
    Ok(TrialOutcome {
        speed_mps: speed,
        range_m: range,
        success,
        verdict_clean: log.meta.verdict.is_clean(),
    })
}

/// Run the full sweep. Trials are independent simulations and run
/// concurrently; assembly is keyed by (speed, range) so the result does not
/// depend on scheduling.
pub fn run_evasion_sweep(base: &Scenario, spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let mut jobs: Vec<(f64, f64)> = Vec::new();
    for &v in &spec.speeds_mps {
        for &r in &spec.ranges_m {
            jobs.push((v, r));
        }
    }
    let mut trials: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(v, r)| run_trial(base, v, r))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut holes = 0usize;
    for &speed in &spec.speeds_mps {
        let mut per_speed: Vec<&TrialOutcome> = trials
            .iter()
            .filter(|t| (t.speed_mps - speed).abs() < 1e-9)
            .collect();
        per_speed.sort_by(|a, b| b.range_m.partial_cmp(&a.range_m).unwrap());
        // Consistency: once the scan fails, no smaller range may succeed.
        let mut seen_failure = false;
        let mut coarse_min: Option<f64> = None;
        let mut coarse_fail: Option<f64> = None;
        for t in &per_speed {
            if t.success {
                if seen_failure {
                    holes += 1;
                }
                if !seen_failure {
                    coarse_min = Some(t.range_m);
                }
            } else {
                if !seen_failure {
                    coarse_fail = Some(t.range_m);
                }
                seen_failure = true;
            }
        }
        // Bisection refinement between the last success and the first failure.
        let refined = match (coarse_min, coarse_fail) {
            (Some(mut lo_success), Some(mut hi_fail)) => {
                while lo_success - hi_fail > spec.refine_m + 1e-9 {
                    let mid = ((lo_success + hi_fail) / 2.0 / spec.refine_m).round() * spec.refine_m;
                    if mid <= hi_fail || mid >= lo_success {
                        break;
                    }
                    let t = run_trial(base, speed, mid)?;
                    if t.success {
                        lo_success = mid;
                    } else {
                        hi_fail = mid;
                    }
                    trials.push(t);
                }
                Some(lo_success)
            }
            (Some(min), None) => Some(min),
            _ => None,
        };
        rows.push(SweepRow {
            speed_mps: speed,
            min_detection_m: refined,
            brake_distance_m: racesim_core::braking_distance(speed, 14.0),
            delay_adjusted_m: refined.map(|m| m + speed * DELAY_ADJUST_S),
        });
    }
    Ok(SweepOutcome { rows, trials, success_holes: holes })
}

pub fn sweep_csv(outcome: &SweepOutcome) -> String {
    let mut out = String::from("speed_mps,min_detection_m,brake_distance_m,delay_adjusted_m\n");
    for row in &outcome.rows {
        let min = row.min_detection_m.map(|v| format!("{v:.1}")).unwrap_or_default();
        let adj = row.delay_adjusted_m.map(|v| format!("{v:.1}")).unwrap_or_default();
        let _ = writeln!(out, "{:.3},{},{:.1},{}", row.speed_mps, min, row.brake_distance_m, adj);
    }
    out
}

pub fn trials_csv(outcome: &SweepOutcome) -> String {
    let mut out = String::from("speed_mps,range_m,success,verdict_clean\n");
    let mut sorted = outcome.trials.clone();
    sorted.sort_by(|a, b| {
        (a.speed_mps, -a.range_m)
            .partial_cmp(&(b.speed_mps, -b.range_m))
            .unwrap()
    });
    for t in sorted {
        let _ = writeln!(out, "{:.3},{:.1},{},{}", t.speed_mps, t.range_m, t.success, t.verdict_clean);
    }
    out
}
