//! Run logging: per-step state rows, detection events, replanned
//! trajectories, timing samples and the run verdict. Logs are bit-identical
//! across reruns of the same configuration and seed.

use crate::planning::PlannedTrajectory;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Clean,
    Collision { a: u32, b: u32, t: f64 },
    OffTrack { agent: u32, t: f64 },
}

impl Verdict {
    pub fn is_clean(&self) -> bool {
        matches!(self, Verdict::Clean)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub code_version: String,
    pub verdict: Verdict,
    pub sim_time_s: f64,
    /// Completed laps per agent (closed tracks only).
    pub laps: Vec<f64>,
}

/// One per-agent state row at the logging period.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogRow {
    pub t_s: f64,
    pub agent: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub psi_rad: f64,
    pub vx_mps: f64,
    pub vy_mps: f64,
    pub r_radps: f64,
    pub delta_rad: f64,
    pub ax_filt_mps2: f64,
    pub s_m: f64,
    pub n_m: f64,
    pub mu_rad: f64,
    pub v_mps: f64,
    pub delta_cmd_rad: f64,
    pub ax_cmd_mps2: f64,
    /// Planner status string; empty for non-planning agents.
    pub plan_status: &'static str,
    pub homotopy: &'static str,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub observer: u32,
    pub target: u32,
    pub t_s: f64,
    /// Euclidean range at the snapshot validity time.
    pub range_m: f64,
}

#[derive(Debug, Clone)]
pub struct PlanRecord {
    pub agent: u32,
    pub t_s: f64,
    pub plan: PlannedTrajectory,
}

/// Wall-clock stage timings (seconds), one entry per invocation.
#[derive(Debug, Clone, Default)]
pub struct TimingLog {
    pub prediction: Vec<f64>,
    pub planning: Vec<f64>,
    pub control: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimLog {
    pub meta: RunMeta,
    pub rows: Vec<LogRow>,
    pub detections: Vec<DetectionEvent>,
    pub plans: Vec<PlanRecord>,
    pub timing: Option<TimingLog>,
}

pub const LOG_CSV_HEADER: &str = "t_s,agent,x_m,y_m,psi_rad,vx_mps,vy_mps,r_radps,delta_rad,ax_filt_mps2,s_m,n_m,mu_rad,v_mps,delta_cmd_rad,ax_cmd_mps2,plan_status,homotopy";

impl SimLog {
    /// Range at first detection of `target` by `observer`, if any.
    pub fn first_detection_distance(&self, observer: u32, target: u32) -> Option<f64> {
        self.detections
            .iter()
            .find(|d| d.observer == observer && d.target == target)
            .map(|d| d.range_m)
    }

    pub fn rows_for(&self, agent: u32) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.agent == agent)
    }

    /// Deterministic CSV rendering of the state rows.
    pub fn log_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 160 + 256);
        out.push_str(LOG_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.4},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{},{}",
                r.t_s,
                r.agent,
                r.x_m,
                r.y_m,
                r.psi_rad,
                r.vx_mps,
                r.vy_mps,
                r.r_radps,
                r.delta_rad,
                r.ax_filt_mps2,
                r.s_m,
                r.n_m,
                r.mu_rad,
                r.v_mps,
                r.delta_cmd_rad,
                r.ax_cmd_mps2,
                r.plan_status,
                r.homotopy
            );
        }
        out
    }

    pub fn detections_csv(&self) -> String {
        let mut out = String::from("observer,target,t_s,range_m\n");
        for d in &self.detections {
            let _ = writeln!(out, "{},{},{:.4},{:.6}", d.observer, d.target, d.t_s, d.range_m);
        }
        out
    }

    /// Plan rows in the exportable CSV schema.
    pub fn plans_csv(&self) -> String {
        let mut out = String::from("agent,plan_t_s,t,s,n,v,kappa,a_lon,a_lat,homotopy\n");
        for rec in &self.plans {
            for p in &rec.plan.samples {
                let _ = writeln!(
                    out,
                    "{},{:.4},{:.4},{:.6},{:.6},{:.6},{:.9},{:.6},{:.6},{}",
                    rec.agent,
                    rec.t_s,
                    p.t,
                    p.s,
                    p.n,
                    p.v,
                    p.kappa,
                    p.a_lon,
                    p.a_lat,
                    rec.plan.homotopy.as_str()
                );
            }
        }
        out
    }

    pub fn write_files(&self, dir: &std::path::Path, stem: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}_log.csv")), self.log_csv())?;
        std::fs::write(dir.join(format!("{stem}_detections.csv")), self.detections_csv())?;
        if !self.plans.is_empty() {
            std::fs::write(dir.join(format!("{stem}_plans.csv")), self.plans_csv())?;
        }
        let meta = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        std::fs::write(dir.join(format!("{stem}_meta.json")), meta)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageStats {
    pub stage: String,
    pub count: usize,
    pub mean_s: f64,
    pub p50_s: f64,
    pub p99_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyReport {
    pub enabled: bool,
    pub stages: Vec<StageStats>,
}

fn stats(name: &str, samples: &[f64]) -> StageStats {
    if samples.is_empty() {
        return StageStats { stage: name.into(), count: 0, mean_s: 0.0, p50_s: 0.0, p99_s: 0.0 };
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let pick = |q: f64| sorted[(((sorted.len() as f64) * q).ceil() as usize - 1).min(sorted.len() - 1)];
    StageStats {
        stage: name.into(),
        count: sorted.len(),
        mean_s: mean,
        p50_s: pick(0.50),
        p99_s: pick(0.99),
    }
}

/// Per-stage wall-time statistics plus the end-to-end reaction estimate
/// (modeled perception transport delay + measured compute per cycle).
pub fn cycle_latency_report(log: &SimLog, processing_delay_s: f64) -> LatencyReport {
    let Some(timing) = &log.timing else {
        return LatencyReport { enabled: false, stages: Vec::new() };
    };
    let mut stages = vec![
        stats("prediction", &timing.prediction),
        stats("planning", &timing.planning),
        stats("control", &timing.control),
    ];
    let cycles = timing.prediction.len().min(timing.planning.len());
    let ctrl_mean = if timing.control.is_empty() {
        0.0
    } else {
        timing.control.iter().sum::<f64>() / timing.control.len() as f64
    };
    let e2e: Vec<f64> = (0..cycles)
        .map(|i| processing_delay_s + timing.prediction[i] + timing.planning[i] + ctrl_mean)
        .collect();
    stages.push(stats("end_to_end", &e2e));
    LatencyReport { enabled: true, stages }
}

pub fn latency_csv(report: &LatencyReport) -> String {
    let mut out = String::from("stage,count,mean_s,p50_s,p99_s\n");
    for s in &report.stages {
        let _ = writeln!(out, "{},{},{:.6},{:.6},{:.6}", s.stage, s.count, s.mean_s, s.p50_s, s.p99_s);
    }
    out
}
