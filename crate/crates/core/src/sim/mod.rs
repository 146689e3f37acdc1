//! Deterministic multi-agent simulation loop: fixed-step physics for up to
//! eight vehicles, idealized range-limited perception with a transport
//! processing delay, per-agent pipeline scheduling and full state logging.
//!
//! The loop is lock-stepped at the physics step; every pipeline period is an
//! integer multiple of it. All randomness comes from per-agent counters
//! derived from the run seed, so results are independent of scheduling.

pub mod config;
pub mod log;

pub use config::{
    apply_override, AgentConfig, ConfigError, LogConfig, PeriodsConfig, PerceptionConfig,
    PolicyConfig, Scenario, ScenarioConfig, StartConfig, StopConfig, MAX_AGENTS,
};
pub use log::{
    cycle_latency_report, latency_csv, DetectionEvent, LatencyReport, LogRow, PlanRecord, RunMeta,
    SimLog, StageStats, TimingLog, Verdict, LOG_CSV_HEADER,
};

use crate::control::{ControlCommand, TrackingController};
use crate::dynamics::{Controls, DynamicsError, VehicleParams, VehicleState};
use crate::geom::Obb;
use crate::planning::{replan, PlanInput, PlannedTrajectory, PlannerConfig};
use crate::prediction::{predict_opponent, PredictedTrajectory};
use crate::track::FrenetPose;
use sha2::{Digest, Sha256};
use std::collections::{HashSet, VecDeque};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent {agent} physics diverged at t={t:.3}: {source}")]
    Dynamics { agent: u32, t: f64, source: DynamicsError },
}

/// Exact opponent poses visible to one agent, valid as of
/// (now - processing_delay) and limited by the detection range.
#[derive(Debug, Clone)]
pub struct PerceptionSnapshot {
    pub validity_t: f64,
    pub opponents: Vec<ObservedOpponent>,
}

#[derive(Debug, Clone, Copy)]
pub struct ObservedOpponent {
    pub id: u32,
    pub state: VehicleState,
    pub range: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub v_max: f64,
}

enum Runtime {
    FullStack {
        controller: TrackingController,
        planner_cfg: PlannerConfig,
        plan: Option<PlannedTrajectory>,
        snapshot: Option<PerceptionSnapshot>,
        cmd: ControlCommand,
    },
    Scripted {
        n: f64,
        profile: Vec<(f64, f64)>,
        v0: f64,
    },
    Static,
}

struct AgentSim {
    id: u32,
    params: Arc<VehicleParams>,
    state: VehicleState,
    frenet: FrenetPose,
    progress: f64,
    runtime: Runtime,
}

impl AgentSim {
    fn plan_status(&self) -> (&'static str, &'static str) {
        match &self.runtime {
            Runtime::FullStack { plan: Some(p), .. } => (p.status.as_str(), p.homotopy.as_str()),
            Runtime::FullStack { .. } => ("none", ""),
            Runtime::Scripted { .. } => ("scripted", ""),
            Runtime::Static => ("static", ""),
        }
    }

    fn cmd(&self) -> ControlCommand {
        match &self.runtime {
            Runtime::FullStack { cmd, .. } => *cmd,
            _ => ControlCommand::default(),
        }
    }
}

fn scripted_speed(profile: &[(f64, f64)], v0: f64, t: f64) -> f64 {
    if profile.is_empty() {
        return v0;
    }
    if t <= profile[0].0 {
        return profile[0].1;
    }
    for w in profile.windows(2) {
        if t <= w[1].0 {
            let f = (t - w[0].0) / (w[1].0 - w[0].0).max(1e-9);
            return w[0].1 + f * (w[1].1 - w[0].1);
        }
    }
    profile.last().unwrap().1
}

fn steps_of(period: f64, dt: f64) -> u64 {
    (period / dt).round() as u64
}

/// Run one scenario to completion and return the full log.
pub fn run_scenario(scenario: &Scenario) -> Result<SimLog, SimError> {
    let cfg = &scenario.cfg;
    let track = scenario.track.as_ref();
    let dt = cfg.periods.physics_dt_s;
    let percep_every = steps_of(cfg.periods.perception_s, dt);
    let plan_every = steps_of(cfg.periods.planning_s, dt);
    let ctrl_every = steps_of(cfg.periods.control_s, dt);
    let log_every = steps_of(cfg.log.period_s, dt);
    let delay_steps = (cfg.perception.processing_delay_s / dt).round() as usize;
    let total_steps = (cfg.stop.max_time_s / dt).round() as u64;

    let mut agents: Vec<AgentSim> = Vec::with_capacity(cfg.agents.len());
    for (i, a) in cfg.agents.iter().enumerate() {
        let params = Arc::clone(&scenario.vehicles[i]);
        let start = FrenetPose { s: a.start.s_m, n: a.start.n_m, mu: a.start.mu_rad, v: a.start.v_mps };
        let (pos, heading) = track.frenet_to_cart(&start);
        let state = VehicleState {
            x: pos.x,
            y: pos.y,
            psi: heading,
            vx: a.start.v_mps,
            vy: 0.0,
            r: 0.0,
            delta: 0.0,
            ax_cmd_filtered: 0.0,
        };
        let runtime = match &a.policy {
            PolicyConfig::FullStack => Runtime::FullStack {
                controller: TrackingController::new(&params, cfg.control.clone()),
                planner_cfg: scenario.planner_for(i),
                plan: None,
                snapshot: None,
                cmd: ControlCommand::default(),
            },
            PolicyConfig::Scripted { speed_profile } => Runtime::Scripted {
                n: a.start.n_m,
                profile: speed_profile.clone(),
                v0: a.start.v_mps,
            },
            PolicyConfig::Static => Runtime::Static,
        };
        agents.push(AgentSim { id: i as u32, params, state, frenet: start, progress: 0.0, runtime });
    }

    let mut history: VecDeque<Vec<(VehicleState, FrenetPose)>> =
        VecDeque::with_capacity(delay_steps + 2);
    let mut rows: Vec<LogRow> = Vec::new();
    let mut detections: Vec<DetectionEvent> = Vec::new();
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    let mut plans: Vec<PlanRecord> = Vec::new();
    let mut timing = if cfg.log.timing { Some(TimingLog::default()) } else { None };
    let mut verdict = Verdict::Clean;
    let mut sim_time = 0.0;

    'main: for step in 0..=total_steps {
        let t = step as f64 * dt;
        sim_time = t;

        // World frame history for delayed perception.
        let frame: Vec<(VehicleState, FrenetPose)> =
            agents.iter().map(|a| (a.state, a.frenet)).collect();
        history.push_back(frame);
        if history.len() > delay_steps + 1 {
            history.pop_front();
        }

        // Perception refresh.
        if step % percep_every == 0 {
            let valid_frame = history.front().expect("history non-empty");
            let validity_t = t - (history.len() - 1) as f64 * dt;
            for i in 0..agents.len() {
                if !matches!(agents[i].runtime, Runtime::FullStack { .. }) {
                    continue;
                }
                let own = valid_frame[i].0.position();
                let mut opponents = Vec::new();
                for (j, agent) in agents.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let (opp_state, _) = valid_frame[j];
                    let range = own.dist(opp_state.position());
                    if range <= cfg.perception.detection_range_m {
                        opponents.push(ObservedOpponent {
                            id: agent.id,
                            state: opp_state,
                            range,
                            half_length: agent.params.length / 2.0,
                            half_width: agent.params.half_width,
                            v_max: agent.params.v_max,
                        });
                        if seen.insert((agents[i].id, agent.id)) {
                            detections.push(DetectionEvent {
                                observer: agents[i].id,
                                target: agent.id,
                                t_s: t,
                                range_m: range,
                            });
                        }
                    }
                }
                if let Runtime::FullStack { snapshot, .. } = &mut agents[i].runtime {
                    *snapshot = Some(PerceptionSnapshot { validity_t, opponents });
                }
            }
        }

        // Prediction + planning.
        if step % plan_every == 0 {
            for i in 0..agents.len() {
                let (ego_frenet, agent_id) = (agents[i].frenet, agents[i].id);
                let Runtime::FullStack { planner_cfg, plan, snapshot, .. } = &mut agents[i].runtime
                else {
                    continue;
                };
                let started = Instant::now();
                // Predictions start from snapshot states (validity time);
                // re-timing them by the processing delay compensates the
                // transport latency without ever reading fresher world state.
                let latency = cfg.perception.processing_delay_s;
                let predictions: Vec<PredictedTrajectory> = snapshot
                    .as_ref()
                    .map(|snap| {
                        snap.opponents
                            .iter()
                            .map(|o| {
                                let mut limits = planner_cfg.limits;
                                limits.v_max = o.v_max;
                                let pred = predict_opponent(
                                    o.id,
                                    &o.state,
                                    track,
                                    &limits,
                                    &cfg.prediction,
                                    o.half_length,
                                    o.half_width,
                                );
                                pred.shifted(latency, track)
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                let predict_elapsed = started.elapsed().as_secs_f64();

                let started = Instant::now();
                let input = PlanInput {
                    track,
                    ego: ego_frenet,
                    predictions: &predictions,
                    cfg: planner_cfg,
                };
                let new_plan = replan(&input, plan.as_ref());
                let plan_elapsed = started.elapsed().as_secs_f64();

                if let Some(tl) = &mut timing {
                    tl.prediction.push(predict_elapsed);
                    tl.planning.push(plan_elapsed);
                }
                if cfg.log.record_plans {
                    plans.push(PlanRecord { agent: agent_id, t_s: t, plan: new_plan.clone() });
                }
                *plan = Some(new_plan);
            }
        }

        // Control.
        if step % ctrl_every == 0 {
            for agent in agents.iter_mut() {
                let state = agent.state;
                let frenet = agent.frenet;
                let params = Arc::clone(&agent.params);
                let Runtime::FullStack { controller, plan, cmd, .. } = &mut agent.runtime else {
                    continue;
                };
                let started = Instant::now();
                *cmd = controller.track_step(&state, &frenet, plan.as_ref(), track, t, &params);
                if let Some(tl) = &mut timing {
                    tl.control.push(started.elapsed().as_secs_f64());
                }
            }
        }

        // Log rows (state at time t).
        if step % log_every == 0 {
            for agent in &agents {
                let (status, homotopy) = agent.plan_status();
                let cmd = agent.cmd();
                rows.push(LogRow {
                    t_s: t,
                    agent: agent.id,
                    x_m: agent.state.x,
                    y_m: agent.state.y,
                    psi_rad: agent.state.psi,
                    vx_mps: agent.state.vx,
                    vy_mps: agent.state.vy,
                    r_radps: agent.state.r,
                    delta_rad: agent.state.delta,
                    ax_filt_mps2: agent.state.ax_cmd_filtered,
                    s_m: agent.frenet.s,
                    n_m: agent.frenet.n,
                    mu_rad: agent.frenet.mu,
                    v_mps: agent.frenet.v,
                    delta_cmd_rad: cmd.delta_cmd,
                    ax_cmd_mps2: cmd.ax_cmd,
                    plan_status: status,
                    homotopy,
                });
            }
        }

        if step == total_steps {
            break;
        }

        // Physics advance to t + dt.
        let disturbance_idx = (t / cfg.disturbance.period_s.max(dt)).floor() as u64;
        for agent in agents.iter_mut() {
            let prev_s = agent.frenet.s;
            match &mut agent.runtime {
                Runtime::FullStack { cmd, .. } => {
                    let controls = Controls { delta_cmd: cmd.delta_cmd, ax_cmd: cmd.ax_cmd };
                    let sample = cfg.disturbance.sample(agent.id, disturbance_idx);
                    agent.state = crate::dynamics::step_rk4(
                        &agent.state,
                        &controls,
                        &agent.params,
                        dt,
                        &sample,
                    )
                    .map_err(|source| SimError::Dynamics { agent: agent.id, t, source })?;
                    let proj = track.project_near(
                        agent.state.position(),
                        prev_s,
                        25.0 + agent.state.vx * dt * 3.0,
                    );
                    let (_, dir) = track.point_at(proj.s);
                    agent.frenet = FrenetPose {
                        s: proj.s,
                        n: proj.n,
                        mu: crate::geom::wrap_angle(agent.state.psi - dir.heading()),
                        v: agent.state.speed(),
                    };
                }
                Runtime::Scripted { n, profile, v0 } => {
                    let v = scripted_speed(profile, *v0, t);
                    let s = track.wrap_station(agent.frenet.s + v * dt);
                    let pose = FrenetPose { s, n: *n, mu: 0.0, v };
                    let (pos, heading) = track.frenet_to_cart(&pose);
                    let kappa = track.curvature_at(s);
                    agent.state = VehicleState {
                        x: pos.x,
                        y: pos.y,
                        psi: heading,
                        vx: v,
                        vy: 0.0,
                        r: v * kappa,
                        delta: 0.0,
                        ax_cmd_filtered: 0.0,
                    };
                    agent.frenet = pose;
                }
                Runtime::Static => {}
            }
            agent.progress += track.station_diff(prev_s, agent.frenet.s);
        }
        let t_next = t + dt;

        // Collision check at the physics rate (strictest cheap test).
        for i in 0..agents.len() {
            for j in i + 1..agents.len() {
                let box_i = Obb {
                    center: agents[i].state.position(),
                    heading: agents[i].state.psi,
                    half_length: agents[i].params.length / 2.0,
                    half_width: agents[i].params.half_width,
                };
                let box_j = Obb {
                    center: agents[j].state.position(),
                    heading: agents[j].state.psi,
                    half_length: agents[j].params.length / 2.0,
                    half_width: agents[j].params.half_width,
                };
                if box_i.intersects(&box_j) {
                    verdict = Verdict::Collision { a: agents[i].id, b: agents[j].id, t: t_next };
                    sim_time = t_next;
                    break 'main;
                }
            }
        }

        // Track-limit check for planning agents.
        for agent in &agents {
            if !matches!(agent.runtime, Runtime::FullStack { .. }) {
                continue;
            }
            let (wl, wr) = track.width_at(agent.frenet.s);
            if agent.frenet.n > wl - agent.params.half_width
                || agent.frenet.n < -(wr - agent.params.half_width)
            {
                verdict = Verdict::OffTrack { agent: agent.id, t: t_next };
                sim_time = t_next;
                break 'main;
            }
        }

        // Stop conditions.
        if let Some(goal) = cfg.stop.progress_goal_m {
            if agents[0].progress >= goal {
                sim_time = t_next;
                break 'main;
            }
        }
        if let Some(laps) = cfg.stop.laps {
            if track.closed() && agents[0].progress >= laps as f64 * track.total_length() {
                sim_time = t_next;
                break 'main;
            }
        }
    }

    let mut hasher = Sha256::new();
    hasher.update(scenario.canonical.as_bytes());
    let config_sha256 = hex_string(&hasher.finalize());

    let laps = agents
        .iter()
        .map(|a| {
            if track.closed() {
                a.progress / track.total_length()
            } else {
                0.0
            }
        })
        .collect();

    Ok(SimLog {
        meta: RunMeta {
            scenario: cfg.name.clone(),
            config_sha256,
            seed: cfg.disturbance.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            verdict,
            sim_time_s: sim_time,
            laps,
        },
        rows,
        detections,
        plans,
        timing,
    })
}

fn hex_string(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write;
        let _ = write!(out, "{b:02x}");
    }
    out
}
