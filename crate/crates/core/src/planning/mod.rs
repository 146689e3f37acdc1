//! Spatio-temporal lattice planner: globally optimal coarse trajectories over
//! a layered (station, offset, speed) graph, plus the friction-limited
//! point-mass velocity profiler shared with prediction.

mod lattice;
mod profile;

pub use lattice::{
    build_lattice, search_optimal, LatticeEdge, LatticeGraph, LatticeNode, ObstacleSet, PlanError,
    SearchResult, StaticBlock,
};

/// Test/diagnostic access to the spatio-temporal edge check.
pub fn edge_clear_dynamic_probe(
    obstacles: &ObstacleSet,
    track: &crate::track::TrackModel,
    s_from: f64,
    n_from: f64,
    s_to: f64,
    n_to: f64,
    t_entry: f64,
    dt: f64,
) -> bool {
    lattice::edge_clear_dynamic(obstacles, track, s_from, n_from, s_to, n_to, t_entry, dt)
}
pub use profile::{lateral_cap, velocity_profile, velocity_profile_with_caps};

use profile::velocity_profile_with_caps as profile_with_caps;

use crate::dynamics::PointMassLimits;
use crate::prediction::PredictedTrajectory;
use crate::track::{FrenetPose, TrackModel};
use serde::{Deserialize, Serialize};

/// Planner parameters; part of the scenario configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub ds_m: f64,
    pub dn_m: f64,
    pub dv_mps: f64,
    pub horizon_m: f64,
    /// Maximum lateral cell change per layer transition.
    pub max_step_cells: i32,
    /// Maximum lateral cell change on the partial first edge out of the
    /// measured ego state.
    pub start_max_step_cells: i32,
    pub w_n: f64,
    pub w_dn: f64,
    pub w_dv: f64,
    /// Corridor safety margin added to the ego half-width.
    pub safety_margin_m: f64,
    /// Fraction of the lateral budget available to node speed caps; the
    /// remainder stays in reserve for lateral transitions and control.
    pub cap_reserve_frac: f64,
    /// Extra lateral obstacle margin during the search covering the peak
    /// rounding of the smoothed reconstruction.
    pub reconstruction_margin_m: f64,
    /// Post-reconstruction collision validation covers this much plan time;
    /// the tail beyond it is re-validated by the frequent replanning cycle
    /// long before it is flown.
    pub validation_horizon_s: f64,
    /// Output trajectory sample step.
    pub plan_dt_s: f64,
    /// Ego state projection ahead of the planning instant.
    pub compute_delay_s: f64,
    pub limits: PointMassLimits,
    pub ego_half_width_m: f64,
    pub ego_half_length_m: f64,
    /// Deceleration authority of the brake-on-path fallback.
    pub a_brake_emergency_mps2: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        // Layer spacing is sized so one grid step of speed change (dv) stays
        // inside the friction circle at top speed: dv * v_max <= a_drive * ds.
        PlannerConfig {
            ds_m: 50.0,
            dn_m: 1.5,
            dv_mps: 5.0,
            horizon_m: 400.0,
            max_step_cells: 2,
            start_max_step_cells: 1,
            w_n: 0.0005,
            w_dn: 0.05,
            w_dv: 0.01,
            safety_margin_m: 0.5,
            cap_reserve_frac: 0.94,
            reconstruction_margin_m: 0.6,
            validation_horizon_s: 3.0,
            plan_dt_s: 0.05,
            compute_delay_s: 0.0,
            limits: PointMassLimits::default(),
            ego_half_width_m: 0.95,
            ego_half_length_m: 2.45,
            a_brake_emergency_mps2: 14.0,
        }
    }
}

/// Maneuver class of a plan relative to the nearest relevant opponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Homotopy {
    ClearTrack,
    Follow,
    PassLeft,
    PassRight,
}

impl Homotopy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Homotopy::ClearTrack => "clear-track",
            Homotopy::Follow => "follow",
            Homotopy::PassLeft => "pass-left",
            Homotopy::PassRight => "pass-right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    Optimal,
    FallbackBrake,
}

impl PlanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanStatus::Optimal => "optimal",
            PlanStatus::FallbackBrake => "fallback-brake",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlanSample {
    pub t: f64,
    /// Wrapped station.
    pub s: f64,
    /// Centerline progress from the plan start (monotone, unwrapped).
    pub u: f64,
    pub n: f64,
    /// Lateral slope dn/ds of the plan path.
    pub slope: f64,
    pub v: f64,
    pub kappa: f64,
    pub a_lon: f64,
    pub a_lat: f64,
}

/// Coarse target trajectory handed to the tracking controller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannedTrajectory {
    pub samples: Vec<PlanSample>,
    pub total_time: f64,
    pub homotopy: Homotopy,
    pub status: PlanStatus,
    /// DP path cost (diagnostic).
    pub cost: f64,
    /// Friction budget the plan was built with.
    pub a_max: f64,
}

impl PlannedTrajectory {
    /// Interpolated reference at a given centerline progress `u`.
    pub fn reference_at_progress(&self, u: f64) -> PlanSample {
        let samples = &self.samples;
        if u <= samples[0].u {
            return samples[0];
        }
        if u >= samples[samples.len() - 1].u {
            return samples[samples.len() - 1];
        }
        let idx = samples.partition_point(|p| p.u <= u).saturating_sub(1).min(samples.len() - 2);
        let a = &samples[idx];
        let b = &samples[idx + 1];
        let w = ((u - a.u) / (b.u - a.u)).clamp(0.0, 1.0);
        PlanSample {
            t: a.t + w * (b.t - a.t),
            s: a.s, // wrapped station of the bracketing sample
            u,
            n: a.n + w * (b.n - a.n),
            slope: a.slope + w * (b.slope - a.slope),
            v: a.v + w * (b.v - a.v),
            kappa: a.kappa + w * (b.kappa - a.kappa),
            a_lon: a.a_lon,
            a_lat: a.a_lat,
        }
    }

    pub fn end_progress(&self) -> f64 {
        self.samples.last().map(|p| p.u).unwrap_or(0.0)
    }
}

/// Everything the planner needs to know about the world at one instant.
pub struct PlanInput<'a> {
    pub track: &'a TrackModel,
    pub ego: FrenetPose,
    pub predictions: &'a [PredictedTrajectory],
    pub cfg: &'a PlannerConfig,
}

/// Dense path in Frenet space used during trajectory reconstruction.
struct DensePath {
    /// Physical arc length per grid step.
    ds: f64,
    u: Vec<f64>,
    n: Vec<f64>,
    slope: Vec<f64>,
    kappa: Vec<f64>,
}

/// Dense path through the lattice node offsets: piecewise-linear chords
/// box-filtered over roughly one layer spacing, then resampled to uniform
/// physical arc length. The filtered chords realize the same transition
/// curvature the lattice feasibility model assumes (slope change Delta-n/ds
/// spread over one spacing), unlike interpolating splines which overshoot it.
fn dense_path_from_nodes(
    track: &TrackModel,
    s0: f64,
    u_nodes: &[f64],
    n_nodes: &[f64],
    start_slope: f64,
) -> DensePath {
    let count = u_nodes.len();
    debug_assert!(count >= 2);
    let du = 1.0;
    let total = u_nodes[count - 1];
    let steps = (total / du).ceil() as usize;

    // Raw chords on the centerline-progress grid.
    let mut n_lin = Vec::with_capacity(steps + 1);
    let mut seg = 0usize;
    for k in 0..=steps {
        let u = (k as f64 * du).min(total);
        while seg + 2 < count && u > u_nodes[seg + 1] {
            seg += 1;
        }
        let h = (u_nodes[seg + 1] - u_nodes[seg]).max(1e-9);
        let x = ((u - u_nodes[seg]) / h).clamp(0.0, 1.0);
        n_lin.push(n_nodes[seg] + x * (n_nodes[seg + 1] - n_nodes[seg]));
    }
    let _ = start_slope;

    // Box filter with half-width ~ half the median layer gap, shrinking near
    // the ends so the path still starts exactly at the ego state.
    let mut gaps: Vec<f64> = u_nodes.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_gap = gaps[gaps.len() / 2];
    let half_w = ((0.45 * median_gap / du).round() as usize).max(1);
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(n_lin.iter().scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        }))
        .collect();
    let n_grid: Vec<f64> = (0..=steps)
        .map(|k| {
            let h = half_w.min(k).min(steps - k);
            let lo = k - h;
            let hi = k + h;
            (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64
        })
        .collect();

    // Slopes and curvature by finite differences on the filtered grid.
    let diff = |values: &[f64], k: usize| -> f64 {
        if k == 0 {
            values[1] - values[0]
        } else if k == steps {
            values[steps] - values[steps - 1]
        } else {
            0.5 * (values[k + 1] - values[k - 1])
        }
    };
    let mut slope_grid = Vec::with_capacity(steps + 1);
    let mut curv_grid = Vec::with_capacity(steps + 1);
    let mut arc = Vec::with_capacity(steps + 1);
    let mut arc_acc = 0.0;
    for k in 0..=steps {
        let n = n_grid[k];
        let slope = diff(&n_grid, k) / du;
        let n2 = if k == 0 || k == steps {
            0.0
        } else {
            (n_grid[k + 1] - 2.0 * n_grid[k] + n_grid[k - 1]) / (du * du)
        };
        let u = (k as f64 * du).min(total);
        let s = track.wrap_station(s0 + u);
        let kc = track.curvature_at(s);
        let denom = (1.0 - n * kc).max(0.25);
        let kappa = kc / denom + n2 / (1.0 + slope * slope).powf(1.5);
        let g = (denom * denom + slope * slope).sqrt();
        if k > 0 {
            arc_acc += g * du;
        }
        slope_grid.push(slope);
        curv_grid.push(kappa);
        arc.push(arc_acc);
    }

    // Resample to uniform physical arc length.
    let ds = 1.0;
    let total_arc = *arc.last().unwrap();
    let m = (total_arc / ds).floor().max(1.0) as usize;
    let _ = s0;
    let mut out = DensePath {
        ds,
        u: Vec::with_capacity(m + 1),
        n: Vec::with_capacity(m + 1),
        slope: Vec::with_capacity(m + 1),
        kappa: Vec::with_capacity(m + 1),
    };
    let mut j = 0usize;
    for k in 0..=m {
        let sigma = k as f64 * ds;
        while j + 2 < arc.len() && arc[j + 1] < sigma {
            j += 1;
        }
        let span = (arc[j + 1] - arc[j]).max(1e-9);
        let w = ((sigma - arc[j]) / span).clamp(0.0, 1.0);
        let u_here = (j as f64 + w) * du;
        out.u.push(u_here.min(total));
        out.n.push(n_grid[j] + w * (n_grid[j + 1] - n_grid[j]));
        out.slope.push(slope_grid[j] + w * (slope_grid[j + 1] - slope_grid[j]));
        out.kappa.push(curv_grid[j] + w * (curv_grid[j + 1] - curv_grid[j]));
    }
    out
}

/// Profile the dense path and emit trajectory samples near the plan step.
fn trajectory_from_path(
    path: &DensePath,
    limits: &PointMassLimits,
    v_start: f64,
    v_caps: Option<&[f64]>,
    v_end_cap: f64,
    plan_dt: f64,
    a_max_label: f64,
) -> Vec<PlanSample> {
    let v = crate::planning::profile_with_caps(
        &path.kappa,
        path.ds,
        limits,
        v_start,
        v_end_cap,
        v_caps,
    );

    // Times along the profile.
    let n = v.len();
    let mut t = vec![0.0; n];
    let mut cut = n;
    for i in 0..n - 1 {
        let v_mean = 0.5 * (v[i] + v[i + 1]);
        if v_mean < 0.05 {
            cut = i + 1;
            break;
        }
        t[i + 1] = t[i] + path.ds / v_mean;
    }
    let n = cut;

    // Emit samples at (approximately) the plan step by snapping to grid
    // points; every stored row is self-consistent with the profile.
    let mut samples = Vec::new();
    let mut next_t = 0.0;
    for i in 0..n {
        if t[i] + 1e-9 >= next_t || i == n - 1 {
            // Terminal sample carries no further acceleration demand.
            let a_lon = if i + 1 < n {
                (v[i + 1] * v[i + 1] - v[i] * v[i]) / (2.0 * path.ds)
            } else {
                0.0
            };
            samples.push(PlanSample {
                t: t[i],
                s: 0.0, // filled by the caller (needs the track for wrapping)
                u: i as f64 * path.ds,
                n: path.n[i],
                slope: path.slope[i],
                v: v[i],
                kappa: path.kappa[i],
                a_lon,
                a_lat: v[i] * v[i] * path.kappa[i],
            });
            next_t = t[i] + plan_dt;
        }
    }
    let _ = a_max_label;
    samples
}

fn fill_wrapped_stations(track: &TrackModel, s0: f64, samples: &mut [PlanSample]) {
    for p in samples.iter_mut() {
        p.s = track.wrap_station(s0 + p.u);
    }
}

/// Post-reconstruction check of the final trajectory against every moving
/// prediction at twice the plan sampling density.
fn validate_against_predictions(
    track: &TrackModel,
    samples: &[PlanSample],
    predictions: &[PredictedTrajectory],
    cfg: &PlannerConfig,
) -> Result<(), PlanError> {
    let obstacles = ObstacleSet::new(predictions, track, cfg);
    for w in samples.windows(2) {
        if w[0].t > cfg.validation_horizon_s {
            break;
        }
        for half in 0..2 {
            let wgt = half as f64 * 0.5;
            let t = w[0].t + wgt * (w[1].t - w[0].t);
            let s = track.wrap_station(w[0].s + wgt * track.station_diff(w[0].s, w[1].s));
            let n = w[0].n + wgt * (w[1].n - w[0].n);
            if obstacles.point_blocked(track, s, n, t) {
                if std::env::var("RACESIM_PLAN_DEBUG").is_ok() {
                    eprintln!("[plan-debug] conflict t={t:.2} s={s:.1} n={n:.2}");
                    for p in samples.iter().step_by(8) {
                        eprintln!(
                            "[plan-debug]   t={:.2} u={:.1} s={:.1} n={:+.2} v={:.1} kappa={:+.5}",
                            p.t, p.u, p.s, p.n, p.v, p.kappa
                        );
                    }
                }
                return Err(PlanError::ValidationConflict { t, s, n });
            }
        }
    }
    Ok(())
}

fn classify_homotopy(
    track: &TrackModel,
    ego: &FrenetPose,
    samples: &[PlanSample],
    predictions: &[PredictedTrajectory],
    horizon_m: f64,
) -> Homotopy {
    // Nearest opponent ahead within the planning horizon.
    let mut nearest: Option<(f64, &PredictedTrajectory)> = None;
    for pred in predictions {
        let Some(first) = pred.samples.first() else { continue };
        let gap = track.station_diff(ego.s, first.s);
        if gap < -10.0 || gap > horizon_m {
            continue;
        }
        if nearest.map(|(g, _)| gap < g).unwrap_or(true) {
            nearest = Some((gap, pred));
        }
    }
    let Some((_, pred)) = nearest else {
        return Homotopy::ClearTrack;
    };
    // Ego arrival at the opponent: first plan sample beyond the opponent's
    // concurrent station.
    for p in samples {
        let (s_o, n_o, _) = pred.state_at(p.t, track);
        if track.station_diff(s_o, p.s) >= 0.0 {
            let dn = p.n - n_o;
            return if dn > 0.3 {
                Homotopy::PassLeft
            } else if dn < -0.3 {
                Homotopy::PassRight
            } else {
                Homotopy::Follow
            };
        }
    }
    Homotopy::Follow
}

/// Build, search and reconstruct a plan; on infeasibility fall back to
/// braking along the previous plan's spatial path.
///
/// Plan continuation: the new plan re-anchors laterally to the previous
/// reference while the vehicle is within one lattice cell of it, so the
/// tracking controller keeps seeing the true lateral error instead of a
/// reference that chases the drift.
pub fn replan(input: &PlanInput, previous: Option<&PlannedTrajectory>) -> PlannedTrajectory {
    let cfg = input.cfg;
    let track = input.track;
    let mut ego = input.ego;
    // Project the ego forward by the known computation delay.
    ego.s = track.wrap_station(ego.s + ego.v * cfg.compute_delay_s);

    if let Some(prev) = previous {
        if !prev.samples.is_empty() {
            let u = track.station_diff(prev.samples[0].s, ego.s) + prev.samples[0].u;
            if u >= 0.0 && u <= prev.end_progress() {
                let reference = prev.reference_at_progress(u);
                if (ego.n - reference.n).abs() <= 1.0 {
                    ego.n = reference.n;
                    ego.mu = reference.slope.atan();
                }
            }
        }
    }

    match plan_once(track, &ego, input.predictions, cfg) {
        Ok(plan) => plan,
        Err(_) => fallback_brake(track, &ego, previous, cfg),
    }
}

/// One planning attempt without the fallback wrapper: build the lattice,
/// search it and reconstruct the dense trajectory.
pub fn plan_once(
    track: &TrackModel,
    ego: &FrenetPose,
    predictions: &[PredictedTrajectory],
    cfg: &PlannerConfig,
) -> Result<PlannedTrajectory, PlanError> {
    let (graph, _) = build_lattice(track, ego, cfg.horizon_m, predictions, cfg)?;
    let result = search_optimal(&graph, track, predictions, cfg)?;

    // Node chain in progress coordinates.
    let mut u_nodes = vec![0.0];
    let mut n_nodes = vec![ego.n];
    let mut v_nodes = vec![ego.v];
    let mut prev_s = ego.s;
    let mut u = 0.0;
    for &idx in &result.chain {
        let node = graph.nodes[idx as usize];
        u += track.station_diff(prev_s, node.s);
        prev_s = node.s;
        u_nodes.push(u);
        n_nodes.push(node.n);
        v_nodes.push(node.v);
    }

    let start_slope = ego.mu.tan();
    let path = dense_path_from_nodes(track, ego.s, &u_nodes, &n_nodes, start_slope);
    // Cap the dense profile near the DP's chosen speeds so plan timing stays
    // close to the searched times.
    let caps: Vec<f64> = path
        .u
        .iter()
        .map(|&uu| {
            let idx = u_nodes.partition_point(|&x| x <= uu).saturating_sub(1).min(u_nodes.len() - 2);
            let w = ((uu - u_nodes[idx]) / (u_nodes[idx + 1] - u_nodes[idx])).clamp(0.0, 1.0);
            let v = v_nodes[idx] + w * (v_nodes[idx + 1] - v_nodes[idx]);
            v + 0.05 * cfg.dv_mps
        })
        .collect();
    let mut samples = trajectory_from_path(
        &path,
        &cfg.limits,
        ego.v,
        Some(&caps),
        *v_nodes.last().unwrap() + 0.05 * cfg.dv_mps,
        cfg.plan_dt_s,
        cfg.limits.a_max,
    );
    fill_wrapped_stations(track, ego.s, &mut samples);
    validate_against_predictions(track, &samples, predictions, cfg)?;

    let homotopy = classify_homotopy(track, ego, &samples, predictions, cfg.horizon_m);
    let total_time = samples.last().map(|p| p.t).unwrap_or(0.0);
    Ok(PlannedTrajectory {
        samples,
        total_time,
        homotopy,
        status: PlanStatus::Optimal,
        cost: result.cost,
        a_max: cfg.limits.a_max,
    })
}

/// Straight hold-the-lane path used when no previous plan is available.
fn hold_lane_path(track: &TrackModel, ego: &FrenetPose, reach: f64) -> DensePath {
    let count = (reach.floor() as usize).max(2);
    let mut path = DensePath {
        ds: 1.0,
        u: Vec::with_capacity(count),
        n: Vec::with_capacity(count),
        slope: Vec::with_capacity(count),
        kappa: Vec::with_capacity(count),
    };
    for k in 0..count {
        let s = track.wrap_station(ego.s + k as f64);
        let kc = track.curvature_at(s);
        path.u.push(k as f64);
        path.n.push(ego.n);
        path.slope.push(0.0);
        path.kappa.push(kc / (1.0 - ego.n * kc).max(0.25));
    }
    path
}

/// Emergency fallback: keep the previous spatial path (or hold the lane) and
/// re-profile it to a full stop at the emergency braking authority.
fn fallback_brake(
    track: &TrackModel,
    ego: &FrenetPose,
    previous: Option<&PlannedTrajectory>,
    cfg: &PlannerConfig,
) -> PlannedTrajectory {
    let brake_limits = PointMassLimits {
        a_max: cfg.a_brake_emergency_mps2.max(cfg.limits.a_max),
        a_lon_drive_max: 0.01, // no traction use in the fallback
        ..cfg.limits
    };
    let reach = crate::dynamics::braking_distance(ego.v.max(1.0), cfg.a_brake_emergency_mps2) * 1.5
        + 4.0 * cfg.ds_m;

    // Spatial path: the previous plan's geometry carried over verbatim (no
    // re-smoothing, so repeated fallbacks cannot degrade the path), else the
    // current lateral offset held.
    let path = match previous {
        Some(prev) if prev.samples.len() >= 2 => {
            let u_ego = track.station_diff(prev.samples[0].s, ego.s) + prev.samples[0].u;
            let end = prev.end_progress();
            if u_ego >= 0.0 && u_ego < end - 2.0 {
                let count = ((end - u_ego).min(reach).floor() as usize).max(2);
                let mut path = DensePath {
                    ds: 1.0,
                    u: Vec::with_capacity(count),
                    n: Vec::with_capacity(count),
                    slope: Vec::with_capacity(count),
                    kappa: Vec::with_capacity(count),
                };
                for k in 0..count {
                    let reference = prev.reference_at_progress(u_ego + k as f64);
                    path.u.push(k as f64);
                    path.n.push(reference.n);
                    path.slope.push(reference.slope);
                    path.kappa.push(reference.kappa);
                }
                path
            } else {
                hold_lane_path(track, ego, reach)
            }
        }
        _ => hold_lane_path(track, ego, reach),
    };

    let mut samples =
        trajectory_from_path(&path, &brake_limits, ego.v, None, 0.0, cfg.plan_dt_s, brake_limits.a_max);
    fill_wrapped_stations(track, ego.s, &mut samples);
    let total_time = samples.last().map(|p| p.t).unwrap_or(0.0);
    PlannedTrajectory {
        samples,
        total_time,
        homotopy: Homotopy::Follow,
        status: PlanStatus::FallbackBrake,
        cost: f64::INFINITY,
        a_max: brake_limits.a_max,
    }
}
