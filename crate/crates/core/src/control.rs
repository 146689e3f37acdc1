//! Trajectory tracking with a two-degree-of-freedom structure: model-based
//! feedforward from the plan plus finite-horizon LQ feedback on the Frenet
//! error states, gain-scheduled over speed. Robustness against model error
//! is realized as fixed constraint tightening of the actuator limits.

use crate::dynamics::{VehicleParams, VehicleState, GRAVITY};
use crate::planning::{PlanSample, PlannedTrajectory};
use crate::track::{FrenetPose, TrackModel};
use serde::{Deserialize, Serialize};

/// Controller parameters; part of the scenario configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub q_n: f64,
    pub q_mu: f64,
    pub r_delta: f64,
    /// Exponent of the speed-dependent steering-effort growth:
    /// R(v) = r_delta * (1 + (v / 30)^r_speed_pow). Higher speed lowers the
    /// feedback bandwidth, respecting the slower yaw response.
    pub r_speed_pow: f64,
    /// Longitudinal speed-error gain (1/s).
    pub k_v: f64,
    /// Actuator-limit tightening fraction (robustness margin).
    pub margin: f64,
    pub speed_grid_min_mps: f64,
    pub speed_grid_max_mps: f64,
    pub speed_grid_step_mps: f64,
    /// Discretization step of the Riccati recursion (the control period).
    pub dt_s: f64,
    /// Longitudinal preview: speed/acceleration references are read this far
    /// ahead (in seconds of travel) to compensate the drivetrain lag.
    pub preview_lon_s: f64,
    /// Steering-feedforward preview compensating the steering actuator lag.
    pub preview_lat_s: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            q_n: 0.02,
            q_mu: 2.0,
            r_delta: 100.0,
            r_speed_pow: 2.0,
            k_v: 1.2,
            margin: 0.1,
            speed_grid_min_mps: 5.0,
            speed_grid_max_mps: 85.0,
            speed_grid_step_mps: 10.0,
            dt_s: 0.01,
            preview_lon_s: 0.3,
            preview_lat_s: 0.3,
        }
    }
}

/// Command emitted by the tracking controller.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControlCommand {
    pub delta_cmd: f64,
    pub ax_cmd: f64,
    pub timestamp: f64,
}

impl Default for ControlCommand {
    fn default() -> Self {
        ControlCommand { delta_cmd: 0.0, ax_cmd: 0.0, timestamp: 0.0 }
    }
}

/// Frenet tracking errors relative to the matched plan sample.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct TrackingError {
    pub e_n: f64,
    pub e_mu: f64,
    pub e_v: f64,
}

/// Speed-scheduled lateral feedback gains from an offline Riccati recursion
/// on the linear Frenet error model, linearly interpolated over the grid.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    speeds: Vec<f64>,
    gains: Vec<[f64; 2]>,
}

impl GainSchedule {
    pub fn compute(params: &VehicleParams, cfg: &ControlConfig) -> GainSchedule {
        let mut speeds = Vec::new();
        let mut v = cfg.speed_grid_min_mps;
        while v <= cfg.speed_grid_max_mps + 1e-9 {
            speeds.push(v);
            v += cfg.speed_grid_step_mps;
        }
        let gains = speeds
            .iter()
            .map(|&v| lqr_gain(v, params.wheelbase(), cfg))
            .collect();
        GainSchedule { speeds, gains }
    }

    /// Piecewise-linear, continuous interpolation; clamped at the grid ends.
    pub fn gain_at(&self, v: f64) -> [f64; 2] {
        let n = self.speeds.len();
        if v <= self.speeds[0] {
            return self.gains[0];
        }
        if v >= self.speeds[n - 1] {
            return self.gains[n - 1];
        }
        let idx = self.speeds.partition_point(|&s| s <= v).saturating_sub(1).min(n - 2);
        let w = (v - self.speeds[idx]) / (self.speeds[idx + 1] - self.speeds[idx]);
        [
            self.gains[idx][0] + w * (self.gains[idx + 1][0] - self.gains[idx][0]),
            self.gains[idx][1] + w * (self.gains[idx + 1][1] - self.gains[idx][1]),
        ]
    }
}

/// Discrete LQ gain for the speed-scheduled lateral error model
///   e_n'  = v * e_mu
///   e_mu' = (v / L) * delta
/// discretized exactly (the A matrix is nilpotent).
fn lqr_gain(v: f64, wheelbase: f64, cfg: &ControlConfig) -> [f64; 2] {
    let dt = cfg.dt_s;
    let g = v / wheelbase;
    let a = [[1.0, v * dt], [0.0, 1.0]];
    let b = [0.5 * v * g * dt * dt, g * dt];
    let q = [[cfg.q_n, 0.0], [0.0, cfg.q_mu]];
    let r = cfg.r_delta * (1.0 + (v / 30.0).powf(cfg.r_speed_pow));

    // Riccati iteration to the stationary solution.
    let mut p = q;
    for _ in 0..20_000 {
        // s = R + B' P B
        let pb = [p[0][0] * b[0] + p[0][1] * b[1], p[1][0] * b[0] + p[1][1] * b[1]];
        let s = r + b[0] * pb[0] + b[1] * pb[1];
        // K = s^-1 B' P A
        let bpa = [
            b[0] * (p[0][0] * a[0][0] + p[0][1] * a[1][0]) + b[1] * (p[1][0] * a[0][0] + p[1][1] * a[1][0]),
            b[0] * (p[0][0] * a[0][1] + p[0][1] * a[1][1]) + b[1] * (p[1][0] * a[0][1] + p[1][1] * a[1][1]),
        ];
        let k = [bpa[0] / s, bpa[1] / s];
        // P_next = Q + A' P (A - B K)
        let abk = [
            [a[0][0] - b[0] * k[0], a[0][1] - b[0] * k[1]],
            [a[1][0] - b[1] * k[0], a[1][1] - b[1] * k[1]],
        ];
        let pa = [
            [p[0][0] * abk[0][0] + p[0][1] * abk[1][0], p[0][0] * abk[0][1] + p[0][1] * abk[1][1]],
            [p[1][0] * abk[0][0] + p[1][1] * abk[1][0], p[1][0] * abk[0][1] + p[1][1] * abk[1][1]],
        ];
        let next = [
            [q[0][0] + a[0][0] * pa[0][0] + a[1][0] * pa[1][0], q[0][1] + a[0][0] * pa[0][1] + a[1][0] * pa[1][1]],
            [q[1][0] + a[0][1] * pa[0][0] + a[1][1] * pa[1][0], q[1][1] + a[0][1] * pa[0][1] + a[1][1] * pa[1][1]],
        ];
        let diff = (next[0][0] - p[0][0]).abs()
            + (next[0][1] - p[0][1]).abs()
            + (next[1][0] - p[1][0]).abs()
            + (next[1][1] - p[1][1]).abs();
        p = next;
        if diff < 1e-12 {
            break;
        }
    }
    let pb = [p[0][0] * b[0] + p[0][1] * b[1], p[1][0] * b[0] + p[1][1] * b[1]];
    let s = r + b[0] * pb[0] + b[1] * pb[1];
    let bpa = [
        b[0] * (p[0][0] * a[0][0] + p[0][1] * a[1][0]) + b[1] * (p[1][0] * a[0][0] + p[1][1] * a[1][0]),
        b[0] * (p[0][0] * a[0][1] + p[0][1] * a[1][1]) + b[1] * (p[1][0] * a[0][1] + p[1][1] * a[1][1]),
    ];
    [bpa[0] / s, bpa[1] / s]
}

/// Steering and acceleration feedforward from a plan sample:
/// delta from the path curvature plus an understeer-gradient correction,
/// acceleration straight from the plan.
pub fn compute_feedforward(sample: &PlanSample, params: &VehicleParams, k_us: f64) -> (f64, f64) {
    let a_lat = sample.v * sample.v * sample.kappa;
    let delta_ff = (params.wheelbase() * sample.kappa).atan() + k_us * a_lat;
    (delta_ff, sample.a_lon)
}

/// Steady-state steering equilibria of the plant over a (speed, lateral
/// acceleration) grid, solved offline by Newton iteration on the dual-track
/// equations. Two planes at different drive levels capture the extra
/// understeer from rear-drive force consuming tire capacity. This replaces
/// the constant-gradient correction, which misses the nonlinearity near the
/// handling limit entirely.
#[derive(Debug, Clone)]
pub struct SteeringMap {
    speeds: Vec<f64>,
    a_lat_step: f64,
    drive_ref: f64,
    /// Plane at drag-hold drive: rows[i][j] = steering at speeds[i],
    /// a_lat = j * a_lat_step.
    coast: Vec<Vec<f64>>,
    /// Plane at drag-hold + drive_ref wheel acceleration.
    driven: Vec<Vec<f64>>,
}

static MAP_CACHE: std::sync::OnceLock<std::sync::Mutex<std::collections::HashMap<u64, std::sync::Arc<SteeringMap>>>> =
    std::sync::OnceLock::new();

impl SteeringMap {
    /// Cached computation: vehicles are shared across many agents and trials.
    pub fn shared(params: &VehicleParams) -> std::sync::Arc<SteeringMap> {
        let key = {
            use std::hash::{Hash, Hasher};
            let mut h = std::collections::hash_map::DefaultHasher::new();
            serde_json::to_string(params).expect("params serialize").hash(&mut h);
            h.finish()
        };
        let cache = MAP_CACHE.get_or_init(Default::default);
        if let Some(map) = cache.lock().unwrap().get(&key) {
            return std::sync::Arc::clone(map);
        }
        let map = std::sync::Arc::new(SteeringMap::compute(params));
        cache.lock().unwrap().insert(key, std::sync::Arc::clone(&map));
        map
    }

    pub fn compute(params: &VehicleParams) -> SteeringMap {
        let speeds: Vec<f64> = (1..=17).map(|i| i as f64 * 5.0).collect();
        let a_lat_step = 1.0;
        let cells = 16usize;
        let drive_ref = 5.0;
        let plane = |extra_drive: f64| -> Vec<Vec<f64>> {
            speeds
                .iter()
                .map(|&v| {
                    let mut row = Vec::with_capacity(cells + 1);
                    let mut gradient = 0.0;
                    let mut prev: Option<f64> = None;
                    let mut warm = (0.0, 0.0);
                    for j in 0..=cells {
                        let a_lat = j as f64 * a_lat_step;
                        match solve_steady_steering(params, v, a_lat, extra_drive, warm) {
                            Some((delta, vy)) => {
                                if let Some(p) = prev {
                                    gradient = delta - p;
                                }
                                prev = Some(delta);
                                warm = (vy, delta);
                                row.push(delta);
                            }
                            None => {
                                // Beyond the stable envelope: extend with the
                                // last gradient so lookups stay finite.
                                let base = prev.unwrap_or(0.0) + gradient;
                                prev = Some(base);
                                row.push(base);
                            }
                        }
                    }
                    row
                })
                .collect()
        };
        SteeringMap {
            coast: plane(0.0),
            driven: plane(drive_ref),
            speeds,
            a_lat_step,
            drive_ref,
        }
    }

    fn plane_lookup(&self, rows: &[Vec<f64>], v: f64, mag: f64) -> f64 {
        let n = self.speeds.len();
        let (i, wv) = if v <= self.speeds[0] {
            (0, 0.0)
        } else if v >= self.speeds[n - 1] {
            (n - 2, 1.0)
        } else {
            let i = self.speeds.partition_point(|&s| s <= v).saturating_sub(1).min(n - 2);
            (i, (v - self.speeds[i]) / (self.speeds[i + 1] - self.speeds[i]))
        };
        let row_lookup = |row: &Vec<f64>| -> f64 {
            let idx = mag / self.a_lat_step;
            let j = (idx.floor() as usize).min(row.len() - 2);
            let wa = (idx - j as f64).clamp(0.0, 1.0);
            row[j] + wa * (row[j + 1] - row[j])
        };
        let lo = row_lookup(&rows[i]);
        let hi = row_lookup(&rows[i + 1]);
        lo + wv * (hi - lo)
    }

    /// Equilibrium steering at speed, lateral acceleration and wheel drive
    /// demand beyond the drag hold. Odd in the lateral acceleration.
    pub fn delta_at(&self, v: f64, a_lat: f64, extra_drive: f64) -> f64 {
        let sign = if a_lat < 0.0 { -1.0 } else { 1.0 };
        let mag = a_lat.abs();
        let coast = self.plane_lookup(&self.coast, v, mag);
        let driven = self.plane_lookup(&self.driven, v, mag);
        let w = (extra_drive / self.drive_ref).clamp(0.0, 1.3);
        sign * (coast + w * (driven - coast))
    }
}

/// Newton solve of the cornering equilibrium: find (vy, delta) with zero
/// lateral and yaw acceleration at yaw rate r = a_lat / vx while the drive
/// command holds speed plus `extra_drive`. Returns None when no stable
/// equilibrium exists.
fn solve_steady_steering(
    params: &VehicleParams,
    vx: f64,
    a_lat: f64,
    extra_drive: f64,
    warm: (f64, f64),
) -> Option<(f64, f64)> {
    use crate::dynamics::{dual_track_derivative, Controls, DisturbanceSample, VehicleState};
    let r = a_lat / vx;
    let ax_hold = resistance_compensation(vx, params) + extra_drive;
    let residual = |vy: f64, delta: f64| -> (f64, f64) {
        let state = VehicleState {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
            vx,
            vy,
            r,
            delta,
            ax_cmd_filtered: ax_hold,
        };
        let controls = Controls { delta_cmd: delta, ax_cmd: ax_hold };
        let d = dual_track_derivative(&state, &controls, params, &DisturbanceSample::default());
        (d.vy, d.r)
    };
    let (mut vy, mut delta) = if warm == (0.0, 0.0) {
        (
            -a_lat / vx * params.lr * 0.05,
            (params.wheelbase() * a_lat / (vx * vx)).atan(),
        )
    } else {
        warm
    };
    for _ in 0..40 {
        let (f1, f2) = residual(vy, delta);
        if f1.abs() < 1e-9 && f2.abs() < 1e-9 {
            break;
        }
        let h = 1e-6;
        let (f1_vy, f2_vy) = residual(vy + h, delta);
        let (f1_d, f2_d) = residual(vy, delta + h);
        let j11 = (f1_vy - f1) / h;
        let j12 = (f1_d - f1) / h;
        let j21 = (f2_vy - f2) / h;
        let j22 = (f2_d - f2) / h;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-12 {
            return None;
        }
        let dvy = (-f1 * j22 + f2 * j12) / det;
        let dd = (-f2 * j11 + f1 * j21) / det;
        vy += dvy.clamp(-1.0, 1.0);
        delta += dd.clamp(-0.03, 0.03);
        if !vy.is_finite() || !delta.is_finite() || delta.abs() > params.delta_max {
            return None;
        }
    }
    let (f1, f2) = residual(vy, delta);
    if f1.abs() < 1e-5 && f2.abs() < 1e-5 && delta.is_finite() {
        Some((delta, vy))
    } else {
        None
    }
}

/// Drive-force compensation for aero drag and rolling resistance at the
/// reference speed; added as a longitudinal feedforward term.
pub fn resistance_compensation(v: f64, params: &VehicleParams) -> f64 {
    (params.drag_coeff * v * v + params.rolling_coeff * params.mass * GRAVITY * (v / 0.2).tanh())
        / params.mass
}

/// LQ feedback on the Frenet errors. Zero error maps to exactly zero output.
pub fn compute_feedback(error: &TrackingError, v: f64, schedule: &GainSchedule, k_v: f64) -> (f64, f64) {
    let k = schedule.gain_at(v);
    let delta_fb = -(k[0] * error.e_n + k[1] * error.e_mu);
    let ax_fb = -k_v * error.e_v;
    (delta_fb, ax_fb)
}

/// Per-agent tracking controller state.
#[derive(Debug, Clone)]
pub struct TrackingController {
    schedule: GainSchedule,
    steering_map: std::sync::Arc<SteeringMap>,
    cfg: ControlConfig,
    last_cmd: ControlCommand,
    expiry_ramp_start: Option<(f64, f64)>,
}

impl TrackingController {
    pub fn new(params: &VehicleParams, cfg: ControlConfig) -> Self {
        TrackingController {
            schedule: GainSchedule::compute(params, &cfg),
            steering_map: SteeringMap::shared(params),
            cfg,
            last_cmd: ControlCommand::default(),
            expiry_ramp_start: None,
        }
    }

    pub fn steering_map(&self) -> &SteeringMap {
        &self.steering_map
    }

    pub fn schedule(&self) -> &GainSchedule {
        &self.schedule
    }

    /// One control step: match the plan by station projection, compute
    /// errors, combine feedforward and feedback, saturate to the tightened
    /// actuator limits.
    pub fn track_step(
        &mut self,
        state: &VehicleState,
        ego: &FrenetPose,
        plan: Option<&PlannedTrajectory>,
        track: &TrackModel,
        t: f64,
        params: &VehicleParams,
    ) -> ControlCommand {
        let tight = 1.0 - self.cfg.margin;
        let delta_limit = params.delta_max * tight;
        let ax_min = -params.a_brake_max * tight;
        let ax_max = params.a_drive_max * tight;

        let plan = match plan {
            Some(p) if p.samples.len() >= 2 => p,
            _ => return self.expired_command(t, delta_limit, ax_min),
        };
        // Progress of the ego station within the plan.
        let u_ego = track.station_diff(plan.samples[0].s, ego.s) + plan.samples[0].u;
        if u_ego > plan.end_progress() - 1.0 || u_ego < -2.0 * track.spacing() - 30.0 {
            return self.expired_command(t, delta_limit, ax_min);
        }
        self.expiry_ramp_start = None;

        let u_here = u_ego.max(0.0);
        let reference = plan.reference_at_progress(u_here);
        // Preview references compensate the actuator lags: curvature for the
        // steering feedforward, speed/acceleration for the drivetrain.
        let ref_lat = plan.reference_at_progress(u_here + ego.v * self.cfg.preview_lat_s);
        let ref_lon = plan.reference_at_progress(u_here + ego.v * self.cfg.preview_lon_s);
        let error = TrackingError {
            e_n: ego.n - reference.n,
            e_mu: crate::geom::wrap_angle(ego.mu - reference.slope.atan()),
            e_v: ego.v - ref_lon.v,
        };
        // Steering feedforward from the plant's steady-state inverse map
        // (path curvature -> equilibrium steering at this speed).
        let a_lat_ref = ref_lat.v * ref_lat.v * ref_lat.kappa;
        let delta_ff =
            self.steering_map.delta_at(ref_lat.v, a_lat_ref, ref_lon.a_lon.max(0.0));
        let ax_ff = ref_lon.a_lon;
        let ax_comp = resistance_compensation(ref_lon.v, params);
        let v_sched = state.vx.max(1.0);
        let (delta_fb, ax_fb) = compute_feedback(&error, v_sched, &self.schedule, self.cfg.k_v);

        // Friction-circle-aware longitudinal saturation: lateral demand
        // consumes tire budget before drive may use it. The lateral term is
        // capped below the full budget so drag-hold drive survives in
        // cap-riding corners, and a braking floor always remains.
        let budget = plan.a_max;
        let a_lat_used = a_lat_ref
            .abs()
            .max((state.vx * state.r).abs().min(0.98 * budget))
            .min(0.92 * budget);
        let a_lon_avail = (budget * budget - a_lat_used * a_lat_used).max(0.0).sqrt();
        let ax_hi = ax_max.min(a_lon_avail);
        let ax_lo = ax_min.max(-a_lon_avail.max(3.0));

        let cmd = ControlCommand {
            delta_cmd: (delta_ff + delta_fb).clamp(-delta_limit, delta_limit),
            ax_cmd: (ax_ff + ax_comp + ax_fb).clamp(ax_lo, ax_hi),
            timestamp: t,
        };
        self.last_cmd = cmd;
        cmd
    }

    /// Plan expired: hold the last steering, ramp the acceleration command
    /// down to the tightened braking limit within half a second.
    fn expired_command(&mut self, t: f64, delta_limit: f64, ax_min: f64) -> ControlCommand {
        let (t0, ax0) = *self.expiry_ramp_start.get_or_insert((t, self.last_cmd.ax_cmd));
        let rate = (ax0 - ax_min).max(0.0) / 0.5;
        let ax = (ax0 - rate * (t - t0)).max(ax_min);
        let cmd = ControlCommand {
            delta_cmd: self.last_cmd.delta_cmd.clamp(-delta_limit, delta_limit),
            ax_cmd: ax,
            timestamp: t,
        };
        self.last_cmd = cmd;
        cmd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PointMassLimits;
    use crate::planning::{Homotopy, PlanStatus};
    use approx::assert_abs_diff_eq;

    fn sample(v: f64, kappa: f64, a_lon: f64) -> PlanSample {
        PlanSample { t: 0.0, s: 0.0, u: 0.0, n: 0.0, slope: 0.0, v, kappa, a_lon, a_lat: v * v * kappa }
    }

    fn flat_plan(n: f64, v: f64, length: f64) -> PlannedTrajectory {
        let count = (length as usize) / 2;
        let samples = (0..=count)
            .map(|i| {
                let u = i as f64 * 2.0;
                PlanSample {
                    t: u / v,
                    s: u,
                    u,
                    n,
                    slope: 0.0,
                    v,
                    kappa: 0.0,
                    a_lon: 0.0,
                    a_lat: 0.0,
                }
            })
            .collect();
        PlannedTrajectory {
            samples,
            total_time: length / v,
            homotopy: Homotopy::ClearTrack,
            status: PlanStatus::Optimal,
            cost: 0.0,
            a_max: 14.0,
        }
    }

    #[test]
    fn feedforward_trivial_values() {
        let params = VehicleParams { lf: 1.5, lr: 1.5, ..VehicleParams::default() };
        let (d, a) = compute_feedforward(&sample(30.0, 0.0, 0.0), &params, 0.0);
        assert_eq!(d, 0.0);
        assert_eq!(a, 0.0);
        let (d, _) = compute_feedforward(&sample(30.0, 0.01, 0.0), &params, 0.0);
        assert_abs_diff_eq!(d, 0.02999, epsilon = 1e-5);
        let (_, a) = compute_feedforward(&sample(60.0, 0.0, -14.0), &params, 0.0);
        assert_eq!(a, -14.0);
    }

    #[test]
    fn zero_error_gives_exactly_zero_feedback() {
        let params = VehicleParams::default();
        let schedule = GainSchedule::compute(&params, &ControlConfig::default());
        let (d, a) = compute_feedback(&TrackingError::default(), 50.0, &schedule, 1.5);
        assert_eq!(d, 0.0);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn speed_error_feedback_is_linear() {
        let params = VehicleParams::default();
        let cfg = ControlConfig::default();
        let schedule = GainSchedule::compute(&params, &cfg);
        let err = TrackingError { e_n: 0.0, e_mu: 0.0, e_v: -5.0 };
        let (_, ax) = compute_feedback(&err, 40.0, &schedule, cfg.k_v);
        assert_abs_diff_eq!(ax, 5.0 * cfg.k_v, epsilon = 1e-12);
        // Saturation to the tightened drive limit happens at the step level.
        let tightened = params.a_drive_max * (1.0 - cfg.margin);
        assert_eq!(ax.clamp(-1.0, tightened), tightened.min(ax));
    }

    #[test]
    fn lateral_step_response_on_linear_model() {
        // Closed-loop simulation oracle on the linear error model: from a
        // 1 m lateral error at 50 m/s, |e_n| < 0.1 m within 3 s and no
        // overshoot beyond 20%.
        let params = VehicleParams::default();
        let cfg = ControlConfig::default();
        let schedule = GainSchedule::compute(&params, &cfg);
        let v = 50.0;
        let l = params.wheelbase();
        let dt = cfg.dt_s;
        let mut e_n: f64 = 1.0;
        let mut e_mu: f64 = 0.0;
        let mut min_e: f64 = 1.0;
        let mut settled = f64::INFINITY;
        for i in 0..(5.0 / dt) as usize {
            let k = schedule.gain_at(v);
            let delta = -(k[0] * e_n + k[1] * e_mu);
            // A-matrix exact discretization of the nilpotent chain.
            let e_n_next = e_n + v * e_mu * dt + 0.5 * v * (v / l) * delta * dt * dt;
            let e_mu_next = e_mu + (v / l) * delta * dt;
            e_n = e_n_next;
            e_mu = e_mu_next;
            min_e = min_e.min(e_n);
            let t = (i + 1) as f64 * dt;
            if e_n.abs() < 0.1 && settled.is_infinite() {
                settled = t;
            }
            if e_n.abs() >= 0.1 {
                settled = f64::INFINITY;
            }
        }
        assert!(settled <= 3.0, "settled only at {settled:.2} s");
        assert!(min_e > -0.2, "overshoot {:.3} beyond 20%", -min_e);
    }

    #[test]
    fn on_plan_state_yields_pure_feedforward() {
        let params = VehicleParams::default();
        let cfg = ControlConfig::default();
        let mut ctl = TrackingController::new(&params, cfg.clone());
        let plan = flat_plan(1.5, 40.0, 400.0);
        let track = crate::planning::tests::straight_track(800.0);
        let state = VehicleState {
            x: 50.0,
            y: 1.5,
            psi: 0.0,
            vx: 40.0,
            vy: 0.0,
            r: 0.0,
            delta: 0.0,
            ax_cmd_filtered: 0.0,
        };
        let ego = FrenetPose { s: 50.0, n: 1.5, mu: 0.0, v: 40.0 };
        let cmd = ctl.track_step(&state, &ego, Some(&plan), &track, 1.0, &params);
        let reference = plan.reference_at_progress(50.0);
        let (d_ff, a_ff) = compute_feedforward(&reference, &params, params.understeer_gradient());
        let a_comp = resistance_compensation(reference.v, &params);
        assert_abs_diff_eq!(cmd.delta_cmd, d_ff, epsilon = 1e-12);
        assert_abs_diff_eq!(cmd.ax_cmd, a_ff + a_comp, epsilon = 1e-12);
    }

    #[test]
    fn expired_plan_ramps_to_tightened_braking() {
        let params = VehicleParams::default();
        let cfg = ControlConfig::default();
        let mut ctl = TrackingController::new(&params, cfg);
        let track = crate::planning::tests::straight_track(800.0);
        let state = VehicleState {
            x: 50.0,
            y: 0.0,
            psi: 0.0,
            vx: 40.0,
            vy: 0.0,
            r: 0.0,
            delta: 0.0,
            ax_cmd_filtered: 0.0,
        };
        let ego = FrenetPose { s: 50.0, n: 0.0, mu: 0.0, v: 40.0 };
        let mut last = ControlCommand::default();
        for k in 0..=55 {
            let t = k as f64 * 0.01;
            last = ctl.track_step(&state, &ego, None, &track, t, &params);
        }
        assert_abs_diff_eq!(last.ax_cmd, -params.a_brake_max * 0.9, epsilon = 1e-9);
        // Reached within 0.5 s.
        let mut ctl2 = TrackingController::new(&params, ControlConfig::default());
        let at_half = (0..=50)
            .map(|k| ctl2.track_step(&state, &ego, None, &track, k as f64 * 0.01, &params))
            .last()
            .unwrap();
        assert_abs_diff_eq!(at_half.ax_cmd, -params.a_brake_max * 0.9, epsilon = 1e-9);
    }

    #[test]
    fn commands_always_within_tightened_limits() {
        let params = VehicleParams::default();
        let cfg = ControlConfig::default();
        let mut ctl = TrackingController::new(&params, cfg.clone());
        let plan = flat_plan(0.0, 60.0, 400.0);
        let track = crate::planning::tests::straight_track(800.0);
        for i in 0..200 {
            let e = (i as f64 - 100.0) / 10.0;
            let state = VehicleState {
                x: 100.0,
                y: e,
                psi: 0.2 * e.signum(),
                vx: 60.0 + e,
                vy: 0.0,
                r: 0.0,
                delta: 0.0,
                ax_cmd_filtered: 0.0,
            };
            let ego = FrenetPose { s: 100.0, n: e, mu: 0.2 * e.signum(), v: 60.0 + e };
            let cmd = ctl.track_step(&state, &ego, Some(&plan), &track, i as f64 * 0.01, &params);
            assert!(cmd.delta_cmd.abs() <= params.delta_max * 0.9 + 1e-12);
            assert!(cmd.ax_cmd <= params.a_drive_max * 0.9 + 1e-12);
            assert!(cmd.ax_cmd >= -params.a_brake_max * 0.9 - 1e-12);
        }
    }

    #[test]
    fn mirrored_errors_give_mirrored_commands() {
        let params = VehicleParams::default();
        let cfg = ControlConfig::default();
        let schedule = GainSchedule::compute(&params, &cfg);
        for v in [10.0, 30.0, 55.0, 80.0] {
            for (e_n, e_mu) in [(0.5, 0.02), (-1.2, 0.1), (2.0, -0.05)] {
                let (d1, _) = compute_feedback(&TrackingError { e_n, e_mu, e_v: 0.0 }, v, &schedule, cfg.k_v);
                let (d2, _) = compute_feedback(
                    &TrackingError { e_n: -e_n, e_mu: -e_mu, e_v: 0.0 },
                    v,
                    &schedule,
                    cfg.k_v,
                );
                assert_abs_diff_eq!(d1, -d2, epsilon = 1e-9);
            }
        }
        // Mirrored plan curvature mirrors the feedforward steering.
        let (d_pos, _) = compute_feedforward(&sample(40.0, 0.004, 1.0), &params, params.understeer_gradient());
        let (d_neg, _) = compute_feedforward(&sample(40.0, -0.004, 1.0), &params, params.understeer_gradient());
        assert_abs_diff_eq!(d_pos, -d_neg, epsilon = 1e-12);
    }

    #[test]
    fn gain_schedule_is_continuous_piecewise_linear() {
        let params = VehicleParams::default();
        let cfg = ControlConfig::default();
        let schedule = GainSchedule::compute(&params, &cfg);
        let mut prev = schedule.gain_at(5.0);
        let mut v = 5.0;
        while v < 85.0 {
            let next = schedule.gain_at(v + 0.1);
            assert!((next[0] - prev[0]).abs() < 0.05 && (next[1] - prev[1]).abs() < 0.05);
            // Midpoint of each 10 m/s cell equals the average of the ends.
            let cell = (v / 10.0).floor() * 10.0 + 5.0;
            if (v - cell).abs() < 0.05 && cell + 10.0 <= 85.0 {
                let a = schedule.gain_at(cell);
                let b = schedule.gain_at(cell + 10.0);
                let mid = schedule.gain_at(cell + 5.0);
                assert_abs_diff_eq!(mid[0], 0.5 * (a[0] + b[0]), epsilon = 1e-12);
                assert_abs_diff_eq!(mid[1], 0.5 * (a[1] + b[1]), epsilon = 1e-12);
            }
            prev = next;
            v += 0.1;
        }
        let _ = PointMassLimits::default();
    }
}
