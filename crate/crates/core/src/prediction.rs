//! Opponent motion prediction: a short-horizon constant-turn-rate rollout
//! blended into a longer-horizon track-rail rollout, producing exactly one
//! most-likely trajectory per opponent.
//!
//! The rail predictor is a surrogate for a data-based long-term predictor;
//! any long-horizon predictor producing the same sample layout can be
//! dropped in behind [`fuse_most_likely`].

use crate::dynamics::{PointMassLimits, VehicleState};
use crate::geom::Vec2;
use crate::planning::velocity_profile;
use crate::track::TrackModel;
use serde::{Deserialize, Serialize};

/// Safety margins around a predicted opponent, growing with prediction time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct InflationModel {
    pub lon_m: f64,
    pub lat_m: f64,
    /// Margin growth per second of prediction horizon.
    pub growth_mps: f64,
    /// Upper bound on the grown part of the margin.
    pub growth_cap_m: f64,
}

impl Default for InflationModel {
    fn default() -> Self {
        InflationModel { lon_m: 3.0, lat_m: 1.0, growth_mps: 0.5, growth_cap_m: 1.0 }
    }
}

impl InflationModel {
    pub fn lon_at(&self, t: f64) -> f64 {
        self.lon_m + (self.growth_mps * t.max(0.0)).min(self.growth_cap_m)
    }

    pub fn lat_at(&self, t: f64) -> f64 {
        self.lat_m + (self.growth_mps * t.max(0.0)).min(self.growth_cap_m)
    }

    /// Worst-case margins over any prediction time (used for opponents that
    /// do not move over the horizon).
    pub fn lon_max(&self) -> f64 {
        self.lon_m + self.growth_cap_m
    }

    pub fn lat_max(&self) -> f64 {
        self.lat_m + self.growth_cap_m
    }
}

/// One predicted pose sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PredSample {
    pub t: f64,
    pub s: f64,
    pub n: f64,
    pub v: f64,
    pub pos: Vec2,
}

/// Uni-modal predicted trajectory of one opponent at a fixed sample step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictedTrajectory {
    pub opponent_id: u32,
    pub samples: Vec<PredSample>,
    pub horizon: f64,
    pub inflation: InflationModel,
    pub half_length: f64,
    pub half_width: f64,
    /// Set when the opponent had to be clamped back into the corridor.
    pub clamped: bool,
}

impl PredictedTrajectory {
    /// (s, n, v) at time `t`; linear interpolation between samples, constant
    /// s-velocity extrapolation (n held) beyond the horizon.
    pub fn state_at(&self, t: f64, track: &TrackModel) -> (f64, f64, f64) {
        let first = self.samples.first().expect("prediction has samples");
        if t <= first.t {
            return (first.s, first.n, first.v);
        }
        let last = self.samples.last().unwrap();
        if t >= last.t {
            let extra = t - last.t;
            return (track.wrap_station(last.s + last.v * extra), last.n, last.v);
        }
        let idx = self
            .samples
            .partition_point(|smp| smp.t <= t)
            .saturating_sub(1)
            .min(self.samples.len() - 2);
        let a = &self.samples[idx];
        let b = &self.samples[idx + 1];
        let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let ds = track.station_diff(a.s, b.s);
        (
            track.wrap_station(a.s + w * ds),
            a.n + w * (b.n - a.n),
            a.v + w * (b.v - a.v),
        )
    }

    /// Re-time the prediction so its t=0 lies `shift` seconds into the
    /// original timeline (latency compensation for transport-delayed
    /// perception). Sample step and count are preserved; the tail
    /// extrapolates at constant station speed.
    pub fn shifted(&self, shift: f64, track: &TrackModel) -> PredictedTrajectory {
        if shift <= 0.0 || self.samples.len() < 2 {
            return self.clone();
        }
        let dt = self.samples[1].t - self.samples[0].t;
        let samples = (0..self.samples.len())
            .map(|k| {
                let t = k as f64 * dt;
                let (s, n, v) = self.state_at(t + shift, track);
                let (pos, _) =
                    track.frenet_to_cart(&crate::track::FrenetPose { s, n, mu: 0.0, v });
                PredSample { t, s, n, v, pos }
            })
            .collect();
        PredictedTrajectory { samples, ..self.clone() }
    }

    /// True when the prediction never moves more than `eps` in station
    /// or offset over its whole horizon.
    pub fn is_static(&self, track: &TrackModel, eps: f64) -> bool {
        let first = self.samples.first().expect("prediction has samples");
        self.samples.iter().all(|p| {
            track.station_diff(first.s, p.s).abs() <= eps && (p.n - first.n).abs() <= eps
        }) && first.v.abs() <= eps
    }
}

/// Prediction parameters (part of the scenario configuration).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionConfig {
    pub horizon_s: f64,
    pub physics_horizon_s: f64,
    pub dt_s: f64,
    pub blend_start_s: f64,
    pub blend_end_s: f64,
    /// Traction allowance of the rail rollout when recovering speed after
    /// curvature-forced slowdowns.
    pub rail_accel_mps2: f64,
    /// Below this speed an opponent counts as parked and is predicted static.
    pub parked_speed_mps: f64,
    pub inflation: InflationModel,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            horizon_s: 5.0,
            physics_horizon_s: 2.0,
            dt_s: 0.1,
            blend_start_s: 1.0,
            blend_end_s: 2.0,
            rail_accel_mps2: 2.0,
            parked_speed_mps: 0.5,
            inflation: InflationModel::default(),
        }
    }
}

/// Constant-turn-rate-and-speed rollout of the measured state.
pub fn predict_physics(
    opponent_id: u32,
    state: &VehicleState,
    track: &TrackModel,
    horizon: f64,
    dt: f64,
    inflation: InflationModel,
    half_length: f64,
    half_width: f64,
) -> PredictedTrajectory {
    let speed = state.speed();
    let course0 = state.psi + state.vy.atan2(state.vx.max(1e-9));
    let r = state.r;
    let steps = (horizon / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut s_hint = track.project(state.position()).s;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let pos = if speed < 1e-9 {
            state.position()
        } else if r.abs() < 1e-6 {
            state.position() + Vec2::new(course0.cos(), course0.sin()).scaled(speed * t)
        } else {
            // Circle of radius v/r around the instantaneous center.
            let course = course0 + r * t;
            Vec2::new(
                state.x + speed / r * (course.sin() - course0.sin()),
                state.y - speed / r * (course.cos() - course0.cos()),
            )
        };
        let proj = track.project_near(pos, s_hint, 30.0 + speed * dt * 2.0);
        s_hint = proj.s;
        samples.push(PredSample { t, s: proj.s, n: proj.n, v: speed, pos });
    }
    PredictedTrajectory {
        opponent_id,
        samples,
        horizon,
        inflation,
        half_length,
        half_width,
        clamped: false,
    }
}

/// Rail rollout: lateral offset held, speed propagated with the
/// friction-limited velocity profile capped at the current speed.
pub fn predict_rail(
    opponent_id: u32,
    frenet: crate::track::FrenetPose,
    track: &TrackModel,
    horizon: f64,
    dt: f64,
    limits: &PointMassLimits,
    cfg: &PredictionConfig,
) -> PredictedTrajectory {
    let inflation = cfg.inflation;
    let (half_length, half_width) = (2.45, 0.95);
    let mut n = frenet.n;
    let mut clamped = false;
    let (wl, wr) = track.width_at(frenet.s);
    let n_max = wl - half_width;
    let n_min = -wr + half_width;
    if n > n_max {
        n = n_max;
        clamped = true;
    } else if n < n_min {
        n = n_min;
        clamped = true;
    }

    let steps = (horizon / dt).round() as usize;
    if frenet.v < cfg.parked_speed_mps {
        let (pos, _) = track.frenet_to_cart(&crate::track::FrenetPose { s: frenet.s, n, mu: 0.0, v: 0.0 });
        let samples = (0..=steps)
            .map(|k| PredSample { t: k as f64 * dt, s: frenet.s, n, v: 0.0, pos })
            .collect();
        return PredictedTrajectory {
            opponent_id,
            samples,
            horizon,
            inflation,
            half_length,
            half_width,
            clamped,
        };
    }

    // Profile along the rail ahead; curvature corrected for the offset line.
    let ds = 2.0;
    let length = frenet.v * horizon * 1.25 + 40.0;
    let count = (length / ds).ceil() as usize + 1;
    let kappa: Vec<f64> = (0..count)
        .map(|i| {
            let s = track.wrap_station(frenet.s + i as f64 * ds);
            let kc = track.curvature_at(s);
            kc / (1.0 - n * kc).max(0.25)
        })
        .collect();
    let rail_limits = PointMassLimits {
        a_max: limits.a_max,
        a_lon_drive_max: cfg.rail_accel_mps2.min(limits.a_lon_drive_max),
        v_max: frenet.v.min(limits.v_max),
        ..*limits
    };
    let profile = velocity_profile(&kappa, ds, &rail_limits, frenet.v, f64::INFINITY);

    // Integrate station over time along the profile.
    let mut samples = Vec::with_capacity(steps + 1);
    let mut station_local = 0.0f64;
    for k in 0..=steps {
        let t = k as f64 * dt;
        if k > 0 {
            let idx = ((station_local / ds) as usize).min(profile.len() - 1);
            let v_here = profile[idx].max(0.0);
            station_local += v_here * dt;
        }
        let idx = ((station_local / ds) as usize).min(profile.len() - 1);
        let v = profile[idx];
        let s = track.wrap_station(frenet.s + station_local);
        let (pos, _) = track.frenet_to_cart(&crate::track::FrenetPose { s, n, mu: 0.0, v });
        samples.push(PredSample { t, s, n, v, pos });
    }
    PredictedTrajectory {
        opponent_id,
        samples,
        horizon,
        inflation,
        half_length,
        half_width,
        clamped,
    }
}

/// Blend the physics rollout into the rail rollout: physics verbatim up to
/// `blend_start`, linear Frenet-space blend until `blend_end`, rail beyond.
pub fn fuse_most_likely(
    physics: &PredictedTrajectory,
    rail: &PredictedTrajectory,
    track: &TrackModel,
    blend_start: f64,
    blend_end: f64,
) -> PredictedTrajectory {
    let dt = rail.samples[1].t - rail.samples[0].t;
    debug_assert!(
        (physics.samples[1].t - physics.samples[0].t - dt).abs() < 1e-9,
        "predictions must share the sample step"
    );
    let mut samples = Vec::with_capacity(rail.samples.len());
    for (k, rail_sample) in rail.samples.iter().enumerate() {
        let t = rail_sample.t;
        let sample = if t <= blend_start + 1e-12 {
            match physics.samples.get(k) {
                Some(p) => *p,
                None => *rail_sample,
            }
        } else if t >= blend_end - 1e-12 || k >= physics.samples.len() {
            *rail_sample
        } else {
            let p = &physics.samples[k];
            let w = (t - blend_start) / (blend_end - blend_start);
            let s = track.wrap_station(p.s + w * track.station_diff(p.s, rail_sample.s));
            let n = p.n + w * (rail_sample.n - p.n);
            let v = p.v + w * (rail_sample.v - p.v);
            let (pos, _) =
                track.frenet_to_cart(&crate::track::FrenetPose { s, n, mu: 0.0, v });
            PredSample { t, s, n, v, pos }
        };
        samples.push(sample);
    }
    PredictedTrajectory {
        opponent_id: rail.opponent_id,
        samples,
        horizon: rail.horizon,
        inflation: rail.inflation,
        half_length: rail.half_length,
        half_width: rail.half_width,
        clamped: rail.clamped,
    }
}

/// Full single-opponent pipeline: physics + rail, fused into one most-likely
/// trajectory.
pub fn predict_opponent(
    opponent_id: u32,
    state: &VehicleState,
    track: &TrackModel,
    limits: &PointMassLimits,
    cfg: &PredictionConfig,
    half_length: f64,
    half_width: f64,
) -> PredictedTrajectory {
    let physics = predict_physics(
        opponent_id,
        state,
        track,
        cfg.physics_horizon_s.min(cfg.horizon_s),
        cfg.dt_s,
        cfg.inflation,
        half_length,
        half_width,
    );
    let frenet = track.cart_to_frenet(state.position(), state.psi, state.speed());
    let mut rail = predict_rail(opponent_id, frenet, track, cfg.horizon_s, cfg.dt_s, limits, cfg);
    rail.half_length = half_length;
    rail.half_width = half_width;
    let mut fused = fuse_most_likely(&physics, &rail, track, cfg.blend_start_s, cfg.blend_end_s);
    fused.half_length = half_length;
    fused.half_width = half_width;
    fused
}
