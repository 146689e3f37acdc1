//! Plant models: nonlinear planar dual-track vehicle with Pacejka
//! combined-slip tires, first-order actuator lags and chassis disturbance
//! forces, plus the friction-limited point-mass limits used by planning.
//!
//! All functions here are pure; the integration sequence per vehicle is
//! strictly ordered by the caller.

use crate::geom::Vec2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAVITY: f64 = 9.81;
/// Below this longitudinal speed slip angles degenerate; a kinematic
/// bicycle stands in so simulations never abort.
pub const LOW_SPEED_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("non-finite derivative encountered at state {0:?}")]
    NonFiniteDerivative(Box<VehicleState>),
}

/// Magic-formula coefficient set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TireParams {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl Default for TireParams {
    // Generic race-tire values; every shipped parameter file overrides them.
    fn default() -> Self {
        TireParams { b: 10.0, c: 1.9, d: 1.0, e: 0.97 }
    }
}

impl TireParams {
    /// Small-slip stiffness per unit normal load (the B*C*D product).
    pub fn stiffness_factor(&self) -> f64 {
        self.b * self.c * self.d
    }

    /// Slip at peak force: where C*atan(u(x)) first reaches pi/2.
    pub fn peak_slip(&self) -> f64 {
        let target = (std::f64::consts::FRAC_PI_2 / self.c).tan();
        let u = |x: f64| self.b * x - self.e * (self.b * x - (self.b * x).atan());
        let mut lo = 0.0;
        let mut hi = 2.0;
        while u(hi) < target && hi < 1e6 {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if u(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Pacejka magic formula: F = Fz * D * sin(C * atan(B*s - E*(B*s - atan(B*s)))).
/// Odd in the slip argument; |F| <= D * Fz.
pub fn magic_formula(slip: f64, tire: &TireParams, fz: f64) -> f64 {
    let bs = tire.b * slip;
    let arg = bs - tire.e * (bs - bs.atan());
    fz * tire.d * (tire.c * arg.atan()).sin()
}

/// Pure-slip forces scaled onto the friction ellipse so the resultant never
/// exceeds D * Fz.
pub fn combined_slip_forces(
    kappa_slip: f64,
    alpha_slip: f64,
    tire: &TireParams,
    fz: f64,
) -> (f64, f64) {
    let fx0 = magic_formula(kappa_slip, tire, fz);
    let fy0 = magic_formula(alpha_slip, tire, fz);
    let cap = tire.d * fz;
    if cap <= 0.0 {
        return (0.0, 0.0);
    }
    let rho = (fx0 / cap).hypot(fy0 / cap);
    if rho > 1.0 {
        (fx0 / rho, fy0 / rho)
    } else {
        (fx0, fy0)
    }
}

/// Invert the pure longitudinal magic formula on its monotone branch:
/// find slip in [-peak, peak] with F(slip) = fx_demand (demand clamped).
pub fn invert_longitudinal(tire: &TireParams, fz: f64, fx_demand: f64) -> f64 {
    if fz <= 1e-9 {
        return 0.0;
    }
    let cap = tire.d * fz;
    let demand = fx_demand.clamp(-0.98 * cap, 0.98 * cap);
    let peak = tire.peak_slip();
    let mut lo = 0.0;
    let mut hi = peak;
    let target = demand.abs();
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if magic_formula(mid, tire, fz) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) * demand.signum()
}

/// Full planar dual-track state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    /// Body-frame longitudinal velocity.
    pub vx: f64,
    /// Body-frame lateral velocity.
    pub vy: f64,
    /// Yaw rate.
    pub r: f64,
    /// Realized steering angle (after actuator lag).
    pub delta: f64,
    /// Realized longitudinal acceleration command (after drivetrain lag).
    pub ax_cmd_filtered: f64,
}

impl VehicleState {
    pub fn at_rest(x: f64, y: f64, psi: f64) -> Self {
        VehicleState { x, y, psi, vx: 0.0, vy: 0.0, r: 0.0, delta: 0.0, ax_cmd_filtered: 0.0 }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.vx, self.vy, self.r, self.delta, self.ax_cmd_filtered]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Steering and longitudinal acceleration request.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Controls {
    pub delta_cmd: f64,
    pub ax_cmd: f64,
}

/// Vehicle parameters. The `_si` key suffix marks SI units in the JSON files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleParams {
    #[serde(rename = "mass_si")]
    pub mass: f64,
    #[serde(rename = "inertia_z_si")]
    pub inertia_z: f64,
    /// CoG to front axle.
    #[serde(rename = "lf_si")]
    pub lf: f64,
    /// CoG to rear axle.
    #[serde(rename = "lr_si")]
    pub lr: f64,
    #[serde(rename = "track_front_si")]
    pub track_front: f64,
    #[serde(rename = "track_rear_si")]
    pub track_rear: f64,
    #[serde(rename = "h_cog_si")]
    pub h_cog: f64,
    #[serde(rename = "half_width_si")]
    pub half_width: f64,
    #[serde(rename = "length_si")]
    pub length: f64,
    #[serde(rename = "tau_steer_si")]
    pub tau_steer: f64,
    #[serde(rename = "tau_drive_si")]
    pub tau_drive: f64,
    #[serde(rename = "v_max_si")]
    pub v_max: f64,
    #[serde(rename = "a_brake_max_si")]
    pub a_brake_max: f64,
    #[serde(rename = "a_drive_max_si")]
    pub a_drive_max: f64,
    #[serde(rename = "delta_max_si")]
    pub delta_max: f64,
    /// Quadratic aero drag coefficient, N per (m/s)^2.
    #[serde(rename = "drag_coeff_si")]
    pub drag_coeff: f64,
    /// Rolling resistance coefficient (dimensionless).
    #[serde(rename = "rolling_coeff")]
    pub rolling_coeff: f64,
    pub tire_front: TireParams,
    pub tire_rear: TireParams,
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Understeer gradient of the linearized single-track equivalent,
    /// in rad per (m/s^2) of lateral acceleration.
    pub fn understeer_gradient(&self) -> f64 {
        let l = self.wheelbase();
        let fz_front = self.mass * GRAVITY * self.lr / l;
        let fz_rear = self.mass * GRAVITY * self.lf / l;
        let c_f = self.tire_front.stiffness_factor() * fz_front;
        let c_r = self.tire_rear.stiffness_factor() * fz_rear;
        self.mass * (c_r * self.lr - c_f * self.lf) / (c_f * c_r * l)
    }
}

impl Default for VehicleParams {
    // Plausible Indy-Lights-class values; not measured data. The shipped
    // vehicles/av21_like.json is the reference parameter set.
    fn default() -> Self {
        VehicleParams {
            mass: 780.0,
            inertia_z: 1000.0,
            lf: 1.62,
            lr: 1.46,
            track_front: 1.60,
            track_rear: 1.54,
            h_cog: 0.30,
            half_width: 0.95,
            length: 4.90,
            tau_steer: 0.08,
            tau_drive: 0.25,
            v_max: 83.33,
            a_brake_max: 15.6,
            a_drive_max: 10.0,
            delta_max: 0.30,
            drag_coeff: 0.65,
            rolling_coeff: 0.012,
            tire_front: TireParams { d: 2.0, ..TireParams::default() },
            tire_rear: TireParams { d: 2.0, ..TireParams::default() },
        }
    }
}

/// Acceleration budget of the friction-limited point-mass model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PointMassLimits {
    pub a_max: f64,
    /// Traction cap at the wheels; net forward acceleration additionally
    /// loses the motion resistances below.
    pub a_lon_drive_max: f64,
    pub v_max: f64,
    /// Aero drag deceleration per (m/s)^2 (drag coefficient over mass).
    pub drag_per_mass: f64,
    /// Rolling resistance deceleration.
    pub rolling_mps2: f64,
}

impl PointMassLimits {
    pub fn resistance(&self, v: f64) -> f64 {
        self.drag_per_mass * v * v + self.rolling_mps2
    }
}

impl Default for PointMassLimits {
    fn default() -> Self {
        PointMassLimits {
            a_max: 14.0,
            a_lon_drive_max: 8.0,
            v_max: 83.33,
            drag_per_mass: 0.0,
            rolling_mps2: 0.0,
        }
    }
}

/// Chassis disturbance description: slowly varying wind plus a random
/// lateral force, resampled every `period_s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceModel {
    pub seed: u64,
    pub wind_mean_n: f64,
    pub wind_std_n: f64,
    pub wind_dir_rad: f64,
    pub lateral_std_n: f64,
    pub period_s: f64,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        DisturbanceModel {
            seed: 0,
            wind_mean_n: 0.0,
            wind_std_n: 0.0,
            wind_dir_rad: 0.0,
            lateral_std_n: 0.0,
            period_s: 0.1,
        }
    }
}

/// One held disturbance draw: world-frame wind force plus a body-lateral force.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DisturbanceSample {
    pub wind_world: Vec2,
    pub lateral_body: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl DisturbanceModel {
    /// Deterministic draw for (agent, period index): identical seeds give
    /// identical sequences regardless of evaluation order.
    pub fn sample(&self, agent_id: u32, period_index: u64) -> DisturbanceSample {
        if self.wind_mean_n == 0.0 && self.wind_std_n == 0.0 && self.lateral_std_n == 0.0 {
            return DisturbanceSample::default();
        }
        let key = splitmix64(self.seed ^ splitmix64((agent_id as u64) << 32 ^ period_index));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let wind_mag = if self.wind_std_n > 0.0 {
            Normal::new(self.wind_mean_n, self.wind_std_n).unwrap().sample(&mut rng)
        } else {
            self.wind_mean_n
        };
        let lateral = if self.lateral_std_n > 0.0 {
            Normal::new(0.0, self.lateral_std_n).unwrap().sample(&mut rng)
        } else {
            0.0
        };
        DisturbanceSample {
            wind_world: Vec2::new(self.wind_dir_rad.cos(), self.wind_dir_rad.sin())
                .scaled(wind_mag),
            lateral_body: lateral,
        }
    }
}

/// Per-wheel vertical loads under steady-state load transfer.
/// Order: FL, FR, RL, RR. The four loads always sum to m*g.
pub fn wheel_loads(params: &VehicleParams, ax: f64, ay: f64) -> [f64; 4] {
    let l = params.wheelbase();
    let m = params.mass;
    let front_axle = m * (GRAVITY * params.lr - ax * params.h_cog) / l;
    let rear_axle = m * (GRAVITY * params.lf + ax * params.h_cog) / l;
    // Lateral transfer split by axle mass share; positive ay (left turn)
    // loads the outside (right) wheels.
    let share_front = params.lr / l;
    let share_rear = params.lf / l;
    let d_front = m * share_front * ay * params.h_cog / params.track_front;
    let d_rear = m * share_rear * ay * params.h_cog / params.track_rear;
    [
        (0.5 * front_axle - d_front).max(0.0),
        (0.5 * front_axle + d_front).max(0.0),
        (0.5 * rear_axle - d_rear).max(0.0),
        (0.5 * rear_axle + d_rear).max(0.0),
    ]
}

/// Time derivative of the dual-track state.
///
/// Four-wheel slip computation with steady-state load transfer, combined-slip
/// Pacejka forces, quadratic drag, rolling resistance, first-order actuator
/// lags and externally sampled disturbance forces. Below
/// [`LOW_SPEED_THRESHOLD`] a kinematic bicycle replaces the force model so
/// slip-angle singularities cannot abort a simulation.
pub fn dual_track_derivative(
    state: &VehicleState,
    controls: &Controls,
    params: &VehicleParams,
    disturbance: &DisturbanceSample,
) -> VehicleState {
    let delta_cmd = controls.delta_cmd.clamp(-params.delta_max, params.delta_max);
    let ax_cmd = controls.ax_cmd.clamp(-params.a_brake_max, params.a_drive_max);
    let delta_dot = (delta_cmd - state.delta) / params.tau_steer;
    let ax_f_dot = (ax_cmd - state.ax_cmd_filtered) / params.tau_drive;

    let (sp, cp) = state.psi.sin_cos();
    let x_dot = state.vx * cp - state.vy * sp;
    let y_dot = state.vx * sp + state.vy * cp;

    // Kinematic fallback only near true standstill; a sliding vehicle with
    // small vx but large vy still has well-defined slip angles via atan2.
    if state.vx < LOW_SPEED_THRESHOLD && state.speed() < 5.0 * LOW_SPEED_THRESHOLD {
        return low_speed_derivative(state, params, x_dot, y_dot, delta_dot, ax_f_dot);
    }

    let m = params.mass;
    let loads = wheel_loads(params, state.ax_cmd_filtered, state.vx * state.r);

    // Wheel positions in body frame: FL, FR, RL, RR.
    let positions = [
        (params.lf, params.track_front / 2.0),
        (params.lf, -params.track_front / 2.0),
        (-params.lr, params.track_rear / 2.0),
        (-params.lr, -params.track_rear / 2.0),
    ];
    let steer = [state.delta, state.delta, 0.0, 0.0];
    let tires = [&params.tire_front, &params.tire_front, &params.tire_rear, &params.tire_rear];

    // Longitudinal force demand per wheel: drive on the rear axle, braking
    // distributed proportional to the vertical loads (ideal brake balance,
    // preserves the per-wheel capacity ratio under load transfer).
    let total_fx = m * state.ax_cmd_filtered;
    let fx_demand = if total_fx >= 0.0 {
        [0.0, 0.0, total_fx / 2.0, total_fx / 2.0]
    } else {
        let total_load: f64 = loads.iter().sum();
        [
            total_fx * loads[0] / total_load,
            total_fx * loads[1] / total_load,
            total_fx * loads[2] / total_load,
            total_fx * loads[3] / total_load,
        ]
    };

    let mut sum_fx = 0.0;
    let mut sum_fy = 0.0;
    let mut yaw_moment = 0.0;
    for i in 0..4 {
        let (px, py) = positions[i];
        let v_wx = state.vx - state.r * py;
        let v_wy = state.vy + state.r * px;
        let alpha = steer[i] - v_wy.atan2(v_wx);
        let kappa = invert_longitudinal(tires[i], loads[i], fx_demand[i]);
        let (fx_w, fy_w) = combined_slip_forces(kappa, alpha, tires[i], loads[i]);
        // Rotate wheel-frame forces into the body frame.
        let (s_d, c_d) = steer[i].sin_cos();
        let fx_b = fx_w * c_d - fy_w * s_d;
        let fy_b = fx_w * s_d + fy_w * c_d;
        sum_fx += fx_b;
        sum_fy += fy_b;
        yaw_moment += px * fy_b - py * fx_b;
    }

    // Resistances and chassis disturbances.
    sum_fx -= params.drag_coeff * state.vx * state.vx.abs();
    sum_fx -= params.rolling_coeff * m * GRAVITY * (state.vx / 0.2).tanh();
    let wind_body = disturbance.wind_world.rotated(-state.psi);
    sum_fx += wind_body.x;
    sum_fy += wind_body.y + disturbance.lateral_body;

    VehicleState {
        x: x_dot,
        y: y_dot,
        psi: state.r,
        vx: sum_fx / m + state.r * state.vy,
        vy: sum_fy / m - state.r * state.vx,
        r: yaw_moment / params.inertia_z,
        delta: delta_dot,
        ax_cmd_filtered: ax_f_dot,
    }
}

fn low_speed_derivative(
    state: &VehicleState,
    params: &VehicleParams,
    x_dot: f64,
    y_dot: f64,
    delta_dot: f64,
    ax_f_dot: f64,
) -> VehicleState {
    // Kinematic bicycle relaxation; keeps vy and r consistent with the
    // steering geometry without slip-angle division by vx.
    let tau = 0.05;
    let l = params.wheelbase();
    let beta = (params.lr * state.delta.tan() / l).atan();
    let r_kin = state.vx * state.delta.tan() * beta.cos() / l;
    let vy_kin = state.vx * beta.tan();
    let resist = params.rolling_coeff * GRAVITY * (state.vx / 0.2).tanh();
    VehicleState {
        x: x_dot,
        y: y_dot,
        psi: state.r,
        vx: state.ax_cmd_filtered - resist,
        vy: (vy_kin - state.vy) / tau,
        r: (r_kin - state.r) / tau,
        delta: delta_dot,
        ax_cmd_filtered: ax_f_dot,
    }
}

fn state_axpy(base: &VehicleState, k: &VehicleState, h: f64) -> VehicleState {
    VehicleState {
        x: base.x + k.x * h,
        y: base.y + k.y * h,
        psi: base.psi + k.psi * h,
        vx: base.vx + k.vx * h,
        vy: base.vy + k.vy * h,
        r: base.r + k.r * h,
        delta: base.delta + k.delta * h,
        ax_cmd_filtered: base.ax_cmd_filtered + k.ax_cmd_filtered * h,
    }
}

/// Classical 4th-order Runge-Kutta step of the dual-track model.
/// Deterministic: identical inputs produce bit-identical outputs.
pub fn step_rk4(
    state: &VehicleState,
    controls: &Controls,
    params: &VehicleParams,
    dt: f64,
    disturbance: &DisturbanceSample,
) -> Result<VehicleState, DynamicsError> {
    debug_assert!(dt > 0.0 && dt <= 0.02, "physics step out of range: {dt}");
    let k1 = dual_track_derivative(state, controls, params, disturbance);
    let s2 = state_axpy(state, &k1, dt / 2.0);
    let k2 = dual_track_derivative(&s2, controls, params, disturbance);
    let s3 = state_axpy(state, &k2, dt / 2.0);
    let k3 = dual_track_derivative(&s3, controls, params, disturbance);
    let s4 = state_axpy(state, &k3, dt);
    let k4 = dual_track_derivative(&s4, controls, params, disturbance);
    let mut out = *state;
    let w = dt / 6.0;
    out.x += w * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    out.y += w * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
    out.psi += w * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi);
    out.vx += w * (k1.vx + 2.0 * k2.vx + 2.0 * k3.vx + k4.vx);
    out.vy += w * (k1.vy + 2.0 * k2.vy + 2.0 * k3.vy + k4.vy);
    out.r += w * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);
    out.delta += w * (k1.delta + 2.0 * k2.delta + 2.0 * k3.delta + k4.delta);
    out.ax_cmd_filtered +=
        w * (k1.ax_cmd_filtered + 2.0 * k2.ax_cmd_filtered + 2.0 * k3.ax_cmd_filtered + k4.ax_cmd_filtered);
    out.vx = out.vx.max(0.0);
    if !out.is_finite() {
        return Err(DynamicsError::NonFiniteDerivative(Box::new(*state)));
    }
    Ok(out)
}

/// Ideal braking distance v^2 / (2a).
pub fn braking_distance(v: f64, a: f64) -> f64 {
    debug_assert!(v >= 0.0 && a > 0.0);
    v * v / (2.0 * a)
}

/// Distance driven within a processing delay at constant speed.
pub fn delay_distance(v: f64, t_proc: f64) -> f64 {
    debug_assert!(v >= 0.0 && t_proc >= 0.0);
    v * t_proc
}

pub fn kph_to_mps(kph: f64) -> f64 {
    kph / 3.6
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn test_tire() -> TireParams {
        TireParams { b: 10.0, c: 1.9, d: 1.0, e: 0.97 }
    }

    #[test]
    fn magic_formula_zero_and_odd() {
        let tire = test_tire();
        assert_eq!(magic_formula(0.0, &tire, 3000.0), 0.0);
        for s in [0.01, 0.05, 0.2, 0.7, 1.0] {
            let f_pos = magic_formula(s, &tire, 3000.0);
            let f_neg = magic_formula(-s, &tire, 3000.0);
            assert_eq!(f_pos, -f_neg, "odd symmetry must be exact");
        }
    }

    #[test]
    fn magic_formula_small_slip_stiffness() {
        // Central finite difference around zero against B*C*D*Fz.
        let tire = test_tire();
        let fz = 3000.0;
        let h = 1e-6;
        let slope = (magic_formula(h, &tire, fz) - magic_formula(-h, &tire, fz)) / (2.0 * h);
        let expected = tire.b * tire.c * tire.d * fz;
        assert_abs_diff_eq!(slope, expected, epsilon = 0.001 * expected);
        assert_abs_diff_eq!(expected, 57000.0, epsilon = 1e-9);
    }

    #[test]
    fn magic_formula_bounded_by_peak() {
        let tire = test_tire();
        let fz = 3000.0;
        for i in -1000..=1000 {
            let s = i as f64 / 1000.0;
            assert!(magic_formula(s, &tire, fz).abs() <= tire.d * fz + 1e-12);
        }
    }

    #[test]
    fn combined_slip_pure_cases_and_bound() {
        let tire = test_tire();
        let fz = 3000.0;
        let (fx, fy) = combined_slip_forces(0.1, 0.0, &tire, fz);
        assert_eq!(fy, 0.0);
        assert_eq!(fx, magic_formula(0.1, &tire, fz));
        let (fx, fy) = combined_slip_forces(0.0, 0.08, &tire, fz);
        assert_eq!(fx, 0.0);
        assert_eq!(fy, magic_formula(0.08, &tire, fz));
        // 100x100 slip grid: resultant never exceeds D*Fz.
        for i in 0..100 {
            for j in 0..100 {
                let k = -1.0 + 2.0 * i as f64 / 99.0;
                let a = -1.0 + 2.0 * j as f64 / 99.0;
                let (fx, fy) = combined_slip_forces(k, a, &tire, fz);
                assert!(fx.hypot(fy) <= tire.d * fz * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn longitudinal_inversion_roundtrip() {
        let tire = test_tire();
        let fz = 3000.0;
        for demand in [-2500.0, -900.0, 0.0, 400.0, 2800.0] {
            let kappa = invert_longitudinal(&tire, fz, demand);
            let realized = magic_formula(kappa, &tire, fz);
            assert_abs_diff_eq!(realized, demand.clamp(-2940.0, 2940.0), epsilon = 1.0);
        }
    }

    #[test]
    fn straight_driving_is_symmetric() {
        let params = VehicleParams::default();
        let state = VehicleState {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
            vx: 40.0,
            vy: 0.0,
            r: 0.0,
            delta: 0.0,
            ax_cmd_filtered: 0.0,
        };
        let d = dual_track_derivative(
            &state,
            &Controls::default(),
            &params,
            &DisturbanceSample::default(),
        );
        assert_eq!(d.vy, 0.0);
        assert_eq!(d.r, 0.0);
    }

    #[test]
    fn wheel_loads_sum_and_braking_shift() {
        let params = VehicleParams::default();
        let static_loads = wheel_loads(&params, 0.0, 0.0);
        let braking = wheel_loads(&params, -14.0, 0.0);
        let total: f64 = braking.iter().sum();
        assert_abs_diff_eq!(total, params.mass * GRAVITY, epsilon = 1e-6);
        assert!(
            braking[0] + braking[1] > static_loads[0] + static_loads[1],
            "front axle must gain load under braking"
        );
        // Combined accelerations preserve the total too.
        for (ax, ay) in [(-10.0, 8.0), (5.0, -12.0), (3.0, 3.0)] {
            let loads = wheel_loads(&params, ax, ay);
            let total: f64 = loads.iter().sum();
            assert_abs_diff_eq!(total, params.mass * GRAVITY, epsilon = 1e-6);
        }
    }

    /// Steady state of the linearized single-track model, solved
    /// independently as an algebraic 2x2 system (test oracle).
    fn linear_single_track_yaw_rate(params: &VehicleParams, vx: f64, delta: f64) -> f64 {
        let l = params.wheelbase();
        let fz_f = params.mass * GRAVITY * params.lr / l;
        let fz_r = params.mass * GRAVITY * params.lf / l;
        let cf = params.tire_front.stiffness_factor() * fz_f;
        let cr = params.tire_rear.stiffness_factor() * fz_r;
        let m = params.mass;
        let iz = params.inertia_z;
        // d/dt [vy, r] = A [vy, r] + B delta = 0 at steady state.
        let a11 = -(cf + cr) / (m * vx);
        let a12 = -vx + (cr * params.lr - cf * params.lf) / (m * vx);
        let a21 = (cr * params.lr - cf * params.lf) / (iz * vx);
        let a22 = -(cf * params.lf * params.lf + cr * params.lr * params.lr) / (iz * vx);
        let b1 = cf / m;
        let b2 = cf * params.lf / iz;
        let det = a11 * a22 - a12 * a21;
        // [vy; r] = -A^-1 B delta
        -(a11 * b2 - a21 * b1) / det * delta
    }

    #[test]
    fn steady_state_circle_matches_linear_model() {
        let params = VehicleParams::default();
        let delta_cmd = 0.02;
        let vx = 20.0;
        let controls = Controls { delta_cmd, ax_cmd: 0.0 };
        let mut state = VehicleState {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
            vx,
            vy: 0.0,
            r: 0.0,
            delta: delta_cmd,
            ax_cmd_filtered: 0.0,
        };
        // Hold speed with a small feedback so drag does not bleed vx.
        for _ in 0..4000 {
            let c = Controls { delta_cmd, ax_cmd: 2.0 * (vx - state.vx) };
            state = step_rk4(&state, &c, &params, 0.005, &DisturbanceSample::default()).unwrap();
        }
        let _ = controls;
        let expected = linear_single_track_yaw_rate(&params, state.vx, delta_cmd);
        let rel = (state.r - expected).abs() / expected.abs();
        assert!(
            rel < 0.10,
            "converged yaw rate {} vs linear prediction {} (rel err {:.3})",
            state.r,
            expected,
            rel
        );
    }

    #[test]
    fn rk4_exact_on_constant_acceleration() {
        // Point-mass reduction: straight line, constant realized acceleration,
        // no resistance so the dynamics reduce to a polynomial in t.
        let mut params = VehicleParams::default();
        params.drag_coeff = 0.0;
        params.rolling_coeff = 0.0;
        let ax = 3.0;
        let controls = Controls { delta_cmd: 0.0, ax_cmd: ax };
        let mut state = VehicleState {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
            vx: 10.0,
            vy: 0.0,
            r: 0.0,
            delta: 0.0,
            ax_cmd_filtered: ax, // pre-settled drivetrain lag
        };
        let dt = 0.01;
        for _ in 0..100 {
            state = step_rk4(&state, &controls, &params, dt, &DisturbanceSample::default()).unwrap();
        }
        let t = 1.0;
        assert_abs_diff_eq!(state.x, 10.0 * t + 0.5 * ax * t * t, epsilon = 1e-9);
        assert_abs_diff_eq!(state.vx, 10.0 + ax * t, epsilon = 1e-9);
    }

    fn run_maneuver(dt: f64) -> VehicleState {
        // Constant commands, rich transient through the actuator lags, slip
        // buildup and load transfer. Constant inputs keep the system
        // autonomous so the integrator order is actually observable.
        let params = VehicleParams::default();
        let mut state = VehicleState {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
            vx: 40.0,
            vy: 0.0,
            r: 0.0,
            delta: 0.0,
            ax_cmd_filtered: 0.0,
        };
        let controls = Controls { delta_cmd: 0.03, ax_cmd: 1.5 };
        let steps = (1.0 / dt).round() as usize;
        for _ in 0..steps {
            state = step_rk4(&state, &controls, &params, dt, &DisturbanceSample::default()).unwrap();
        }
        state
    }

    #[test]
    fn rk4_richardson_convergence_order() {
        // Order from three resolutions: log2(|x_h - x_h/2| / |x_h/2 - x_h/4|).
        let coarse = run_maneuver(0.004);
        let mid = run_maneuver(0.002);
        let fine = run_maneuver(0.001);
        let err_coarse = ((coarse.x - mid.x).powi(2)
            + (coarse.y - mid.y).powi(2)
            + (coarse.psi - mid.psi).powi(2)
            + (coarse.vx - mid.vx).powi(2)
            + (coarse.vy - mid.vy).powi(2)
            + (coarse.r - mid.r).powi(2))
        .sqrt();
        let err_fine = ((mid.x - fine.x).powi(2)
            + (mid.y - fine.y).powi(2)
            + (mid.psi - fine.psi).powi(2)
            + (mid.vx - fine.vx).powi(2)
            + (mid.vy - fine.vy).powi(2)
            + (mid.r - fine.r).powi(2))
        .sqrt();
        let order = (err_coarse / err_fine).log2();
        assert!(order >= 3.5, "observed convergence order {order:.2} < 3.5");
    }

    #[test]
    fn coasting_only_loses_energy() {
        let params = VehicleParams::default();
        let mut state = VehicleState {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
            vx: 50.0,
            vy: 0.0,
            r: 0.0,
            delta: 0.0,
            ax_cmd_filtered: 0.0,
        };
        let mut prev = state.speed();
        for _ in 0..2000 {
            state =
                step_rk4(&state, &Controls::default(), &params, 0.005, &DisturbanceSample::default())
                    .unwrap();
            let v = state.speed();
            assert!(v <= prev + 1e-12, "speed increased while coasting");
            prev = v;
        }
    }

    #[test]
    fn rk4_is_deterministic() {
        let params = VehicleParams::default();
        let state = VehicleState {
            x: 1.0,
            y: 2.0,
            psi: 0.3,
            vx: 30.0,
            vy: 0.2,
            r: 0.05,
            delta: 0.01,
            ax_cmd_filtered: 1.0,
        };
        let controls = Controls { delta_cmd: 0.02, ax_cmd: 2.0 };
        let dist = DisturbanceModel { seed: 7, wind_std_n: 100.0, ..Default::default() }.sample(0, 3);
        let a = step_rk4(&state, &controls, &params, 0.005, &dist).unwrap();
        let b = step_rk4(&state, &controls, &params, 0.005, &dist).unwrap();
        assert_eq!(a, b, "identical inputs must give bit-identical states");
    }

    #[test]
    fn mirrored_inputs_mirror_the_trajectory() {
        let params = VehicleParams::default();
        let start = VehicleState {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
            vx: 35.0,
            vy: 0.0,
            r: 0.0,
            delta: 0.0,
            ax_cmd_filtered: 0.0,
        };
        let mut a = start;
        let mut b = start;
        for i in 0..400 {
            let t = i as f64 * 0.005;
            let delta = 0.02 * (1.5 * t).sin() + 0.01;
            let ca = Controls { delta_cmd: delta, ax_cmd: 1.0 };
            let cb = Controls { delta_cmd: -delta, ax_cmd: 1.0 };
            a = step_rk4(&a, &ca, &params, 0.005, &DisturbanceSample::default()).unwrap();
            b = step_rk4(&b, &cb, &params, 0.005, &DisturbanceSample::default()).unwrap();
        }
        assert_abs_diff_eq!(a.y, -b.y, epsilon = 1e-9);
        assert_abs_diff_eq!(a.psi, -b.psi, epsilon = 1e-9);
        assert_abs_diff_eq!(a.vy, -b.vy, epsilon = 1e-9);
        assert_abs_diff_eq!(a.r, -b.r, epsilon = 1e-9);
        assert_abs_diff_eq!(a.x, b.x, epsilon = 1e-9);
    }

    #[test]
    fn braking_distance_table() {
        // Closed-form v^2/(2a) evaluated per the figure's 14 m/s^2.
        assert_abs_diff_eq!(braking_distance(kph_to_mps(300.0), 14.0), 248.0, epsilon = 0.1);
        assert_abs_diff_eq!(braking_distance(kph_to_mps(200.0), 14.0), 110.2, epsilon = 0.1);
        assert_abs_diff_eq!(braking_distance(kph_to_mps(100.0), 14.0), 27.6, epsilon = 0.1);
        assert_eq!(braking_distance(0.0, 14.0), 0.0);
    }

    #[test]
    fn delay_distance_table() {
        assert_abs_diff_eq!(delay_distance(kph_to_mps(300.0), 0.2), 16.7, epsilon = 0.05);
        assert!((delay_distance(kph_to_mps(300.0), 0.2) - 17.0).abs() < 0.5);
        assert_eq!(delay_distance(kph_to_mps(100.0), 0.0), 0.0);
        assert_abs_diff_eq!(delay_distance(kph_to_mps(100.0), 0.2), 5.6, epsilon = 0.05);
    }

    #[test]
    fn disturbance_sequence_is_seed_deterministic() {
        let model = DisturbanceModel {
            seed: 42,
            wind_mean_n: 50.0,
            wind_std_n: 20.0,
            lateral_std_n: 30.0,
            ..Default::default()
        };
        for agent in 0..3u32 {
            for k in 0..50u64 {
                assert_eq!(model.sample(agent, k), model.sample(agent, k));
            }
        }
        assert_ne!(model.sample(0, 1), model.sample(0, 2));
        assert_ne!(model.sample(0, 1), model.sample(1, 1));
    }

    #[test]
    fn low_speed_fallback_never_crashes() {
        let params = VehicleParams::default();
        let mut state = VehicleState::at_rest(0.0, 0.0, 0.0);
        let controls = Controls { delta_cmd: 0.2, ax_cmd: 2.0 };
        for _ in 0..1000 {
            state = step_rk4(&state, &controls, &params, 0.005, &DisturbanceSample::default())
                .expect("low-speed fallback must keep integrating");
        }
        assert!(state.vx > 1.0, "vehicle should accelerate from rest");
    }
}
