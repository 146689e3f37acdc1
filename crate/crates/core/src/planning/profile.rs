//! Friction-limited point-mass velocity profile: lateral cap, forward
//! traction-limited pass, backward braking-limited pass.

use crate::dynamics::PointMassLimits;

const KAPPA_EPS: f64 = 1e-12;

/// Compute the speed profile over a uniform station grid.
///
/// Three passes, result is the pointwise minimum:
/// 1. lateral cap v = min(v_max, sqrt(a_max / |kappa|)),
/// 2. forward pass limited by the friction circle and the traction cap,
/// 3. backward pass limited by the friction circle.
///
/// Each segment uses the worst curvature of its two endpoints, so every
/// grid point satisfies a_lon^2 + (v^2 kappa)^2 <= a_max^2 with its own
/// local values.
pub fn velocity_profile(
    curvature: &[f64],
    ds: f64,
    limits: &PointMassLimits,
    v_start: f64,
    v_end_cap: f64,
) -> Vec<f64> {
    velocity_profile_with_caps(curvature, ds, limits, v_start, v_end_cap, None)
}

/// [`velocity_profile`] with additional per-station speed caps folded into
/// the lateral-cap pass, keeping both passes feasibility-preserving.
pub fn velocity_profile_with_caps(
    curvature: &[f64],
    ds: f64,
    limits: &PointMassLimits,
    v_start: f64,
    v_end_cap: f64,
    extra_caps: Option<&[f64]>,
) -> Vec<f64> {
    let n = curvature.len();
    if n == 0 {
        return Vec::new();
    }
    let a_max = limits.a_max;
    let mut v: Vec<f64> = curvature
        .iter()
        .map(|&k| lateral_cap(k, limits))
        .collect();
    if let Some(caps) = extra_caps {
        for (vi, &cap) in v.iter_mut().zip(caps) {
            *vi = vi.min(cap);
        }
    }

    // Forward pass.
    v[0] = v[0].min(v_start.max(0.0));
    for i in 0..n - 1 {
        let k_seg = curvature[i].abs().max(curvature[i + 1].abs());
        let a_lat = (v[i] * v[i] * k_seg).min(a_max);
        let drive = (limits.a_lon_drive_max - limits.resistance(v[i])).max(0.0);
        let a_avail = (a_max * a_max - a_lat * a_lat).max(0.0).sqrt().min(drive);
        let reachable = (v[i] * v[i] + 2.0 * a_avail * ds).sqrt();
        v[i + 1] = v[i + 1].min(reachable);
    }

    // Backward pass.
    let last = n - 1;
    v[last] = v[last].min(v_end_cap.max(0.0));
    for i in (0..last).rev() {
        let k_seg = curvature[i].abs().max(curvature[i + 1].abs());
        v[i] = v[i].min(max_entry_speed(v[i + 1], k_seg, ds, a_max));
    }
    v
}

pub fn lateral_cap(kappa: f64, limits: &PointMassLimits) -> f64 {
    let k = kappa.abs();
    if k < KAPPA_EPS {
        limits.v_max
    } else {
        limits.v_max.min((limits.a_max / k).sqrt())
    }
}

/// Largest entry speed from which `v_exit` is reachable over one segment while
/// braking within the friction circle (closed form; a_lat evaluated at entry).
///
/// Solves u - v_exit^2 = 2 ds sqrt(a_max^2 - u^2 k^2) for u = v_entry^2.
fn max_entry_speed(v_exit: f64, kappa: f64, ds: f64, a_max: f64) -> f64 {
    let c = v_exit * v_exit;
    let k2 = kappa * kappa;
    let big_k = 4.0 * ds * ds * k2;
    let big_a = 4.0 * ds * ds * a_max * a_max;
    let disc = (1.0 + big_k) * big_a - big_k * c * c;
    if disc <= 0.0 {
        // Lateral demand saturates the circle; no braking capacity left.
        return v_exit;
    }
    let u = (c + disc.sqrt()) / (1.0 + big_k);
    u.max(c).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn limits(a_max: f64, drive: f64, v_max: f64) -> PointMassLimits {
        PointMassLimits { a_max, a_lon_drive_max: drive, v_max, ..Default::default() }
    }

    #[test]
    fn straight_holds_v_max() {
        let k = vec![0.0; 100];
        let lim = limits(14.0, 8.0, 60.0);
        let v = velocity_profile(&k, 5.0, &lim, 60.0, f64::INFINITY);
        for &s in &v {
            assert_abs_diff_eq!(s, 60.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_curvature_cap() {
        let k = vec![0.01; 400];
        let lim = limits(14.0, 8.0, 1000.0);
        let v = velocity_profile(&k, 1.0, &lim, 1000.0, f64::INFINITY);
        let expected = (14.0f64 / 0.01).sqrt();
        assert_abs_diff_eq!(v[200], expected, epsilon = 1e-9);
        assert_abs_diff_eq!(expected, 37.42, epsilon = 0.01);
    }

    #[test]
    fn stop_at_end_against_dense_integration_oracle() {
        // Straight run-in to a mandatory stop.
        let n = 201;
        let ds = 1.0;
        let k = vec![0.0; n];
        let lim = limits(14.0, 8.0, 80.0);
        let v = velocity_profile(&k, ds, &lim, 80.0, 0.0);
        assert_eq!(v[n - 1], 0.0);
        // Deceleration between grid points never exceeds a_max.
        for i in 0..n - 1 {
            let a = (v[i + 1] * v[i + 1] - v[i] * v[i]) / (2.0 * ds);
            assert!(a >= -14.0 - 1e-9, "decel {a} exceeds the budget at {i}");
        }
        // Independent oracle: integrate the braking limit backward at 1 mm
        // resolution; the coarse profile may not exceed it anywhere.
        let fine_ds = 0.001;
        let mut v_fine = 0.0f64;
        let mut station = (n - 1) as f64 * ds;
        let mut oracle_at = vec![0.0; n];
        oracle_at[n - 1] = 0.0;
        while station > 0.0 {
            v_fine = (v_fine * v_fine + 2.0 * 14.0 * fine_ds).sqrt();
            station -= fine_ds;
            let idx = (station / ds).round() as usize;
            if (station - idx as f64 * ds).abs() < fine_ds / 2.0 && idx < n {
                oracle_at[idx] = v_fine.min(80.0);
            }
        }
        for i in 0..n {
            assert!(
                v[i] <= oracle_at[i].max(v[i] - 1.0) + 1e-6 || v[i] <= oracle_at[i] + 1e-6,
                "profile {} exceeds oracle {} at {}",
                v[i],
                oracle_at[i],
                i
            );
        }
        // And near the end the profile must actually decrease.
        assert!(v[n - 2] > v[n - 1] && v[n - 2] < v[n - 10]);
    }

    #[test]
    fn profile_is_idempotent() {
        let mut k = vec![0.0; 300];
        for (i, ki) in k.iter_mut().enumerate() {
            if (100..200).contains(&i) {
                *ki = 0.004;
            }
        }
        let lim = limits(12.0, 6.0, 80.0);
        let first = velocity_profile(&k, 2.0, &lim, 70.0, 20.0);
        let second = velocity_profile(&k, 2.0, &lim, first[0], *first.last().unwrap());
        for (a, b) in first.iter().zip(&second) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn profile_never_exceeds_lateral_cap() {
        let k: Vec<f64> = (0..500).map(|i| 0.006 * ((i as f64) * 0.03).sin()).collect();
        let lim = limits(13.0, 7.0, 75.0);
        let v = velocity_profile(&k, 1.0, &lim, 75.0, f64::INFINITY);
        for (i, &s) in v.iter().enumerate() {
            assert!(s <= lateral_cap(k[i], &lim) + 1e-12);
        }
    }

    #[test]
    fn friction_circle_holds_at_every_grid_point() {
        let k: Vec<f64> = (0..400)
            .map(|i| if (150..250).contains(&i) { 0.008 } else { 0.0 })
            .collect();
        let lim = limits(12.0, 8.0, 90.0);
        let v = velocity_profile(&k, 1.0, &lim, 90.0, 10.0);
        for i in 0..v.len() - 1 {
            let a_lon = (v[i + 1] * v[i + 1] - v[i] * v[i]) / 2.0;
            let a_lat = v[i] * v[i] * k[i].abs();
            let ratio = a_lon.hypot(a_lat) / 12.0;
            assert!(ratio <= 1.0 + 1e-9, "friction ratio {ratio} at {i}");
        }
    }
}
