use racesim_core::dynamics::*;

// Steady-state cornering response at fixed speed: sweep delta, report a_lat.
fn main() {
    let params = VehicleParams::default();
    for &v_target in &[40.0, 55.0, 62.5, 70.0] {
        println!("v = {v_target}");
        for i in 0..12 {
            let delta = 0.004 + 0.003 * i as f64;
            let mut state = VehicleState { x: 0.0, y: 0.0, psi: 0.0, vx: v_target, vy: 0.0, r: 0.0, delta, ax_cmd_filtered: 0.0 };
            let mut diverged = false;
            for _ in 0..6000 {
                let c = Controls { delta_cmd: delta, ax_cmd: 3.0 * (v_target - state.vx) };
                state = match step_rk4(&state, &c, &params, 0.005, &DisturbanceSample::default()) {
                    Ok(s) => s,
                    Err(_) => { diverged = true; break; }
                };
                if state.r.abs() > 1.5 { diverged = true; break; }
            }
            if diverged {
                println!("  delta={delta:.4} DIVERGED");
                continue;
            }
            let a_lat = state.vx * state.r;
            let kappa = state.r / state.vx.max(1.0);
            let ideal = (params.wheelbase() * kappa).atan();
            println!("  delta={delta:.4} -> a_lat={a_lat:6.2} kappa={kappa:.5} L*kappa={ideal:.4} extra={:.4} beta={:.4}", delta - ideal, (state.vy/state.vx).atan());
        }
    }
}
