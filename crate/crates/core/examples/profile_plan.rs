use racesim_core::dynamics::VehicleState;
use racesim_core::planning::{build_lattice, plan_once, search_optimal};
use racesim_core::prediction::predict_opponent;
use racesim_core::sim::Scenario;
use racesim_core::track::FrenetPose;
use std::path::Path;
use std::time::Instant;

fn main() {
    let scenario = Scenario::load(Path::new("scenarios/static_obstacle.json")).unwrap();
    let track = scenario.track.clone();
    let cfg = scenario.planner_for(0);
    let ego = FrenetPose { s: 450.0, n: 0.0, mu: 0.0, v: 69.44 };
    let opp_pose = FrenetPose { s: 700.0, n: -0.75, mu: 0.0, v: 0.0 };
    let (pos, heading) = track.frenet_to_cart(&opp_pose);
    let opp = VehicleState { x: pos.x, y: pos.y, psi: heading, vx: 0.0, vy: 0.0, r: 0.0, delta: 0.0, ax_cmd_filtered: 0.0 };
    let n = 2000;

    let t0 = Instant::now();
    let mut preds = Vec::new();
    for _ in 0..n {
        preds = vec![predict_opponent(1, &opp, &track, &cfg.limits, &scenario.cfg.prediction, 2.45, 0.95)];
    }
    println!("predict: {:.1} us", t0.elapsed().as_secs_f64() / n as f64 * 1e6);

    let t0 = Instant::now();
    let mut graph = None;
    for _ in 0..n {
        graph = Some(build_lattice(&track, &ego, cfg.horizon_m, &preds, &cfg).unwrap());
    }
    println!("build_lattice: {:.1} us", t0.elapsed().as_secs_f64() / n as f64 * 1e6);
    let (g, _) = graph.unwrap();
    println!("  nodes {} edges {}", g.node_count(), g.edge_count());

    let t0 = Instant::now();
    for _ in 0..n {
        let _ = search_optimal(&g, &track, &preds, &cfg).unwrap();
    }
    println!("search: {:.1} us", t0.elapsed().as_secs_f64() / n as f64 * 1e6);

    let t0 = Instant::now();
    for _ in 0..n {
        let _ = plan_once(&track, &ego, &preds, &cfg).unwrap();
    }
    println!("plan_once total: {:.1} us", t0.elapsed().as_secs_f64() / n as f64 * 1e6);
}
