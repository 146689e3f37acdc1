//! Shared fixtures for the criterion benchmarks.

use racesim_core::dynamics::VehicleState;
use racesim_core::geom::Vec2;
use racesim_core::planning::PlannerConfig;
use racesim_core::prediction::{predict_opponent, PredictedTrajectory, PredictionConfig};
use racesim_core::track::{build_track, FrenetPose, TrackModel};

pub fn straight_track(length: f64) -> TrackModel {
    let n = (length / 10.0) as usize;
    let pts: Vec<Vec2> = (0..=n).map(|i| Vec2::new(i as f64 * 10.0, 0.0)).collect();
    let widths = vec![(8.0, 8.0); pts.len()];
    build_track(&pts, &widths, false, 1.0).unwrap()
}

pub fn planner_fixture() -> (TrackModel, FrenetPose, Vec<PredictedTrajectory>, PlannerConfig) {
    let track = straight_track(1500.0);
    let cfg = PlannerConfig::default();
    let ego = FrenetPose { s: 100.0, n: 0.0, mu: 0.0, v: 60.0 };
    let opp_pose = FrenetPose { s: 350.0, n: -1.2, mu: 0.0, v: 45.0 };
    let (pos, heading) = track.frenet_to_cart(&opp_pose);
    let opp_state = VehicleState {
        x: pos.x,
        y: pos.y,
        psi: heading,
        vx: 45.0,
        vy: 0.0,
        r: 0.0,
        delta: 0.0,
        ax_cmd_filtered: 0.0,
    };
    let preds = vec![predict_opponent(
        1,
        &opp_state,
        &track,
        &cfg.limits,
        &PredictionConfig::default(),
        2.45,
        0.95,
    )];
    (track, ego, preds, cfg)
}
