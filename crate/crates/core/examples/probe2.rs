use racesim_core::dynamics::VehicleState;
use racesim_core::planning::{plan_once, PlannerConfig};
use racesim_core::prediction::predict_opponent;
use racesim_core::sim::Scenario;
use racesim_core::track::FrenetPose;
use std::path::Path;

fn main() {
    let scenario = Scenario::load(Path::new("scenarios/two_ahead_fight.json")).unwrap();
    let track = scenario.track.clone();
    let cfg: PlannerConfig = scenario.planner_for(0);
    // Mid-follow state: ego crawling behind opp1; opp1 at 46 m/s, opp2 ahead.
    let make_pred = |id: u32, s: f64, n: f64, v: f64| {
        let pose = FrenetPose { s, n, mu: 0.0, v };
        let (pos, heading) = track.frenet_to_cart(&pose);
        let st = VehicleState { x: pos.x, y: pos.y, psi: heading, vx: v, vy: 0.0, r: v * track.curvature_at(s), delta: 0.0, ax_cmd_filtered: 0.0 };
        let mut limits = cfg.limits;
        limits.v_max = 83.33;
        predict_opponent(id, &st, &track, &limits, &scenario.cfg.prediction, 2.45, 0.95)
    };
    for (ego_s, ego_v, o1, o2) in [
        (260.0, 50.0, (330.0, -1.2, 45.5), (390.0, 1.2, 45.0)),
        (700.0, 48.0, (760.0, -1.2, 45.0), (830.0, 1.2, 44.0)),  // near turn entry
        (150.0, 60.0, (260.0, -1.2, 46.0), (320.0, 1.2, 44.5)),
    ] {
        let preds = vec![make_pred(1, o1.0, o1.1, o1.2), make_pred(2, o2.0, o2.1, o2.2)];
        let ego = FrenetPose { s: ego_s, n: 0.0, mu: 0.0, v: ego_v };
        match plan_once(&track, &ego, &preds, &cfg) {
            Ok(p) => {
                let maxn = p.samples.iter().map(|x| x.n).fold((0.0f64, 0.0f64), |a, b| (a.0.min(b), a.1.max(b)));
                println!("ego s={ego_s} v={ego_v}: {:?} cost {:.2} n range [{:+.1}, {:+.1}] end_v {:.1}", p.homotopy, p.cost, maxn.0, maxn.1, p.samples.last().unwrap().v);
            }
            Err(e) => println!("ego s={ego_s} v={ego_v}: ERROR {e}"),
        }
    }
}
