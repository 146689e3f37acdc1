//! Graph-search optimality against exhaustive path enumeration, and
//! collision-freeness of reconstructed plans at high sampling density.

use racesim_core::dynamics::PointMassLimits;
use racesim_core::geom::Vec2;
use racesim_core::planning::{
    build_lattice, plan_once, search_optimal, LatticeGraph, ObstacleSet, PlannerConfig,
};
use racesim_core::prediction::{InflationModel, PredSample, PredictedTrajectory};
use racesim_core::track::{build_track, FrenetPose, TrackModel};

fn straight_track(length: f64) -> TrackModel {
    let n = (length / 10.0) as usize;
    let pts: Vec<Vec2> = (0..=n).map(|i| Vec2::new(i as f64 * 10.0, 0.0)).collect();
    let widths = vec![(8.0, 8.0); pts.len()];
    build_track(&pts, &widths, false, 1.0).unwrap()
}

fn static_opponent(s: f64, n: f64) -> PredictedTrajectory {
    let samples = (0..=50)
        .map(|k| PredSample { t: k as f64 * 0.1, s, n, v: 0.0, pos: Vec2::new(s, n) })
        .collect();
    PredictedTrajectory {
        opponent_id: 9,
        samples,
        horizon: 5.0,
        inflation: InflationModel::default(),
        half_length: 2.45,
        half_width: 0.95,
        clamped: false,
    }
}

/// Exhaustive DFS over all paths, evaluating the same edge costs and static
/// blocking as the DP sweep (independent oracle).
fn enumerate_min_cost(graph: &LatticeGraph) -> Option<(f64, usize)> {
    let last_layer = graph.layers.len() - 1;
    let mut best: Option<f64> = None;
    let mut paths = 0usize;

    fn dfs(
        graph: &LatticeGraph,
        node: u32,
        cost: f64,
        last_layer: usize,
        best: &mut Option<f64>,
        paths: &mut usize,
    ) {
        let info = graph.nodes[node as usize];
        if info.layer as usize == last_layer {
            *paths += 1;
            if best.map(|b| cost < b).unwrap_or(true) {
                *best = Some(cost);
            }
            return;
        }
        for e in graph.out_edges(node) {
            dfs(graph, e.to, cost + e.cost, last_layer, best, paths);
        }
    }

    for e in &graph.start_edges {
        dfs(graph, e.to, e.cost, last_layer, &mut best, &mut paths);
    }
    best.map(|b| (b, paths))
}

/// Deterministic pseudo-random stream for the lattice randomization.
struct Lcg(u64);
impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn dp_cost_equals_enumeration_on_randomized_lattices() {
    let track = straight_track(900.0);
    let mut rng = Lcg(0x5eed);
    let mut checked = 0;
    let mut total_paths = 0usize;
    for case in 0..60 {
        let layers = 3 + (rng.next_f64() * 4.0) as usize; // 3..6
        let cfg = PlannerConfig {
            ds_m: 40.0,
            dn_m: 1.5,
            dv_mps: 12.0 + rng.next_f64() * 10.0,
            horizon_m: layers as f64 * 40.0,
            max_step_cells: 2,
            w_n: 0.002,
            w_dn: 0.05,
            w_dv: 0.01,
            limits: PointMassLimits {
                a_max: 12.0,
                a_lon_drive_max: 8.0,
                v_max: 30.0 + rng.next_f64() * 20.0,
                ..Default::default()
            },
            ..PlannerConfig::default()
        };
        let ego = FrenetPose {
            s: 100.0 + rng.next_f64() * 30.0,
            n: (rng.next_f64() - 0.5) * 3.0,
            mu: 0.0,
            v: 15.0 + rng.next_f64() * 20.0,
        };
        // 0-2 static obstacles at random cells ahead.
        let mut preds = Vec::new();
        for _ in 0..(rng.next_f64() * 3.0) as usize {
            let s = ego.s + 60.0 + rng.next_f64() * (cfg.horizon_m - 80.0);
            let n = (rng.next_f64() - 0.5) * 8.0;
            preds.push(static_opponent(s, n));
        }
        let Ok((graph, _)) = build_lattice(&track, &ego, cfg.horizon_m, &preds, &cfg) else {
            continue;
        };
        let Some((enum_cost, paths)) = enumerate_min_cost(&graph) else {
            continue;
        };
        if paths > 100_000 {
            continue;
        }
        let dp = search_optimal(&graph, &track, &preds, &cfg)
            .unwrap_or_else(|e| panic!("case {case}: DP failed where enumeration found paths: {e}"));
        assert_eq!(dp.cost, enum_cost, "case {case}: DP cost must equal enumeration exactly");
        checked += 1;
        total_paths += paths;
    }
    assert!(checked >= 30, "only {checked} cases were enumerable");
    assert!(total_paths > 10_000, "enumeration too trivial ({total_paths} paths)");
}

#[test]
fn plans_clear_inflated_obstacles_at_dense_sampling() {
    // Collision-freeness of the reconstructed trajectory, checked at 10x the
    // plan sampling density over the validation horizon.
    let track = straight_track(1200.0);
    let cfg = PlannerConfig {
        limits: PointMassLimits { a_max: 12.5, a_lon_drive_max: 9.0, v_max: 70.0, ..Default::default() },
        ..PlannerConfig::default()
    };
    for (obs_n, ego_v) in [(-0.75, 55.0), (0.0, 40.0), (1.5, 65.0), (-2.8, 30.0)] {
        let preds = vec![static_opponent(520.0, obs_n)];
        let ego = FrenetPose { s: 105.0, n: 0.0, mu: 0.0, v: ego_v };
        let plan = plan_once(&track, &ego, &preds, &cfg).expect("plan must exist");
        let obstacles = ObstacleSet::new(&preds, &track, &cfg);
        for w in plan.samples.windows(2) {
            if w[0].t > cfg.validation_horizon_s {
                break;
            }
            for k in 0..10 {
                let f = k as f64 / 10.0;
                let t = w[0].t + f * (w[1].t - w[0].t);
                let s = w[0].s + f * track.station_diff(w[0].s, w[1].s);
                let n = w[0].n + f * (w[1].n - w[0].n);
                assert!(
                    !obstacles.point_blocked(&track, track.wrap_station(s), n, t),
                    "plan intersects inflated obstacle at t={t:.2} s={s:.1} n={n:.2} (obs_n={obs_n}, v={ego_v})"
                );
            }
        }
    }
}

#[test]
fn corridor_containment_of_plans() {
    let track = straight_track(1200.0);
    let cfg = PlannerConfig::default();
    let preds = vec![static_opponent(500.0, -0.75)];
    let ego = FrenetPose { s: 100.0, n: 0.0, mu: 0.0, v: 50.0 };
    let plan = plan_once(&track, &ego, &preds, &cfg).unwrap();
    let margin = cfg.ego_half_width_m + cfg.safety_margin_m;
    for p in &plan.samples {
        let (n_min, n_max) = track.corridor_at(p.s, margin).unwrap();
        assert!(
            p.n >= n_min - 0.3 && p.n <= n_max + 0.3,
            "sample n={} outside corridor [{n_min}, {n_max}]",
            p.n
        );
    }
}
