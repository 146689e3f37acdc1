use racesim_core::sim::{run_scenario, Scenario};
use std::path::Path;

fn main() {
    for name in ["clear_lap", "static_obstacle", "two_ahead_fight", "grid_of_eight"] {
        let mut scenario = Scenario::load(Path::new(&format!("scenarios/{name}.json"))).unwrap();
        scenario.cfg.log.record_plans = true;
        let t0 = std::time::Instant::now();
        let log = run_scenario(&scenario).unwrap();
        let wall = t0.elapsed().as_secs_f64();
        let mut homos = std::collections::BTreeMap::new();
        let mut max_n: f64 = 0.0;
        let mut fb = 0usize;
        for r in log.rows.iter().filter(|r| r.agent == 0) {
            *homos.entry(r.homotopy).or_insert(0usize) += 1;
            max_n = max_n.max(r.n_m.abs());
            if r.plan_status == "fallback-brake" { fb += 1; }
        }
        let mut peak = 0.0f64;
        for rec in &log.plans { for p in &rec.plan.samples { peak = peak.max(p.a_lon.hypot(p.a_lat) / rec.plan.a_max); } }
        println!("{name}: {:?} sim {:.1}s wall {wall:.1}s laps {:.2} max|n| {max_n:.2} fb_rows {fb} friction {peak:.5}", log.meta.verdict, log.meta.sim_time_s, log.meta.laps[0]);
        println!("   homotopies {homos:?}");
    }
}
