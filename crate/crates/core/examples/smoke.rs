use racesim_core::sim::{run_scenario, Scenario, Verdict};
use std::path::Path;

fn main() {
    let mut scenario = Scenario::load(Path::new("scenarios/clear_lap.json")).unwrap();
    scenario.cfg.log.record_plans = true;
    let log = run_scenario(&scenario).unwrap();
    println!("verdict {:?} sim_time {:.2} laps {:.3}", log.meta.verdict, log.meta.sim_time_s, log.meta.laps[0]);
    let mut max_n = 0.0f64; let mut nonopt = 0; let mut peak = 0.0f64;
    for r in log.rows.iter().filter(|r| r.agent == 0) {
        max_n = max_n.max(r.n_m.abs());
        if r.plan_status != "optimal" { nonopt += 1; }
    }
    for rec in &log.plans { for p in &rec.plan.samples { peak = peak.max(p.a_lon.hypot(p.a_lat) / rec.plan.a_max); } }
    println!("max |n| {max_n:.3}, non-optimal rows {nonopt}, peak friction {peak:.5}");
    assert!(matches!(log.meta.verdict, Verdict::Clean));
}
