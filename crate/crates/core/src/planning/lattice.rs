//! Spatio-temporal lattice: layered (station, lateral offset, speed) graph
//! with time propagated along paths from the start node.
//!
//! Layers sit on an absolute station grid (multiples of the layer spacing)
//! so consecutive replans in a static world produce matching node sequences.
//! Opponents that do not move over the prediction horizon block edges at
//! build time; moving opponents are checked against path entry times during
//! the search sweep.

use super::profile::lateral_cap;
use super::PlannerConfig;
use crate::prediction::PredictedTrajectory;
use crate::track::{FrenetPose, TrackModel};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("ego outside the drivable corridor: n = {n:.2} not in [{n_min:.2}, {n_max:.2}]")]
    StartOutsideCorridor { n: f64, n_min: f64, n_max: f64 },
    #[error("no feasible edge out of the start state")]
    StartInfeasible,
    #[error("no path reaches the final lattice layer")]
    NoPath,
    #[error("lattice has no layers (horizon too short)")]
    EmptyLattice,
    #[error("corridor collapsed: {0}")]
    Corridor(#[from] crate::track::TrackError),
    #[error("reconstructed trajectory conflicts with a predicted opponent at t = {t:.2} s (ego s={s:.1} n={n:.2})")]
    ValidationConflict { t: f64, s: f64, n: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct LatticeNode {
    pub layer: u32,
    pub s: f64,
    pub n: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LatticeEdge {
    /// Source node index; `u32::MAX` marks the virtual start node.
    pub from: u32,
    pub to: u32,
    /// Station distance covered by this edge.
    pub ds: f64,
    /// Traversal time at the mean edge speed.
    pub dt: f64,
    /// Static cost: traversal time plus lateral-offset and smoothness terms.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LayerInfo {
    pub s: f64,
    pub node_start: u32,
    pub node_end: u32,
}

#[derive(Debug)]
pub struct LatticeGraph {
    pub nodes: Vec<LatticeNode>,
    pub layers: Vec<LayerInfo>,
    /// Out-edges grouped by source node (CSR layout).
    pub edges: Vec<LatticeEdge>,
    pub edge_start: Vec<u32>,
    pub start_edges: Vec<LatticeEdge>,
    pub start: FrenetPose,
}

impl LatticeGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len() + self.start_edges.len()
    }

    pub fn out_edges(&self, node: u32) -> &[LatticeEdge] {
        let a = self.edge_start[node as usize] as usize;
        let b = self.edge_start[node as usize + 1] as usize;
        &self.edges[a..b]
    }
}

/// Static obstacle footprint in Frenet space, pre-inflated with the ego
/// half-dimensions and the worst-case prediction margins.
#[derive(Debug, Clone, Copy)]
pub struct StaticBlock {
    pub s: f64,
    pub n: f64,
    pub half_len: f64,
    pub half_wid: f64,
}

/// Split predictions into build-time static blocks and search-time dynamic
/// obstacles.
pub struct ObstacleSet<'a> {
    pub static_blocks: Vec<StaticBlock>,
    pub dynamic: Vec<&'a PredictedTrajectory>,
    ego_half_len: f64,
    ego_half_wid: f64,
    /// Extra margin (both axes) used during the search: covers geometric and
    /// timing differences of the smoothed reconstruction. Zero for validation.
    lat_margin: f64,
}

impl<'a> ObstacleSet<'a> {
    pub fn new(
        predictions: &'a [PredictedTrajectory],
        track: &TrackModel,
        cfg: &PlannerConfig,
    ) -> Self {
        Self::with_margin(predictions, track, cfg, 0.0)
    }

    pub fn with_margin(
        predictions: &'a [PredictedTrajectory],
        track: &TrackModel,
        cfg: &PlannerConfig,
        lat_margin: f64,
    ) -> Self {
        let mut static_blocks = Vec::new();
        let mut dynamic = Vec::new();
        for pred in predictions {
            if pred.samples.is_empty() {
                continue;
            }
            if pred.is_static(track, 0.25) {
                let first = &pred.samples[0];
                static_blocks.push(StaticBlock {
                    s: first.s,
                    n: first.n,
                    half_len: pred.half_length
                        + cfg.ego_half_length_m
                        + pred.inflation.lon_max()
                        + lat_margin,
                    half_wid: pred.half_width
                        + cfg.ego_half_width_m
                        + pred.inflation.lat_max()
                        + lat_margin,
                });
            } else {
                dynamic.push(pred);
            }
        }
        ObstacleSet {
            static_blocks,
            dynamic,
            ego_half_len: cfg.ego_half_length_m,
            ego_half_wid: cfg.ego_half_width_m,
            lat_margin,
        }
    }

    pub fn point_blocked_static(&self, track: &TrackModel, s: f64, n: f64) -> bool {
        self.static_blocks.iter().any(|b| {
            track.station_diff(b.s, s).abs() <= b.half_len && (n - b.n).abs() <= b.half_wid
        })
    }

    pub fn point_blocked_dynamic(&self, track: &TrackModel, s: f64, n: f64, t: f64) -> bool {
        self.dynamic.iter().any(|pred| {
            let (s_o, n_o, _) = pred.state_at(t, track);
            track.station_diff(s_o, s).abs()
                <= pred.half_length + self.ego_half_len + pred.inflation.lon_at(t) + self.lat_margin
                && (n - n_o).abs()
                    <= pred.half_width
                        + self.ego_half_wid
                        + pred.inflation.lat_at(t)
                        + self.lat_margin
        })
    }

    pub fn point_blocked(&self, track: &TrackModel, s: f64, n: f64, t: f64) -> bool {
        self.point_blocked_static(track, s, n) || self.point_blocked_dynamic(track, s, n, t)
    }
}

/// Mean curvature of the lateral transition between two offsets one layer
/// apart, modeled as a parabolic blend entered track-parallel.
fn transition_curvature(dn: f64, ds: f64) -> f64 {
    dn.abs() / (ds * ds)
}

struct EdgeCheck<'a> {
    track: &'a TrackModel,
    cfg: &'a PlannerConfig,
}

impl EdgeCheck<'_> {
    /// Friction-circle feasibility of an edge: (a) lateral acceleration from
    /// the implied transition curvature plus track curvature at the edge
    /// speed, (b) the speed change achievable within the remaining
    /// longitudinal budget.
    fn feasible(
        &self,
        s_from: f64,
        n_from: f64,
        v_from: f64,
        s_to: f64,
        n_to: f64,
        v_to: f64,
        from_start: bool,
    ) -> Option<(f64, f64)> {
        let ds = self.track.station_diff(s_from, s_to);
        if ds <= 0.1 {
            return None;
        }
        let s_mid = self.track.wrap_station(s_from + ds / 2.0);
        let kappa = transition_curvature(n_to - n_from, ds) + self.track.curvature_at(s_mid).abs();
        self.feasible_pre(ds, kappa, v_from, v_to, from_start)
    }

    /// Same feasibility test with the edge geometry (station gap and total
    /// curvature) precomputed by the caller.
    fn feasible_pre(
        &self,
        ds: f64,
        kappa: f64,
        v_from: f64,
        v_to: f64,
        from_start: bool,
    ) -> Option<(f64, f64)> {
        let cfg = self.cfg;
        if ds <= 0.1 {
            return None;
        }
        let v_edge = 0.5 * (v_from + v_to);
        let a_lat = v_edge * v_edge * kappa;
        let a_max = cfg.limits.a_max;
        let lat_slack = if from_start { 1.05 } else { 1.0 };
        if a_lat > a_max * lat_slack {
            return None;
        }
        let a_avail = (a_max * a_max - (a_lat.min(a_max)) * (a_lat.min(a_max))).sqrt();
        let a_lon = (v_to * v_to - v_from * v_from) / (2.0 * ds);
        let bound = if a_lon >= 0.0 {
            a_avail.min(cfg.limits.a_lon_drive_max)
        } else if from_start {
            // The first edge absorbs the measured state; braking beyond the
            // planning budget is physically available for that.
            a_avail.max(2.0)
        } else {
            a_avail
        };
        if a_lon.abs() > bound + 1e-12 {
            return None;
        }
        let dt = ds / v_edge.max(0.5);
        Some((ds, dt))
    }

    fn cost(&self, ds: f64, dt: f64, n_from: f64, n_to: f64, v_from: f64, v_to: f64) -> f64 {
        let cfg = self.cfg;
        dt + cfg.w_n * 0.5 * (n_from.abs() + n_to.abs()) * ds
            + cfg.w_dn * (n_to - n_from).abs()
            + cfg.w_dv * (v_to - v_from).abs()
    }
}

/// Sampled collision test along the straight Frenet chord of an edge.
fn edge_clear_static(
    obstacles: &ObstacleSet,
    track: &TrackModel,
    s_from: f64,
    n_from: f64,
    s_to: f64,
    n_to: f64,
) -> bool {
    if obstacles.static_blocks.is_empty() {
        return true;
    }
    let ds = track.station_diff(s_from, s_to);
    let s_mid = track.wrap_station(s_from + ds / 2.0);
    let (n_lo, n_hi) = if n_from <= n_to { (n_from, n_to) } else { (n_to, n_from) };
    for b in &obstacles.static_blocks {
        // Cheap interval rejection before sampling the chord.
        if track.station_diff(s_mid, b.s).abs() > ds / 2.0 + b.half_len {
            continue;
        }
        if b.n + b.half_wid < n_lo || b.n - b.half_wid > n_hi {
            continue;
        }
        let count = (ds / 4.0).ceil().max(1.0) as usize;
        for k in 0..=count {
            let w = k as f64 / count as f64;
            let s = track.wrap_station(s_from + w * ds);
            let n = n_from + w * (n_to - n_from);
            if track.station_diff(b.s, s).abs() <= b.half_len && (n - b.n).abs() <= b.half_wid {
                return false;
            }
        }
    }
    true
}

pub(super) fn edge_clear_dynamic(
    obstacles: &ObstacleSet,
    track: &TrackModel,
    s_from: f64,
    n_from: f64,
    s_to: f64,
    n_to: f64,
    t_entry: f64,
    dt: f64,
) -> bool {
    if obstacles.dynamic.is_empty() {
        return true;
    }
    let ds = track.station_diff(s_from, s_to);
    let count = (ds / 4.0).ceil().max(1.0) as usize;
    for k in 0..=count {
        let w = k as f64 / count as f64;
        let s = track.wrap_station(s_from + w * ds);
        let n = n_from + w * (n_to - n_from);
        let t = t_entry + w * dt;
        if obstacles.point_blocked_dynamic(track, s, n, t) {
            return false;
        }
    }
    true
}

/// Build the layered lattice over the horizon ahead of the ego pose.
pub fn build_lattice(
    track: &TrackModel,
    ego: &FrenetPose,
    horizon_m: f64,
    predictions: &[PredictedTrajectory],
    cfg: &PlannerConfig,
) -> Result<(LatticeGraph, Vec<StaticBlock>), PlanError> {
    let margin = cfg.ego_half_width_m + cfg.safety_margin_m;
    let (n_min0, n_max0) = track.corridor_at(ego.s, margin)?;
    if ego.n < n_min0 - 0.5 || ego.n > n_max0 + 0.5 {
        return Err(PlanError::StartOutsideCorridor { n: ego.n, n_min: n_min0, n_max: n_max0 });
    }
    let obstacles = ObstacleSet::with_margin(predictions, track, cfg, cfg.reconstruction_margin_m);

    let ds = cfg.ds_m;
    let layer_count = (horizon_m / ds).round().max(1.0) as usize;
    // Absolute station grid; first layer at least a quarter spacing ahead
    // (infeasibly sharp short first edges are pruned by the edge checks).
    let mut first_k = (ego.s / ds).floor() as i64 + 1;
    if (first_k as f64) * ds - ego.s < ds / 4.0 {
        first_k += 1;
    }

    let mut nodes: Vec<LatticeNode> = Vec::new();
    let mut layers: Vec<LayerInfo> = Vec::with_capacity(layer_count);
    // Per layer: sorted offsets and the shared ascending speed list, for
    // indexed edge enumeration below.
    let mut layer_offsets: Vec<Vec<f64>> = Vec::with_capacity(layer_count);
    let mut layer_speeds: Vec<Vec<f64>> = Vec::with_capacity(layer_count);
    for layer in 0..layer_count {
        let s = track.wrap_station((first_k + layer as i64) as f64 * ds);
        let node_start = nodes.len() as u32;
        let (n_min, n_max) = track.corridor_at(s, margin)?;
        let i_min = (n_min / cfg.dn_m).ceil() as i64;
        let i_max = (n_max / cfg.dn_m).floor() as i64;
        let cap_limits = crate::dynamics::PointMassLimits {
            a_max: cfg.limits.a_max * cfg.cap_reserve_frac,
            ..cfg.limits
        };
        let cap = lateral_cap(track.curvature_at(s), &cap_limits);
        let j_max = (cap / cfg.dv_mps).floor() as i64;
        let mut speeds: Vec<f64> = (1..=j_max.max(0)).map(|j| j as f64 * cfg.dv_mps).collect();
        // Expose the exact lateral cap when it is not on the grid.
        if cap - (j_max as f64) * cfg.dv_mps > 0.25 * cfg.dv_mps || j_max < 1 {
            speeds.push(cap);
        }
        if layer == 0 {
            // The first layer carries the measured ego speed so the off-grid
            // start state always has a zero-speed-change edge available.
            let full_cap = lateral_cap(track.curvature_at(s), &cfg.limits);
            let v = ego.v.min(full_cap + 0.5);
            if speeds.iter().all(|&g| (g - v).abs() > 0.05) {
                speeds.push(v);
            }
        }
        speeds.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut offsets: Vec<f64> = (i_min..=i_max).map(|i| i as f64 * cfg.dn_m).collect();
        if layer == 0 {
            // The first layer also carries the (clamped) measured ego offset
            // when it lies off the cell grid, so a zero-lateral-motion start
            // edge always exists.
            let nearest = (ego.n / cfg.dn_m).round() * cfg.dn_m;
            if (ego.n - nearest).abs() > 0.15 {
                offsets.push(ego.n.clamp(n_min, n_max));
                offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
        }
        for &n in &offsets {
            for &v in &speeds {
                nodes.push(LatticeNode { layer: layer as u32, s, n, v });
            }
        }
        layers.push(LayerInfo { s, node_start, node_end: nodes.len() as u32 });
        layer_offsets.push(offsets);
        layer_speeds.push(speeds);
    }
    if layers.is_empty() {
        return Err(PlanError::EmptyLattice);
    }

    let check = EdgeCheck { track, cfg };
    let max_dn = cfg.max_step_cells as f64 * cfg.dn_m + 1e-9;
    let a_max = cfg.limits.a_max;

    let mut edges: Vec<LatticeEdge> = Vec::new();
    let mut edge_start: Vec<u32> = vec![0; nodes.len() + 1];
    for layer in 0..layer_count.saturating_sub(1) {
        let info = layers[layer];
        let next = layers[layer + 1];
        let ds_edge = track.station_diff(info.s, next.s);
        let kappa_mid = track.curvature_at(track.wrap_station(info.s + ds_edge / 2.0)).abs();
        let from_offsets = &layer_offsets[layer];
        let from_speeds = &layer_speeds[layer];
        let to_offsets = &layer_offsets[layer + 1];
        let to_speeds = &layer_speeds[layer + 1];
        let per_from = from_speeds.len() as u32;
        let per_to = to_speeds.len() as u32;
        for (foi, &n_from) in from_offsets.iter().enumerate() {
            // Geometry and obstacle checks depend only on the offset pair;
            // hoist them out of the speed loops.
            struct Target {
                oi: usize,
                kappa: f64,
                v_pair_cap: f64,
            }
            let mut targets: Vec<Target> = Vec::with_capacity(to_offsets.len());
            for (oi, &n_to) in to_offsets.iter().enumerate() {
                if (n_to - n_from).abs() > max_dn {
                    continue;
                }
                let kappa = transition_curvature(n_to - n_from, ds_edge) + kappa_mid;
                if !edge_clear_static(&obstacles, track, info.s, n_from, next.s, n_to) {
                    continue;
                }
                let v_pair_cap = if kappa > 1e-12 { (a_max / kappa).sqrt() } else { f64::MAX };
                targets.push(Target { oi, kappa, v_pair_cap });
            }
            for (fsi, &v_from) in from_speeds.iter().enumerate() {
                let from_idx = info.node_start + foi as u32 * per_from + fsi as u32;
                edge_start[from_idx as usize] = edges.len() as u32;
                for target in &targets {
                    let n_to = to_offsets[target.oi];
                    let v_to_cap = 2.0 * target.v_pair_cap - v_from;
                    if v_to_cap < to_speeds[0] {
                        continue;
                    }
                    let hi = to_speeds.partition_point(|&v| v <= v_to_cap);
                    let base = next.node_start + target.oi as u32 * per_to;
                    for (si, &v_to) in to_speeds[..hi].iter().enumerate() {
                        if let Some((eds, edt)) = check.feasible_pre(
                            ds_edge,
                            target.kappa,
                            v_from,
                            v_to,
                            false,
                        ) {
                            let cost = check.cost(eds, edt, n_from, n_to, v_from, v_to);
                            edges.push(LatticeEdge {
                                from: from_idx,
                                to: base + si as u32,
                                ds: eds,
                                dt: edt,
                                cost,
                            });
                        }
                    }
                }
                edge_start[from_idx as usize + 1] = edges.len() as u32;
            }
        }
    }
    // Nodes of the final layer have no out-edges; close the CSR ranges.
    let total_edges = edges.len() as u32;
    let last_layer_start = layers.last().unwrap().node_start as usize;
    for entry in edge_start.iter_mut().skip(last_layer_start) {
        *entry = total_edges;
    }

    // Start edges from the measured (off-grid) ego state into layer 0.
    let start_max_dn = (cfg.start_max_step_cells as f64 + 0.5) * cfg.dn_m;
    let mut start_edges = Vec::new();
    let info0 = layers[0];
    for to_idx in info0.node_start..info0.node_end {
        let to = nodes[to_idx as usize];
        if (to.n - ego.n).abs() > start_max_dn {
            continue;
        }
        if let Some((eds, edt)) = check.feasible(ego.s, ego.n, ego.v, to.s, to.n, to.v, true) {
            if !edge_clear_static(&obstacles, track, ego.s, ego.n, to.s, to.n) {
                continue;
            }
            let cost = check.cost(eds, edt, ego.n, to.n, ego.v, to.v);
            start_edges.push(LatticeEdge { from: u32::MAX, to: to_idx, ds: eds, dt: edt, cost });
        }
    }
    if start_edges.is_empty() {
        return Err(PlanError::StartInfeasible);
    }

    let graph = LatticeGraph {
        nodes,
        layers,
        edges,
        edge_start,
        start_edges,
        start: *ego,
    };
    Ok((graph, obstacles.static_blocks))
}

/// Result of the DP sweep: the chosen node chain with entry times and cost.
#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Node indices from layer 0 to the final layer.
    pub chain: Vec<u32>,
    pub cost: f64,
    /// Entry time at each chain node.
    pub times: Vec<f64>,
}

/// Exact single-pass dynamic-programming shortest path over the DAG.
///
/// Entry times are propagated along the currently best path per node and
/// used for the spatio-temporal check against moving opponents; ties are
/// broken deterministically (smaller predecessor |n|, then pass-left, then
/// higher speed).
pub fn search_optimal(
    graph: &LatticeGraph,
    track: &TrackModel,
    predictions: &[PredictedTrajectory],
    cfg: &PlannerConfig,
) -> Result<SearchResult, PlanError> {
    let obstacles = ObstacleSet::with_margin(predictions, track, cfg, cfg.reconstruction_margin_m);
    let n = graph.nodes.len();
    let mut cost = vec![f64::INFINITY; n];
    let mut time = vec![f64::INFINITY; n];
    let mut pred: Vec<u32> = vec![u32::MAX; n];

    let better = |cand_cost: f64,
                  cand_from: u32,
                  cur_cost: f64,
                  cur_from: u32,
                  nodes: &[LatticeNode]|
     -> bool {
        if cand_cost < cur_cost {
            return true;
        }
        if cand_cost > cur_cost || cur_from == u32::MAX {
            return false;
        }
        // Exact cost tie: prefer the predecessor closer to the centerline,
        // then the left-hand one, then the faster one.
        let (cn, cv) = if cand_from == u32::MAX {
            (graph.start.n, graph.start.v)
        } else {
            (nodes[cand_from as usize].n, nodes[cand_from as usize].v)
        };
        let (bn, bv) = (nodes[cur_from as usize].n, nodes[cur_from as usize].v);
        match cn.abs().partial_cmp(&bn.abs()).unwrap() {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => {
                if cn != bn {
                    cn > bn
                } else {
                    cv > bv
                }
            }
        }
    };

    for e in &graph.start_edges {
        let to_node = graph.nodes[e.to as usize];
        if !edge_clear_dynamic(
            &obstacles, track, graph.start.s, graph.start.n, to_node.s, to_node.n, 0.0, e.dt,
        ) {
            continue;
        }
        if better(e.cost, u32::MAX, cost[e.to as usize], pred[e.to as usize], &graph.nodes) {
            cost[e.to as usize] = e.cost;
            time[e.to as usize] = e.dt;
            pred[e.to as usize] = u32::MAX;
        }
    }

    for layer in 0..graph.layers.len().saturating_sub(1) {
        let info = graph.layers[layer];
        for from_idx in info.node_start..info.node_end {
            if !cost[from_idx as usize].is_finite() {
                continue;
            }
            let from = graph.nodes[from_idx as usize];
            let t_entry = time[from_idx as usize];
            for e in graph.out_edges(from_idx) {
                let to = graph.nodes[e.to as usize];
                if !edge_clear_dynamic(
                    &obstacles, track, from.s, from.n, to.s, to.n, t_entry, e.dt,
                ) {
                    continue;
                }
                let cand = cost[from_idx as usize] + e.cost;
                if better(cand, from_idx, cost[e.to as usize], pred[e.to as usize], &graph.nodes) {
                    cost[e.to as usize] = cand;
                    time[e.to as usize] = t_entry + e.dt;
                    pred[e.to as usize] = from_idx;
                }
            }
        }
    }

    // Terminal: cheapest final-layer node; ties to smaller |n|, then left.
    let last = *graph.layers.last().unwrap();
    let mut best: Option<u32> = None;
    for idx in last.node_start..last.node_end {
        if !cost[idx as usize].is_finite() {
            continue;
        }
        best = match best {
            None => Some(idx),
            Some(cur) => {
                let (cc, bc) = (cost[idx as usize], cost[cur as usize]);
                let (cn, bn) = (graph.nodes[idx as usize].n, graph.nodes[cur as usize].n);
                if cc < bc
                    || (cc == bc && cn.abs() < bn.abs())
                    || (cc == bc && cn.abs() == bn.abs() && cn > bn)
                {
                    Some(idx)
                } else {
                    Some(cur)
                }
            }
        };
    }
    let terminal = best.ok_or(PlanError::NoPath)?;

    let mut chain = vec![terminal];
    let mut cur = terminal;
    while pred[cur as usize] != u32::MAX {
        cur = pred[cur as usize];
        chain.push(cur);
    }
    chain.reverse();
    let times = chain.iter().map(|&i| time[i as usize]).collect();
    Ok(SearchResult { chain, cost: cost[terminal as usize], times })
}
