//! Track geometry: closed/open centerline with arc-length parameterization,
//! curvature, track-limit queries and Frenet <-> Cartesian conversion.
//!
//! The centerline is resampled to uniform station spacing (1 m by default) so
//! station lookup is O(1). Lateral offsets are left-positive; closed tracks
//! are oriented counter-clockwise.

use crate::geom::{wrap_angle, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SPACING_M: f64 = 1.0;
const CURVATURE_SMOOTH_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("track needs at least 4 centerline points, got {0}")]
    TooFewPoints(usize),
    #[error("duplicate consecutive centerline points at index {0}")]
    DuplicatePoint(usize),
    #[error("closed flag set but endpoints are {gap:.1} m apart")]
    OpenInputMarkedClosed { gap: f64 },
    #[error("centerline self-intersects (segments {0} and {1})")]
    SelfIntersecting(usize, usize),
    #[error("non-positive track width at input point {0}")]
    NonPositiveWidth(usize),
    #[error("curvature of closed track integrates to {0:.4} rad, expected +/-2pi")]
    BadTurningNumber(f64),
    #[error("corridor collapsed at s={s:.1}: margin {margin:.2} m exceeds half-width")]
    CorridorCollapsed { s: f64, margin: f64 },
    #[error("track file: {0}")]
    File(String),
}

/// Track-relative pose: station, lateral offset, heading offset, speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrenetPose {
    /// Station along the centerline, wrapped to [0, L) on closed tracks.
    pub s: f64,
    /// Signed lateral offset, left-positive.
    pub n: f64,
    /// Heading offset versus the track tangent.
    pub mu: f64,
    /// Speed magnitude.
    pub v: f64,
}

/// Result of projecting a Cartesian point onto the centerline.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub s: f64,
    pub n: f64,
    /// Set when a second projection candidate was equidistant within
    /// numerical precision; the smaller station wins in that case.
    pub ambiguous: bool,
}

/// On-disk track description: centerline plus per-point widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub comment: String,
    pub closed: bool,
    pub x_m: Vec<f64>,
    pub y_m: Vec<f64>,
    pub w_left_m: Vec<f64>,
    pub w_right_m: Vec<f64>,
}

/// Immutable track model; safe to share across threads.
#[derive(Debug, Clone)]
pub struct TrackModel {
    centerline: Vec<Vec2>,
    cum_station: Vec<f64>,
    curvature: Vec<f64>,
    width_left: Vec<f64>,
    width_right: Vec<f64>,
    closed: bool,
    total_length: f64,
    spacing: f64,
    /// Per-sample unit tangents of the polyline segment starting at that sample.
    seg_dir: Vec<Vec2>,
    grid: SegmentGrid,
}

impl TrackModel {
    pub fn from_file(path: &std::path::Path) -> Result<Self, TrackError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| TrackError::File(format!("{}: {e}", path.display())))?;
        let file: TrackFile = serde_json::from_str(&raw)
            .map_err(|e| TrackError::File(format!("{}: {e}", path.display())))?;
        Self::from_track_file(&file)
    }

    pub fn from_track_file(file: &TrackFile) -> Result<Self, TrackError> {
        if file.x_m.len() != file.y_m.len()
            || file.x_m.len() != file.w_left_m.len()
            || file.x_m.len() != file.w_right_m.len()
        {
            return Err(TrackError::File(
                "x_m, y_m, w_left_m, w_right_m must have equal length".into(),
            ));
        }
        let pts: Vec<Vec2> = file
            .x_m
            .iter()
            .zip(&file.y_m)
            .map(|(&x, &y)| Vec2::new(x, y))
            .collect();
        let widths: Vec<(f64, f64)> = file
            .w_left_m
            .iter()
            .zip(&file.w_right_m)
            .map(|(&l, &r)| (l, r))
            .collect();
        build_track(&pts, &widths, file.closed, DEFAULT_SPACING_M)
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn num_samples(&self) -> usize {
        self.centerline.len()
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }

    pub fn cum_station(&self) -> &[f64] {
        &self.cum_station
    }

    pub fn curvature_samples(&self) -> &[f64] {
        &self.curvature
    }

    /// Wrap a station into [0, L) (closed) or clamp to [0, L] (open).
    pub fn wrap_station(&self, s: f64) -> f64 {
        if self.closed {
            s.rem_euclid(self.total_length)
        } else {
            s.clamp(0.0, self.total_length)
        }
    }

    /// Signed forward distance from `from` to `to` along the track.
    /// On closed tracks the result lies in [-L/2, L/2).
    pub fn station_diff(&self, from: f64, to: f64) -> f64 {
        if self.closed {
            let mut d = (to - from).rem_euclid(self.total_length);
            if d >= self.total_length / 2.0 {
                d -= self.total_length;
            }
            d
        } else {
            to - from
        }
    }

    fn sample_index(&self, s: f64) -> (usize, f64) {
        let s = self.wrap_station(s);
        let idx = (s / self.spacing) as usize;
        let idx = idx.min(self.centerline.len() - 1);
        let frac = (s - self.cum_station[idx]) / self.spacing;
        (idx, frac.clamp(0.0, 1.0))
    }

    /// Signed curvature at station `s` (linear interpolation between samples).
    pub fn curvature_at(&self, s: f64) -> f64 {
        let (i, t) = self.sample_index(s);
        let j = self.next_index(i);
        self.curvature[i] * (1.0 - t) + self.curvature[j] * t
    }

    /// (width_left, width_right) at station `s`.
    pub fn width_at(&self, s: f64) -> (f64, f64) {
        let (i, t) = self.sample_index(s);
        let j = self.next_index(i);
        (
            self.width_left[i] * (1.0 - t) + self.width_left[j] * t,
            self.width_right[i] * (1.0 - t) + self.width_right[j] * t,
        )
    }

    /// Admissible lateral band (n_min, n_max) at station `s` after shrinking
    /// the physical track limits by `margin` (half vehicle width + safety).
    pub fn corridor_at(&self, s: f64, margin: f64) -> Result<(f64, f64), TrackError> {
        let (wl, wr) = self.width_at(s);
        let n_min = -wr + margin;
        let n_max = wl - margin;
        if n_min >= n_max {
            return Err(TrackError::CorridorCollapsed { s, margin });
        }
        Ok((n_min, n_max))
    }

    fn next_index(&self, i: usize) -> usize {
        if i + 1 < self.centerline.len() {
            i + 1
        } else if self.closed {
            0
        } else {
            i
        }
    }

    /// Centerline point and segment tangent at station `s`.
    pub fn point_at(&self, s: f64) -> (Vec2, Vec2) {
        let (i, t) = self.sample_index(s);
        let dir = self.seg_dir[i];
        let p = self.centerline[i] + dir.scaled(t * self.spacing);
        (p, dir)
    }

    /// Frenet -> Cartesian. Returns (position, heading).
    pub fn frenet_to_cart(&self, pose: &FrenetPose) -> (Vec2, f64) {
        let (base, dir) = self.point_at(pose.s);
        let pos = base + dir.perp_left().scaled(pose.n);
        let heading = wrap_angle(dir.heading() + pose.mu);
        (pos, heading)
    }

    /// Cartesian -> Frenet using the nearest-point projection.
    pub fn cart_to_frenet(&self, point: Vec2, heading: f64, speed: f64) -> FrenetPose {
        let proj = self.project(point);
        let (_, dir) = self.point_at(proj.s);
        FrenetPose {
            s: proj.s,
            n: proj.n,
            mu: wrap_angle(heading - dir.heading()),
            v: speed,
        }
    }

    /// Nearest-point projection with a station hint to keep the search local.
    pub fn project_near(&self, point: Vec2, s_hint: f64, window: f64) -> Projection {
        let lo = s_hint - window;
        let hi = s_hint + window;
        let n_seg = self.segment_count();
        let i_lo = (self.wrap_station(lo) / self.spacing) as usize % n_seg;
        let span = ((hi - lo) / self.spacing).ceil() as usize + 1;
        let mut best = Candidate::NONE;
        let mut second = Candidate::NONE;
        for k in 0..span.min(n_seg) {
            let i = (i_lo + k) % n_seg;
            self.consider_segment(i, point, &mut best, &mut second);
        }
        self.finish_projection(point, best, second)
    }

    /// Nearest-point projection over the whole track (grid-accelerated).
    pub fn project(&self, point: Vec2) -> Projection {
        let mut best = Candidate::NONE;
        let mut second = Candidate::NONE;
        let mut visited = 0usize;
        let n_seg = self.segment_count();
        let (cx, cy) = self.grid.cell_of(point);
        let mut ring = 0i64;
        loop {
            let mut any = false;
            self.grid.for_ring(cx, cy, ring, |seg_list| {
                any = true;
                for &i in seg_list {
                    self.consider_segment(i as usize, point, &mut best, &mut second);
                    visited += 1;
                }
            });
            // Expand until the closest possible distance of the next ring
            // exceeds the best found so far.
            let ring_min_dist = (ring as f64) * self.grid.cell;
            if best.dist_sq.is_finite() && ring_min_dist * ring_min_dist > best.dist_sq {
                break;
            }
            if !any && visited >= n_seg {
                break;
            }
            ring += 1;
            if ring > self.grid.max_ring() {
                break;
            }
        }
        self.finish_projection(point, best, second)
    }

    fn segment_count(&self) -> usize {
        if self.closed {
            self.centerline.len()
        } else {
            self.centerline.len() - 1
        }
    }

    fn consider_segment(&self, i: usize, point: Vec2, best: &mut Candidate, second: &mut Candidate) {
        let a = self.centerline[i];
        let dir = self.seg_dir[i];
        let seg_len = self.segment_length(i);
        let rel = point - a;
        let t = (rel.dot(dir) / seg_len).clamp(0.0, 1.0);
        let foot = a + dir.scaled(t * seg_len);
        let d2 = point.dist(foot).powi(2);
        let s = self.cum_station[i] + t * seg_len;
        let s = if self.closed && s >= self.total_length {
            s - self.total_length
        } else {
            s
        };
        let cand = Candidate { dist_sq: d2, s, seg: i };
        // Strict improvement keeps the smaller-s candidate on exact ties.
        if d2 < best.dist_sq || (d2 == best.dist_sq && s < best.s) {
            if best.seg != cand.seg {
                *second = *best;
            }
            *best = cand;
        } else if d2 < second.dist_sq && i != best.seg {
            *second = cand;
        }
    }

    fn segment_length(&self, i: usize) -> f64 {
        if i + 1 < self.cum_station.len() {
            self.cum_station[i + 1] - self.cum_station[i]
        } else {
            self.total_length - self.cum_station[i]
        }
    }

    fn finish_projection(&self, point: Vec2, best: Candidate, second: Candidate) -> Projection {
        let (base, dir) = {
            let i = best.seg;
            let a = self.centerline[i];
            let d = self.seg_dir[i];
            let t = (best.s - self.cum_station[i]).max(0.0);
            (a + d.scaled(t), d)
        };
        let n = (point - base).dot(dir.perp_left());
        // Ambiguous when a non-adjacent candidate is equidistant to precision.
        let ambiguous = second.dist_sq.is_finite()
            && (second.dist_sq - best.dist_sq).abs() <= 1e-9 * (1.0 + best.dist_sq)
            && self.station_diff(best.s, second.s).abs() > 2.0 * self.spacing;
        Projection { s: best.s, n, ambiguous }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist_sq: f64,
    s: f64,
    seg: usize,
}

impl Candidate {
    const NONE: Candidate = Candidate {
        dist_sq: f64::INFINITY,
        s: f64::INFINITY,
        seg: usize::MAX,
    };
}

/// Uniform spatial hash over centerline segments.
#[derive(Debug, Clone)]
struct SegmentGrid {
    cell: f64,
    min: Vec2,
    nx: i64,
    ny: i64,
    cells: Vec<Vec<u32>>,
}

impl SegmentGrid {
    fn build(points: &[Vec2], closed: bool, cell: f64) -> SegmentGrid {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        let pad = cell;
        min = min - Vec2::new(pad, pad);
        max = max + Vec2::new(pad, pad);
        let nx = (((max.x - min.x) / cell).ceil() as i64).max(1);
        let ny = (((max.y - min.y) / cell).ceil() as i64).max(1);
        let mut grid = SegmentGrid {
            cell,
            min,
            nx,
            ny,
            cells: vec![Vec::new(); (nx * ny) as usize],
        };
        let n_seg = if closed { points.len() } else { points.len() - 1 };
        for i in 0..n_seg {
            let a = points[i];
            let b = points[(i + 1) % points.len()];
            let (ax, ay) = grid.cell_of(a);
            let (bx, by) = grid.cell_of(b);
            for gx in ax.min(bx)..=ax.max(bx) {
                for gy in ay.min(by)..=ay.max(by) {
                    if let Some(idx) = grid.index(gx, gy) {
                        grid.cells[idx].push(i as u32);
                    }
                }
            }
        }
        grid
    }

    fn cell_of(&self, p: Vec2) -> (i64, i64) {
        (
            ((p.x - self.min.x) / self.cell).floor() as i64,
            ((p.y - self.min.y) / self.cell).floor() as i64,
        )
    }

    fn index(&self, gx: i64, gy: i64) -> Option<usize> {
        if gx < 0 || gy < 0 || gx >= self.nx || gy >= self.ny {
            None
        } else {
            Some((gy * self.nx + gx) as usize)
        }
    }

    fn max_ring(&self) -> i64 {
        self.nx.max(self.ny) + 1
    }

    fn for_ring(&self, cx: i64, cy: i64, ring: i64, mut f: impl FnMut(&[u32])) {
        if ring == 0 {
            if let Some(i) = self.index(cx, cy) {
                if !self.cells[i].is_empty() {
                    f(&self.cells[i]);
                }
            }
            return;
        }
        for gx in (cx - ring)..=(cx + ring) {
            for gy in [cy - ring, cy + ring] {
                if let Some(i) = self.index(gx, gy) {
                    if !self.cells[i].is_empty() {
                        f(&self.cells[i]);
                    }
                }
            }
        }
        for gy in (cy - ring + 1)..=(cy + ring - 1) {
            for gx in [cx - ring, cx + ring] {
                if let Some(i) = self.index(gx, gy) {
                    if !self.cells[i].is_empty() {
                        f(&self.cells[i]);
                    }
                }
            }
        }
    }
}

/// Build a track model from raw centerline points and per-point
/// (width_left, width_right) pairs.
///
/// The centerline is resampled to uniform spacing; curvature comes from
/// three-point (Menger) estimates smoothed with a short moving average.
pub fn build_track(
    points: &[Vec2],
    widths: &[(f64, f64)],
    closed: bool,
    spacing: f64,
) -> Result<TrackModel, TrackError> {
    let mut pts: Vec<Vec2> = points.to_vec();
    let mut wid: Vec<(f64, f64)> = widths.to_vec();
    assert_eq!(pts.len(), wid.len(), "one width pair per centerline point");
    // Closed input may or may not repeat the first point; normalize to "not".
    if closed && pts.len() >= 2 && pts[0].dist(*pts.last().unwrap()) < 1e-9 {
        pts.pop();
        wid.pop();
    }
    if pts.len() < 4 {
        return Err(TrackError::TooFewPoints(pts.len()));
    }
    for (i, w) in wid.iter().enumerate() {
        if w.0 <= 0.0 || w.1 <= 0.0 {
            return Err(TrackError::NonPositiveWidth(i));
        }
    }
    let mut seg_lens = Vec::with_capacity(pts.len());
    for i in 0..pts.len() - 1 {
        let d = pts[i].dist(pts[i + 1]);
        if d < 1e-9 {
            return Err(TrackError::DuplicatePoint(i));
        }
        seg_lens.push(d);
    }
    if closed {
        let gap = pts.last().unwrap().dist(pts[0]);
        let median = {
            let mut v = seg_lens.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        if gap > 3.0 * median.max(spacing) {
            return Err(TrackError::OpenInputMarkedClosed { gap });
        }
        if gap < 1e-9 {
            return Err(TrackError::DuplicatePoint(pts.len() - 1));
        }
        seg_lens.push(gap);
        check_self_intersection(&pts)?;
    }
    let input_total: f64 = seg_lens.iter().sum();

    // Resample to uniform station spacing.
    let (resampled, ds, total_length) = if closed {
        let n = (input_total / spacing).round().max(8.0) as usize;
        let ds = input_total / n as f64;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(interp_polyline(&pts, &seg_lens, k as f64 * ds, closed));
        }
        (out, ds, input_total)
    } else {
        let n = ((input_total / spacing).round() as usize).max(2) + 1;
        let ds = input_total / (n - 1) as f64;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(interp_polyline(&pts, &seg_lens, k as f64 * ds, closed));
        }
        (out, ds, input_total)
    };

    // Widths resampled on the same station grid.
    let mut input_station = Vec::with_capacity(pts.len() + 1);
    input_station.push(0.0);
    for l in &seg_lens {
        input_station.push(input_station.last().unwrap() + l);
    }
    let (width_left, width_right): (Vec<f64>, Vec<f64>) = (0..resampled.len())
        .map(|k| {
            let s = k as f64 * ds;
            interp_width(&wid, &input_station, s, closed)
        })
        .unzip();

    let cum_station: Vec<f64> = (0..resampled.len()).map(|k| k as f64 * ds).collect();
    let median_spacing = {
        let mut v = seg_lens.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let curvature = {
        let raw = fit_curvature(&resampled, closed, ds, median_spacing);
        smooth_cyclic(&raw, CURVATURE_SMOOTH_WINDOW, closed)
    };
    if closed {
        let integral: f64 = curvature.iter().map(|k| k * ds).sum();
        if (integral.abs() - 2.0 * std::f64::consts::PI).abs() > 1e-3 {
            return Err(TrackError::BadTurningNumber(integral));
        }
    }
    let seg_dir: Vec<Vec2> = (0..resampled.len())
        .map(|i| {
            let j = if i + 1 < resampled.len() {
                i + 1
            } else if closed {
                0
            } else {
                return (resampled[i] - resampled[i - 1]).unit();
            };
            (resampled[j] - resampled[i]).unit()
        })
        .collect();

    let grid = SegmentGrid::build(&resampled, closed, 16.0);
    Ok(TrackModel {
        centerline: resampled,
        cum_station,
        curvature,
        width_left,
        width_right,
        closed,
        total_length,
        spacing: ds,
        seg_dir,
        grid,
    })
}

fn interp_polyline(pts: &[Vec2], seg_lens: &[f64], s: f64, closed: bool) -> Vec2 {
    let mut acc = 0.0;
    for (i, &l) in seg_lens.iter().enumerate() {
        if s <= acc + l || i == seg_lens.len() - 1 {
            let t = ((s - acc) / l).clamp(0.0, 1.0);
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            return a + (b - a).scaled(t);
        }
        acc += l;
    }
    let _ = closed;
    *pts.last().unwrap()
}

fn interp_width(wid: &[(f64, f64)], station: &[f64], s: f64, closed: bool) -> (f64, f64) {
    let n = wid.len();
    for i in 0..station.len() - 1 {
        if s <= station[i + 1] {
            let t = ((s - station[i]) / (station[i + 1] - station[i])).clamp(0.0, 1.0);
            let a = wid[i];
            let b = wid[(i + 1) % n];
            return (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
        }
    }
    let _ = closed;
    wid[n - 1]
}

/// Signed curvature per resampled point from a local least-squares quadratic
/// fit in a chord-aligned frame. The window scales with the input sampling
/// so chord-polygon artifacts of coarse survey data average out.
fn fit_curvature(pts: &[Vec2], closed: bool, ds: f64, input_spacing: f64) -> Vec<f64> {
    let n = pts.len();
    let half_m = (1.6 * input_spacing).max(3.0).min(12.0);
    let w = ((half_m / ds).round() as i64).max(2);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let index = |d: i64| -> usize {
            let j = i as i64 + d;
            if closed {
                j.rem_euclid(n as i64) as usize
            } else {
                j.clamp(0, n as i64 - 1) as usize
            }
        };
        let first = pts[index(-w)];
        let last = pts[index(w)];
        let chord = (last - first).unit();
        if chord.norm_sq() == 0.0 {
            continue;
        }
        let normal = chord.perp_left();
        let origin = pts[i];
        // Normal equations for y = a + b x + c x^2 in the chord frame.
        let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
        let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
        let mut count = 0.0;
        for d in -w..=w {
            let p = pts[index(d)] - origin;
            let x = p.dot(chord);
            let y = p.dot(normal);
            let x2 = x * x;
            s1 += x;
            s2 += x2;
            s3 += x2 * x;
            s4 += x2 * x2;
            t0 += y;
            t1 += x * y;
            t2 += x2 * y;
            count += 1.0;
        }
        // Solve [count s1 s2; s1 s2 s3; s2 s3 s4] [a b c]' = [t0 t1 t2]'.
        let m = [[count, s1, s2], [s1, s2, s3], [s2, s3, s4]];
        let det = det3(&m);
        if det.abs() < 1e-12 {
            continue;
        }
        let mc = [[count, s1, t0], [s1, s2, t1], [s2, s3, t2]];
        let mb = [[count, t0, s2], [s1, t1, s3], [s2, t2, s4]];
        let c = det3(&mc) / det;
        let b = det3(&mb) / det;
        let raw = 2.0 * c / (1.0 + b * b).powf(1.5);
        // A quadratic fitted to a circular arc over [-L, L] overestimates the
        // curvature by the x^4 projection term (3/14) (kappa L)^2; remove it.
        let l_eff = w as f64 * ds;
        let correction = (1.0 - (3.0 / 14.0) * (raw * l_eff).powi(2)).clamp(0.9, 1.0);
        out[i] = raw * correction;
    }
    out
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn smooth_cyclic(values: &[f64], window: usize, closed: bool) -> Vec<f64> {
    let n = values.len();
    let half = window / 2;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for d in -(half as i64)..=(half as i64) {
            let j = i as i64 + d;
            let j = if closed {
                j.rem_euclid(n as i64) as usize
            } else if j < 0 || j >= n as i64 {
                continue;
            } else {
                j as usize
            };
            sum += values[j];
            count += 1;
        }
        out[i] = sum / count as f64;
    }
    out
}

fn check_self_intersection(pts: &[Vec2]) -> Result<(), TrackError> {
    let n = pts.len();
    let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
    for i in 0..n {
        for j in i + 2..n {
            // Skip adjacent segments (they share an endpoint).
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if segments_cross(a, b, c, d) {
                return Err(TrackError::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}
