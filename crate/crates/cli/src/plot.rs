//! Plot CSV artifacts into static SVG files.

use crate::svg::{Frame, SvgCanvas};
use anyhow::{bail, Result};
use std::collections::BTreeMap;

fn parse_csv(content: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = content.lines();
    let header: Vec<String> = lines
        .next()
        .map(|h| h.split(',').map(|c| c.trim().to_string()).collect())
        .unwrap_or_default();
    if header.is_empty() {
        bail!("empty CSV");
    }
    let rows: Vec<Vec<String>> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|c| c.trim().to_string()).collect())
        .collect();
    if rows.is_empty() {
        bail!("CSV has a header but no data rows");
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

/// Detect the CSV schema and produce the matching plot.
pub fn plot_csv(content: &str, kind: Option<&str>) -> Result<String> {
    let (header, rows) = parse_csv(content)?;
    let looks_sweep = column(&header, "speed_mps").is_some() && column(&header, "min_detection_m").is_some();
    let looks_traj = column(&header, "x_m").is_some() && column(&header, "y_m").is_some();
    match kind {
        Some("sweep") => {
            if !looks_sweep {
                bail!("CSV does not match the sweep schema");
            }
            plot_sweep(&header, &rows)
        }
        Some("trajectory") => {
            if !looks_traj {
                bail!("CSV does not match the trajectory schema");
            }
            plot_trajectory(&header, &rows)
        }
        Some(other) => bail!("unknown plot kind {other:?} (expected sweep|trajectory)"),
        None if looks_sweep => plot_sweep(&header, &rows),
        None if looks_traj => plot_trajectory(&header, &rows),
        None => bail!("unrecognized CSV schema"),
    }
}

/// Detection distance and ideal braking distance over speed.
fn plot_sweep(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let c_speed = column(header, "speed_mps").unwrap();
    let c_min = column(header, "min_detection_m").unwrap();
    let c_brake = column(header, "brake_distance_m").unwrap();
    let mut detection = Vec::new();
    let mut brake = Vec::new();
    for row in rows {
        let speed_kph: f64 = row[c_speed].parse::<f64>().map(|v| v * 3.6).unwrap_or(f64::NAN);
        if let Ok(b) = row[c_brake].parse::<f64>() {
            brake.push((speed_kph, b));
        }
        if let Ok(m) = row[c_min].parse::<f64>() {
            detection.push((speed_kph, m));
        }
    }
    if brake.is_empty() {
        bail!("sweep CSV has no parsable rows");
    }
    let y_max = brake
        .iter()
        .chain(&detection)
        .map(|p| p.1)
        .fold(0.0f64, f64::max)
        * 1.15;
    let x_min = brake.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = brake.iter().map(|p| p.0).fold(0.0f64, f64::max);
    let mut canvas = SvgCanvas::new(640.0, 420.0);
    let frame = Frame {
        x_min,
        x_max,
        y_min: 0.0,
        y_max,
        left: 60.0,
        top: 40.0,
        width: 540.0,
        height: 330.0,
    };
    frame.axes(&mut canvas, "speed [kph]", "distance [m]");
    let det_px: Vec<(f64, f64)> = detection.iter().map(|&(x, y)| frame.map(x, y)).collect();
    let brk_px: Vec<(f64, f64)> = brake.iter().map(|&(x, y)| frame.map(x, y)).collect();
    canvas.polyline(&brk_px, "#888888", 1.5, Some("6 4"));
    canvas.polyline(&det_px, "#c0392b", 2.0, None);
    for &(x, y) in &det_px {
        canvas.circle(x, y, 3.0, "#c0392b");
    }
    canvas.text(70.0, 28.0, 12.0, "min detection distance (solid) vs ideal braking distance (dashed)");
    Ok(canvas.finish())
}

/// Top-down view: per-agent paths, with the slowest agents drawn as boxes.
fn plot_trajectory(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let c_x = column(header, "x_m").unwrap();
    let c_y = column(header, "y_m").unwrap();
    let c_agent = column(header, "agent");
    let c_psi = column(header, "psi_rad");
    let mut paths: BTreeMap<u32, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for row in rows {
        let agent: u32 = c_agent.and_then(|c| row[c].parse().ok()).unwrap_or(0);
        let x: f64 = row[c_x].parse().unwrap_or(f64::NAN);
        let y: f64 = row[c_y].parse().unwrap_or(f64::NAN);
        let psi: f64 = c_psi.and_then(|c| row[c].parse().ok()).unwrap_or(0.0);
        if x.is_finite() && y.is_finite() {
            paths.entry(agent).or_default().push((x, y, psi));
        }
    }
    if paths.is_empty() {
        bail!("trajectory CSV has no parsable rows");
    }
    let all: Vec<(f64, f64)> = paths.values().flatten().map(|p| (p.0, p.1)).collect();
    let x_min = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - 30.0;
    let x_max = all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + 30.0;
    let y_min = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) - 30.0;
    let y_max = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) + 30.0;
    let span_x = x_max - x_min;
    let span_y = (y_max - y_min).max(1.0);
    let width = 900.0;
    let height = (width * span_y / span_x).clamp(200.0, 900.0);
    let mut canvas = SvgCanvas::new(width + 40.0, height + 40.0);
    let frame = Frame {
        x_min,
        x_max,
        y_min,
        y_max,
        left: 20.0,
        top: 20.0,
        width,
        height,
    };
    let colors = ["#1f77b4", "#c0392b", "#2ca02c", "#9467bd", "#e6a23c", "#16a085", "#7f8c8d", "#d35400"];
    for (agent, pts) in &paths {
        let color = colors[*agent as usize % colors.len()];
        let px: Vec<(f64, f64)> = pts.iter().map(|&(x, y, _)| frame.map(x, y)).collect();
        canvas.polyline(&px, color, 1.5, None);
        // Vehicle boxes along the path.
        let step = (pts.len() / 12).max(1);
        for p in pts.iter().step_by(step) {
            let (cx, cy) = frame.map(p.0, p.1);
            let scale = width / span_x;
            canvas.rect_rotated(cx, cy, 4.9 * scale, 1.9 * scale, -p.2.to_degrees(), color);
        }
    }
    canvas.text(24.0, 16.0, 11.0, "top-down trajectories");
    Ok(canvas.finish())
}

/// Corridor polylines for a track file, merged into a trajectory plot by the
/// caller when available.
pub fn corridor_points(track: &racesim_core::TrackModel) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let n = track.num_samples();
    for i in (0..n).step_by(8) {
        let s = track.cum_station()[i];
        let (wl, wr) = track.width_at(s);
        let (pl, _) = track.frenet_to_cart(&racesim_core::FrenetPose { s, n: wl, mu: 0.0, v: 0.0 });
        let (pr, _) = track.frenet_to_cart(&racesim_core::FrenetPose { s, n: -wr, mu: 0.0, v: 0.0 });
        left.push((pl.x, pl.y));
        right.push((pr.x, pr.y));
    }
    (left, right)
}
