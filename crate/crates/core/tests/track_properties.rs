//! Track geometry properties: Frenet round trips, station wrapping their
//! invariants on the shipped oval.

use proptest::prelude::*;
use racesim_core::geom::Vec2;
use racesim_core::track::{build_track, FrenetPose, TrackModel};
use std::path::Path;

fn repo_path(rel: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn circle_track(radius: f64) -> TrackModel {
    let n = 360;
    let pts: Vec<Vec2> = (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect();
    let widths = vec![(7.0, 7.0); n];
    build_track(&pts, &widths, true, 1.0).unwrap()
}

#[test]
fn shipped_oval_invariants() {
    let track = TrackModel::from_file(&repo_path("tracks/ims_oval.json")).unwrap();
    // Total length within 1% of 4 km.
    assert!(
        (track.total_length() - 4000.0).abs() < 40.0,
        "length {} not within 1% of 4000",
        track.total_length()
    );
    assert!(track.closed());
    // Corridor stays comfortably wide everywhere (vehicle half width 0.95 m
    // plus a 0.5 m safety margin).
    let mut s = 0.0;
    while s < track.total_length() {
        let (n_min, n_max) = track.corridor_at(s, 0.95 + 0.5).unwrap();
        assert!(n_max - n_min >= 8.0, "corridor {} m at s={s}", n_max - n_min);
        s += 10.0;
    }
    // Closed-track curvature integrates to one full turn.
    let integral: f64 = track
        .curvature_samples()
        .iter()
        .map(|k| k * track.spacing())
        .sum();
    assert!(
        (integral.abs() - 2.0 * std::f64::consts::PI).abs() < 1e-3,
        "curvature integral {integral}"
    );
    // Counter-clockwise circuit: left-positive curvature in the turns.
    assert!(integral > 0.0);
    // Resampled endpoints coincide.
    let first = track.centerline()[0];
    let (last_point, _) = track.point_at(track.total_length() - 1e-9);
    assert!(first.dist(last_point) < 1.1, "closure gap {}", first.dist(last_point));
}

#[test]
fn cart_frenet_cart_roundtrip_on_oval_samples() {
    let track = TrackModel::from_file(&repo_path("tracks/ims_oval.json")).unwrap();
    // 10^4 deterministic samples across station and offset.
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let s = (i as f64 * 0.4001) % track.total_length();
        let n = -6.0 + 12.0 * ((i as f64 * 0.777) % 1.0);
        let (point, heading) = track.frenet_to_cart(&FrenetPose { s, n, mu: 0.0, v: 0.0 });
        let pose = track.cart_to_frenet(point, heading, 0.0);
        let (back, _) = track.frenet_to_cart(&pose);
        worst = worst.max(point.dist(back));
    }
    assert!(worst < 1e-6, "max cart->frenet->cart error {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn roundtrip_error_below_tolerance_on_circle(
        s in 0.0f64..628.0,
        n in -6.9f64..6.9,
        heading in -3.1f64..3.1,
    ) {
        let track = circle_track(100.0);
        let (point, _) = track.frenet_to_cart(&FrenetPose { s, n, mu: 0.0, v: 0.0 });
        let pose = track.cart_to_frenet(point, heading, 10.0);
        let (back, _) = track.frenet_to_cart(&pose);
        prop_assert!(point.dist(back) < 1e-6);
        // Offset must be recovered up to the polyline vertex band.
        prop_assert!((pose.n - n).abs() < 1e-3);
    }

    #[test]
    fn station_wrapping_is_k_periodic(s in 0.0f64..628.0, k in -3i64..4) {
        let track = circle_track(100.0);
        let wrapped = FrenetPose {
            s: s + k as f64 * track.total_length(),
            n: 0.0,
            mu: 0.0,
            v: 0.0,
        };
        let (point, _) = track.frenet_to_cart(&wrapped);
        let pose = track.cart_to_frenet(point, 0.0, 0.0);
        let diff = track.station_diff(pose.s, s).abs();
        prop_assert!(diff < 1e-6, "station error {diff}");
    }
}
