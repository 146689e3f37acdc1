//! Small 2-D geometry helpers shared across the crate.

use serde::{Deserialize, Serialize};

/// 2-D point / vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn scaled(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn unit(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            Vec2::ZERO
        } else {
            self.scaled(1.0 / n)
        }
    }

    /// Rotate by +90 degrees (left normal for a heading vector).
    pub fn perp_left(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        self.scaled(k)
    }
}

/// Wrap an angle to [-pi, pi). Values already in range pass through exactly.
pub fn wrap_angle(a: f64) -> f64 {
    if (-std::f64::consts::PI..std::f64::consts::PI).contains(&a) {
        return a;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w >= std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Oriented bounding box (vehicle footprint).
#[derive(Debug, Clone, Copy)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn corners(&self) -> [Vec2; 4] {
        let fwd = Vec2::new(self.heading.cos(), self.heading.sin());
        let left = fwd.perp_left();
        let l = fwd.scaled(self.half_length);
        let w = left.scaled(self.half_width);
        [
            self.center + l + w,
            self.center + l - w,
            self.center - l - w,
            self.center - l + w,
        ]
    }

    /// Separating-axis intersection test for two boxes.
    pub fn intersects(&self, other: &Obb) -> bool {
        let ca = self.corners();
        let cb = other.corners();
        let fwd_a = Vec2::new(self.heading.cos(), self.heading.sin());
        let fwd_b = Vec2::new(other.heading.cos(), other.heading.sin());
        let axes = [fwd_a, fwd_a.perp_left(), fwd_b, fwd_b.perp_left()];
        for axis in axes {
            let (mut min_a, mut max_a) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in ca {
                let d = p.dot(axis);
                min_a = min_a.min(d);
                max_a = max_a.max(d);
            }
            let (mut min_b, mut max_b) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in cb {
                let d = p.dot(axis);
                min_b = min_b.min(d);
                max_b = max_b.max(d);
            }
            if max_a < min_b || max_b < min_a {
                return false;
            }
        }
        true
    }
}
