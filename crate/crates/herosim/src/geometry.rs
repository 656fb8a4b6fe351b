//! Planar geometry primitives shared by the simulator and behaviors:
//! vectors, segments, axis-aligned rectangles, and ray intersection tests.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Z-component of the cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            Vec2::new(self.x / n, self.y / n)
        } else {
            Vec2::default()
        }
    }

    pub fn scaled(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Rotate by `theta` radians counter-clockwise.
    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Line segment between two points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    pub fn is_finite(&self) -> bool {
        self.a.x.is_finite() && self.a.y.is_finite() && self.b.x.is_finite() && self.b.y.is_finite()
    }

    /// Shortest distance from a point to this segment.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let ab = self.b - self.a;
        let len_sq = ab.norm_squared();
        if len_sq == 0.0 {
            return (p - self.a).norm();
        }
        let t = ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0);
        (p - (self.a + ab.scaled(t))).norm()
    }
}

/// Axis-aligned rectangle spanning `[min, max]` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub const fn new(min: Vec2, max: Vec2) -> Self {
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// True when `p` lies at least `margin` inside every edge.
    pub fn contains_with_margin(&self, p: Vec2, margin: f64) -> bool {
        p.x >= self.min.x + margin
            && p.x <= self.max.x - margin
            && p.y >= self.min.y + margin
            && p.y <= self.max.y - margin
    }

    /// The four boundary wall segments, counter-clockwise.
    pub fn wall_segments(&self) -> [Segment; 4] {
        let bl = self.min;
        let br = Vec2::new(self.max.x, self.min.y);
        let tr = self.max;
        let tl = Vec2::new(self.min.x, self.max.y);
        [
            Segment::new(bl, br),
            Segment::new(br, tr),
            Segment::new(tr, tl),
            Segment::new(tl, bl),
        ]
    }
}

/// A ray hit: range along the ray and the incidence angle between the ray
/// and the surface normal at the hit point, in `[0, PI/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub incidence: f64,
}

/// Intersect a unit-direction ray with a segment. Rays parallel to the
/// segment (including collinear) miss.
pub fn ray_segment_intersection(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<RayHit> {
    let edge = seg.b - seg.a;
    let denom = dir.cross(edge);
    if denom.abs() < 1e-12 {
        return None;
    }
    let to_a = seg.a - origin;
    let t = to_a.cross(edge) / denom;
    let s = to_a.cross(dir) / denom;
    if t < 0.0 || !(0.0..=1.0).contains(&s) {
        return None;
    }
    let normal = edge.perp().normalized();
    let incidence = dir.dot(normal).abs().clamp(0.0, 1.0).acos();
    Some(RayHit {
        distance: t,
        incidence,
    })
}

/// Intersect a unit-direction ray with a circle; returns the nearest
/// non-negative hit. Rays starting inside the circle hit the far side.
pub fn ray_circle_intersection(
    origin: Vec2,
    dir: Vec2,
    center: Vec2,
    radius: f64,
) -> Option<RayHit> {
    let oc = origin - center;
    let b = dir.dot(oc);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = disc.sqrt();
    let t = if -b - sqrt_disc >= 0.0 {
        -b - sqrt_disc
    } else if -b + sqrt_disc >= 0.0 {
        -b + sqrt_disc
    } else {
        return None;
    };
    let hit = origin + dir.scaled(t);
    let normal = (hit - center).normalized();
    let incidence = dir.dot(normal).abs().clamp(0.0, 1.0).acos();
    Some(RayHit {
        distance: t,
        incidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn perpendicular_wall_hit() {
        let seg = Segment::new(Vec2::new(1.0, -1.0), Vec2::new(1.0, 1.0));
        let hit = ray_segment_intersection(Vec2::default(), Vec2::new(1.0, 0.0), &seg).unwrap();
        assert!((hit.distance - 1.0).abs() < 1e-12);
        assert!(hit.incidence.abs() < 1e-9);
    }

    #[test]
    fn parallel_ray_misses() {
        let seg = Segment::new(Vec2::new(0.0, 1.0), Vec2::new(5.0, 1.0));
        assert!(ray_segment_intersection(Vec2::default(), Vec2::new(1.0, 0.0), &seg).is_none());
    }

    #[test]
    fn slanted_wall_incidence() {
        // Wall through (1,0) rotated 45 degrees; a ray along +x meets it at
        // 45 degrees to the normal.
        let seg = Segment::new(Vec2::new(0.5, -0.5), Vec2::new(1.5, 0.5));
        let hit = ray_segment_intersection(Vec2::default(), Vec2::new(1.0, 0.0), &seg).unwrap();
        assert!((hit.incidence - FRAC_PI_4).abs() < 1e-12);
        assert!((hit.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn behind_origin_misses() {
        let seg = Segment::new(Vec2::new(-1.0, -1.0), Vec2::new(-1.0, 1.0));
        assert!(ray_segment_intersection(Vec2::default(), Vec2::new(1.0, 0.0), &seg).is_none());
    }

    #[test]
    fn circle_head_on() {
        let hit = ray_circle_intersection(
            Vec2::default(),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            0.5,
        )
        .unwrap();
        assert!((hit.distance - 1.5).abs() < 1e-12);
        assert!(hit.incidence.abs() < 1e-9);
    }

    #[test]
    fn circle_grazing_incidence() {
        // Ray tangent height ~ radius: incidence approaches 90 degrees.
        let hit = ray_circle_intersection(
            Vec2::new(0.0, 0.499),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            0.5,
        )
        .unwrap();
        assert!(hit.incidence > FRAC_PI_2 - 0.1);
    }

    #[test]
    fn point_segment_distance() {
        let seg = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0));
        assert!((seg.distance_to_point(Vec2::new(1.0, 0.5)) - 0.5).abs() < 1e-12);
        assert!((seg.distance_to_point(Vec2::new(3.0, 0.0)) - 1.0).abs() < 1e-12);
        assert!((seg.distance_to_point(Vec2::new(-1.0, 1.0)) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rect_margins_and_walls() {
        let r = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0));
        assert!(r.contains(Vec2::new(1.0, 0.5)));
        assert!(!r.contains_with_margin(Vec2::new(0.05, 0.5), 0.1));
        assert_eq!(r.wall_segments().len(), 4);
        assert!((r.width() - 2.0).abs() < 1e-15);
        assert!((r.height() - 1.0).abs() < 1e-15);
    }
}
