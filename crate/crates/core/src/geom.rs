//! Small planar geometry kit: vectors and rigid (possibly mirrored) frames.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Planar frame `p_world = origin + R(angle) * diag(1, mirror) * p_local`.
///
/// `mirror` is +1 for a proper rotation and -1 for a reflected (left-handed)
/// frame, which is how opposing fingers are placed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Frame2 {
    pub origin: Vec2,
    pub angle: f64,
    pub mirror: f64,
}

impl Frame2 {
    pub const IDENTITY: Frame2 = Frame2 {
        origin: Vec2::ZERO,
        angle: 0.0,
        mirror: 1.0,
    };

    pub fn new(origin: Vec2, angle: f64, mirror: f64) -> Self {
        Self {
            origin,
            angle,
            mirror,
        }
    }

    pub fn apply_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(v.x, self.mirror * v.y).rotated(self.angle)
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.origin + self.apply_vec(p)
    }

    /// Child frame offset by `offset` (local) and rotated by `local_angle`
    /// about that point, measured in this frame's own sense of rotation.
    pub fn child(&self, offset: Vec2, local_angle: f64) -> Frame2 {
        Frame2 {
            origin: self.apply(offset),
            angle: self.angle + self.mirror * local_angle,
            mirror: self.mirror,
        }
    }

    /// Compose with an outer rigid motion (rotation about the world origin,
    /// then translation).
    pub fn transformed(&self, rotation: f64, translation: Vec2) -> Frame2 {
        Frame2 {
            origin: self.origin.rotated(rotation) + translation,
            angle: self.angle + rotation,
            mirror: self.mirror,
        }
    }
}

/// Closest point on segment `[a, b]` to `p`, with its parameter in [0, 1].
pub fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (Vec2, f64) {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

/// Closest pair between two segments: (point on first, point on second).
pub fn closest_segment_segment(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> (Vec2, Vec2) {
    if let Some(x) = segment_intersection(a0, a1, b0, b1) {
        return (x, x);
    }
    let candidates = [
        (a0, closest_on_segment(a0, b0, b1).0),
        (a1, closest_on_segment(a1, b0, b1).0),
        (closest_on_segment(b0, a0, a1).0, b0),
        (closest_on_segment(b1, a0, a1).0, b1),
    ];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.0.distance(c.1) < best.0.distance(best.1) {
            best = *c;
        }
    }
    best
}

pub fn segment_intersection(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> Option<Vec2> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = r.cross(s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = (b0 - a0).cross(s) / denom;
    let u = (b0 - a0).cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(a0 + r * t)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirrored_child_rotates_the_other_way() {
        let f = Frame2::new(Vec2::ZERO, 0.0, -1.0);
        let c = f.child(Vec2::new(10.0, 0.0), 0.5);
        let p = c.apply(Vec2::new(1.0, 0.0));
        assert!((p.x - (10.0 + 0.5f64.cos())).abs() < 1e-12);
        assert!((p.y + 0.5f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn crossing_segments_have_zero_distance() {
        let (p, q) = closest_segment_segment(
            Vec2::new(-1.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, -1.0),
            Vec2::new(0.0, 1.0),
        );
        assert_eq!(p, q);
        assert!(p.norm() < 1e-12);
    }
}
