//! Planar contact between phalanx capsules (and the palm) and convex objects,
//! with penalty normal forces and elastic-stick Coulomb friction.

use crate::geom::{closest_on_segment, closest_segment_segment, segment_intersection, Vec2};
use crate::kinematics::HandPose;
use crate::model::{FingerId, HandModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// radius mm
    Circle { radius: f64 },
    /// Convex, counter-clockwise, object-local vertices (mm).
    Polygon { vertices: Vec<Vec2> },
    /// Segment `a`-`b` swept by `radius` (mm).
    Capsule { a: Vec2, b: Vec2, radius: f64 },
}

impl Shape {
    /// Narrowest caliper width (mm): the span a grasp has to close over.
    pub fn width(&self) -> f64 {
        match self {
            Shape::Circle { radius } => 2.0 * radius,
            // Narrowest grip direction is across the capsule.
            Shape::Capsule { radius, .. } => 2.0 * radius,
            Shape::Polygon { vertices } => {
                // Minimum width over edge directions (caliper width).
                let n = vertices.len();
                (0..n)
                    .map(|i| {
                        let e = (vertices[(i + 1) % n] - vertices[i]).normalized().perp();
                        let (lo, hi) = project(vertices, e);
                        hi - lo
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Polar moment of area per unit area (mm²), for angular damping scaling.
    pub fn gyration_sq(&self) -> f64 {
        match self {
            Shape::Circle { radius } => radius * radius / 2.0,
            Shape::Capsule { a, b, radius } => {
                let l = a.distance(*b);
                l * l / 12.0 + radius * radius / 2.0
            }
            Shape::Polygon { vertices } => {
                let c = centroid(vertices);
                vertices.iter().map(|v| (*v - c).norm_sq()).sum::<f64>() / vertices.len() as f64 / 2.0
            }
        }
    }
}

pub fn centroid(vertices: &[Vec2]) -> Vec2 {
    let n = vertices.len().max(1) as f64;
    vertices.iter().fold(Vec2::ZERO, |a, v| a + *v) * (1.0 / n)
}

/// True when the polygon is strictly convex and wound counter-clockwise.
pub fn is_convex_ccw(vertices: &[Vec2]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|i| {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        (b - a).cross(c - b) > 0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: Vec2,
    pub angle: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, angle: f64) -> Pose2 {
        Pose2 {
            position: Vec2::new(x, y),
            angle,
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.position + p.rotated(self.angle)
    }
}

/// A shape placed in the palm frame.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldShape {
    Circle { center: Vec2, radius: f64 },
    Polygon { vertices: Vec<Vec2> },
    Capsule { a: Vec2, b: Vec2, radius: f64 },
}

impl WorldShape {
    pub fn place(shape: &Shape, pose: &Pose2) -> WorldShape {
        match shape {
            Shape::Circle { radius } => WorldShape::Circle {
                center: pose.position,
                radius: *radius,
            },
            Shape::Polygon { vertices } => WorldShape::Polygon {
                vertices: vertices.iter().map(|v| pose.apply(*v)).collect(),
            },
            Shape::Capsule { a, b, radius } => WorldShape::Capsule {
                a: pose.apply(*a),
                b: pose.apply(*b),
                radius: *radius,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContactSource {
    Phalanx { finger: FingerId, phalanx: usize },
    Palm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    /// Palm frame, on the object surface (mm).
    pub position: Vec2,
    /// Unit normal pointing from the object toward the finger/palm.
    pub normal: Vec2,
    /// Penetration, > 0 for every emitted contact (mm).
    pub depth: f64,
    /// N, pushes the finger along `normal`.
    pub normal_force: f64,
    /// N, along `normal.perp()` on the finger side.
    pub tangent_force: f64,
    pub mu: f64,
    pub source: ContactSource,
    pub object: usize,
    /// Elastic tangential displacement carried while sticking (mm).
    pub stick: f64,
}

impl ContactPoint {
    pub fn tangent(&self) -> Vec2 {
        self.normal.perp()
    }

    /// Force on the finger (or palm) side; the object receives the negative.
    pub fn force_on_finger(&self) -> Vec2 {
        self.normal * self.normal_force + self.tangent() * self.tangent_force
    }

    pub fn key(&self) -> (usize, ContactSource) {
        (self.object, self.source)
    }
}

/// Geometry of one capsule-vs-shape overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub position: Vec2,
    pub normal: Vec2,
    pub depth: f64,
}

fn project(vertices: &[Vec2], axis: Vec2) -> (f64, f64) {
    vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let d = v.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

fn point_in_convex(p: Vec2, vertices: &[Vec2]) -> bool {
    let n = vertices.len();
    (0..n).all(|i| (vertices[(i + 1) % n] - vertices[i]).cross(p - vertices[i]) >= 0.0)
}

/// Deepest overlap between the capsule `a`-`b` (radius `r`) and a shape.
/// Returns `None` when separated or exactly touching.
pub fn capsule_overlap(a: Vec2, b: Vec2, r: f64, shape: &WorldShape) -> Option<Overlap> {
    let fallback_normal = |seg_point: Vec2, center: Vec2| {
        let axis = (b - a).normalized().perp();
        if (center - seg_point).dot(axis) > 0.0 {
            -axis
        } else {
            axis
        }
    };
    let ov = match *shape {
        WorldShape::Circle { center, radius } => {
            let (p, _) = closest_on_segment(center, a, b);
            let d = p.distance(center);
            let normal = if d > 0.0 {
                (p - center) * (1.0 / d)
            } else {
                fallback_normal(p, center)
            };
            Overlap {
                position: center + normal * radius,
                normal,
                depth: radius + r - d,
            }
        }
        WorldShape::Capsule { a: oa, b: ob, radius } => {
            let (p, o) = closest_segment_segment(a, b, oa, ob);
            let d = p.distance(o);
            let normal = if d > 0.0 {
                (p - o) * (1.0 / d)
            } else {
                fallback_normal(p, (oa + ob) * 0.5)
            };
            Overlap {
                position: o + normal * radius,
                normal,
                depth: radius + r - d,
            }
        }
        WorldShape::Polygon { ref vertices } => polygon_overlap(a, b, r, vertices),
    };
    (ov.depth > 0.0).then_some(ov)
}

fn polygon_overlap(a: Vec2, b: Vec2, r: f64, vertices: &[Vec2]) -> Overlap {
    let n = vertices.len();
    let crosses = point_in_convex(a, vertices)
        || point_in_convex(b, vertices)
        || (0..n).any(|i| segment_intersection(a, b, vertices[i], vertices[(i + 1) % n]).is_some());
    if !crosses {
        // Separated convex sets: the closest pair involves a vertex of one.
        let mut best = (f64::INFINITY, Vec2::ZERO, Vec2::ZERO);
        for i in 0..n {
            let (p, o) = closest_segment_segment(a, b, vertices[i], vertices[(i + 1) % n]);
            let d = p.distance(o);
            if d < best.0 {
                best = (d, p, o);
            }
        }
        let (d, p, o) = best;
        let normal = (p - o) * (1.0 / d);
        return Overlap {
            position: o,
            normal,
            depth: r - d,
        };
    }
    // Intersecting: minimum translation along edge normals and the segment normal.
    let seg = [a, b];
    let mut axes: Vec<Vec2> = (0..n)
        .map(|i| (vertices[(i + 1) % n] - vertices[i]).normalized().perp() * -1.0)
        .collect();
    let sn = (b - a).normalized().perp();
    axes.push(sn);
    axes.push(-sn);
    let mut best = (f64::INFINITY, Vec2::ZERO);
    for axis in axes {
        let (_, pmax) = project(vertices, axis);
        let (smin, _) = project(&seg, axis);
        let push = pmax - smin;
        if push < best.0 {
            best = (push, axis);
        }
    }
    let (push, normal) = best;
    let deepest = if a.dot(normal) <= b.dot(normal) { a } else { b };
    Overlap {
        position: deepest + normal * push,
        normal,
        depth: push + r,
    }
}

/// A placed object as seen by the contact query.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactBody {
    pub shape: WorldShape,
    /// Overrides the phalanx surface friction when set.
    pub mu: Option<f64>,
}

/// Geometric contacts (forces zeroed) between every phalanx and the palm
/// and every object; at most one per pair. Fixed order: objects, then
/// fingers and phalanges in model order, palm last.
pub fn detect_contacts(model: &HandModel, poses: &HandPose, bodies: &[ContactBody]) -> Vec<ContactPoint> {
    let mut out = Vec::new();
    for (oi, body) in bodies.iter().enumerate() {
        for (finger, pose) in model.fingers.iter().zip(&poses.fingers) {
            for (k, ph) in finger.phalanges.iter().enumerate() {
                let (a, b) = pose.segment(finger, k);
                if let Some(ov) = capsule_overlap(a, b, finger.half_width, &body.shape) {
                    out.push(ContactPoint {
                        position: ov.position,
                        normal: ov.normal,
                        depth: ov.depth,
                        normal_force: 0.0,
                        tangent_force: 0.0,
                        mu: body.mu.unwrap_or(ph.pad_friction),
                        source: ContactSource::Phalanx { finger: finger.id, phalanx: k },
                        object: oi,
                        stick: 0.0,
                    });
                }
            }
        }
        let palm = &model.palm;
        if let Some(ov) = capsule_overlap(palm.a, palm.b, palm.radius, &body.shape) {
            out.push(ContactPoint {
                position: ov.position,
                normal: ov.normal,
                depth: ov.depth,
                normal_force: 0.0,
                tangent_force: 0.0,
                mu: body.mu.unwrap_or(palm.friction),
                source: ContactSource::Palm,
                object: oi,
                stick: 0.0,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    /// N/mm
    pub k_n: f64,
    /// N·s/mm, applied only while the depth grows
    pub c_n: f64,
    /// Tangential stick stiffness, N/mm
    pub k_t: f64,
}

impl ContactParams {
    pub fn from_model(model: &HandModel) -> ContactParams {
        ContactParams {
            k_n: model.contact_stiffness,
            c_n: model.contact_damping,
            k_t: 0.5 * model.contact_stiffness,
        }
    }
}

/// Evaluate penalty normal forces and Coulomb friction.
///
/// `relative_velocity[i]` is the finger-side velocity minus the object-side
/// velocity at contact `i` (mm/s). Friction is an elastic stick spring whose
/// stored displacement is clamped so the force never leaves the cone.
pub fn contact_forces(contacts: &[ContactPoint], relative_velocity: &[Vec2], dt: f64, params: &ContactParams) -> Vec<ContactPoint> {
    contacts
        .iter()
        .zip(relative_velocity)
        .map(|(c, v)| {
            let mut c = c.clone();
            if c.depth <= 0.0 {
                c.normal_force = 0.0;
                c.tangent_force = 0.0;
                c.stick = 0.0;
                return c;
            }
            let approach = -v.dot(c.normal);
            let viscous = if approach > 0.0 { params.c_n * approach } else { 0.0 };
            c.normal_force = (params.k_n * c.depth + viscous).max(0.0);
            let limit = c.mu * c.normal_force;
            let stick = c.stick + v.dot(c.tangent()) * dt;
            let trial = -params.k_t * stick;
            if trial.abs() > limit {
                c.tangent_force = limit.copysign(trial);
                c.stick = -c.tangent_force / params.k_t;
            } else {
                c.tangent_force = trial;
                c.stick = stick;
            }
            c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_default_hand;

    fn circle(x: f64, y: f64, r: f64) -> WorldShape {
        WorldShape::Circle {
            center: Vec2::new(x, y),
            radius: r,
        }
    }

    #[test]
    fn far_object_has_no_contact() {
        let h = build_default_hand();
        let poses = HandPose::new(&h, &[0.0; 12]);
        let bodies = [ContactBody { shape: circle(0.0, 500.0, 30.0), mu: None }];
        assert!(detect_contacts(&h, &poses, &bodies).is_empty());
    }

    #[test]
    fn tangent_circle_is_not_a_contact() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(40.0, 0.0);
        assert!(capsule_overlap(a, b, 15.0, &circle(20.0, 45.0, 30.0)).is_none());
        let ov = capsule_overlap(a, b, 15.0, &circle(20.0, 43.0, 30.0)).unwrap();
        assert!((ov.depth - 2.0).abs() < 1e-12);
        assert!((ov.normal - Vec2::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn polygon_overlap_separated_and_crossing() {
        let square = WorldShape::Polygon {
            vertices: vec![
                Vec2::new(-10.0, -10.0),
                Vec2::new(10.0, -10.0),
                Vec2::new(10.0, 10.0),
                Vec2::new(-10.0, 10.0),
            ],
        };
        // Capsule hovering 12 mm above the top face with radius 15: depth 3.
        let ov = capsule_overlap(Vec2::new(-5.0, 22.0), Vec2::new(5.0, 22.0), 15.0, &square).unwrap();
        assert!((ov.depth - 3.0).abs() < 1e-12);
        assert!((ov.normal - Vec2::new(0.0, 1.0)).norm() < 1e-12);
        // Segment inside the square 2 mm below its top face.
        let ov = capsule_overlap(Vec2::new(-5.0, 8.0), Vec2::new(5.0, 8.0), 15.0, &square).unwrap();
        assert!((ov.depth - 17.0).abs() < 1e-12);
        assert!((ov.normal - Vec2::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn capsule_capsule_overlap() {
        let obj = WorldShape::Capsule {
            a: Vec2::new(0.0, 0.0),
            b: Vec2::new(0.0, 50.0),
            radius: 10.0,
        };
        let ov = capsule_overlap(Vec2::new(20.0, 10.0), Vec2::new(40.0, 10.0), 15.0, &obj).unwrap();
        assert!((ov.depth - 5.0).abs() < 1e-12);
        assert!((ov.normal - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn convexity_check() {
        let ccw = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        assert!(is_convex_ccw(&ccw));
        let cw = [ccw[0], ccw[2], ccw[1]];
        assert!(!is_convex_ccw(&cw));
        let dart = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(1.0, 1.0),
        ];
        assert!(!is_convex_ccw(&dart));
    }

    fn probe(depth: f64, mu: f64) -> ContactPoint {
        ContactPoint {
            position: Vec2::ZERO,
            normal: Vec2::new(0.0, 1.0),
            depth,
            normal_force: 0.0,
            tangent_force: 0.0,
            mu,
            source: ContactSource::Palm,
            object: 0,
            stick: 0.0,
        }
    }

    #[test]
    fn force_law_examples() {
        let p = ContactParams { k_n: 10.0, c_n: 0.02, k_t: 5.0 };
        let f = contact_forces(&[probe(0.0, 0.5)], &[Vec2::ZERO], 1e-3, &p);
        assert_eq!((f[0].normal_force, f[0].tangent_force), (0.0, 0.0));
        let f = contact_forces(&[probe(1.0, 0.5)], &[Vec2::ZERO], 1e-3, &p);
        assert_eq!(f[0].normal_force, 10.0);
        assert_eq!(f[0].tangent_force, 0.0);
        // Sliding fast along the tangent saturates exactly at the cone.
        let f = contact_forces(&[probe(1.0, 0.5)], &[Vec2::new(-1e4, 0.0)], 1e-3, &p);
        assert_eq!(f[0].tangent_force.abs(), 0.5 * f[0].normal_force);
        // Separating velocity adds no damping; approach adds some.
        let f = contact_forces(&[probe(1.0, 0.5)], &[Vec2::new(0.0, 50.0)], 1e-3, &p);
        assert_eq!(f[0].normal_force, 10.0);
        let f = contact_forces(&[probe(1.0, 0.5)], &[Vec2::new(0.0, -50.0)], 1e-3, &p);
        assert!((f[0].normal_force - 11.0).abs() < 1e-12);
    }
}
