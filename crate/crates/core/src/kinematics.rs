//! Finger chain kinematics and tendon path geometry.
//!
//! Tendons are polylines through point guides. Path length is the sum of
//! segment lengths; moment arms are the analytic negative gradient of that
//! length with respect to the joint angles, so tension times arm is the joint
//! torque by virtual work.

use crate::geom::{Frame2, Vec2};
use crate::model::{Finger, GuideRef, HandModel, TendonRoute, JOINTS_PER_FINGER};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerPose {
    pub q: [f64; JOINTS_PER_FINGER],
    /// One frame per phalanx, palm frame.
    pub frames: Vec<Frame2>,
    /// World positions of the joint axles.
    pub axles: [Vec2; JOINTS_PER_FINGER],
    /// Sense of a positive (flexing) joint rotation in the palm frame: +1 ccw.
    pub flex_sign: f64,
    /// Set when the requested angles had to be clamped to the joint limits.
    pub clamped: bool,
}

impl FingerPose {
    pub fn point(&self, phalanx: usize, local: Vec2) -> Vec2 {
        self.frames[phalanx].apply(local)
    }

    /// Proximal and distal ends of a phalanx midline.
    pub fn segment(&self, finger: &Finger, phalanx: usize) -> (Vec2, Vec2) {
        let f = &self.frames[phalanx];
        (f.apply(Vec2::ZERO), f.apply(Vec2::new(finger.phalanges[phalanx].length, 0.0)))
    }

    pub fn fingertip(&self, finger: &Finger) -> Vec2 {
        let last = finger.phalanges.len() - 1;
        self.segment(finger, last).1
    }

    /// d(point)/d(q_joint) for a point carried by `phalanx`, in mm/rad.
    pub fn point_velocity(&self, phalanx: usize, world: Vec2, joint: usize) -> Vec2 {
        if phalanx > joint {
            (world - self.axles[joint]).perp() * self.flex_sign
        } else {
            Vec2::ZERO
        }
    }

    /// World positions of every guide and anchor, grouped per phalanx.
    pub fn guide_points(&self, finger: &Finger) -> Vec<Vec<Vec2>> {
        finger
            .phalanges
            .iter()
            .enumerate()
            .map(|(k, ph)| {
                ph.guides_flexor
                    .iter()
                    .chain(ph.guides_extensor.iter())
                    .chain(ph.terminal_anchor_flexor.iter())
                    .chain(ph.terminal_anchor_extensor.iter())
                    .map(|&g| self.point(k, g))
                    .collect()
            })
            .collect()
    }
}

/// Pose of every finger of a hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    pub fingers: Vec<FingerPose>,
}

impl HandPose {
    pub fn new(model: &HandModel, q: &[f64]) -> HandPose {
        HandPose {
            fingers: model
                .fingers
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let qi = [q[3 * i], q[3 * i + 1], q[3 * i + 2]];
                    chain_pose(f, &qi)
                })
                .collect(),
        }
    }
}

/// Serial chain pose with no clamping (the solver lets joints press into
/// their compliant stops).
pub fn chain_pose(finger: &Finger, q: &[f64; JOINTS_PER_FINGER]) -> FingerPose {
    let mut frames = Vec::with_capacity(finger.phalanges.len());
    let mut axles = [Vec2::ZERO; JOINTS_PER_FINGER];
    frames.push(finger.base_pose);
    for k in 1..finger.phalanges.len() {
        let prev = frames[k - 1];
        let axle_local = Vec2::new(finger.phalanges[k - 1].length, 0.0);
        if let Some(a) = axles.get_mut(k - 1) {
            *a = prev.apply(axle_local);
        }
        // Flexion turns toward the palm side (local -y), i.e. clockwise locally.
        frames.push(prev.child(axle_local, -q.get(k - 1).copied().unwrap_or(0.0)));
    }
    FingerPose {
        q: *q,
        frames,
        axles,
        flex_sign: -finger.base_pose.mirror,
        clamped: false,
    }
}

/// Forward kinematics with joint angles clamped into their limits.
pub fn forward_kinematics(finger: &Finger, q: &[f64; JOINTS_PER_FINGER]) -> FingerPose {
    let mut qc = *q;
    let mut clamped = false;
    for (j, v) in qc.iter_mut().enumerate() {
        let [lo, hi] = finger.joint_limits[j];
        let c = v.clamp(lo, hi);
        if c != *v {
            clamped = true;
            *v = c;
        }
    }
    let mut pose = chain_pose(finger, &qc);
    pose.clamped = clamped;
    pose
}

/// Route points in the palm frame, each tagged with its carrying phalanx.
pub fn route_points(route: &TendonRoute, pose: &FingerPose) -> Vec<(Vec2, Option<usize>)> {
    route
        .guides
        .iter()
        .map(|g| match *g {
            GuideRef::Palm(p) => (p, None),
            GuideRef::Guide { phalanx, point } | GuideRef::Anchor { phalanx, point } => {
                (pose.point(phalanx, point), Some(phalanx))
            }
        })
        .collect()
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

pub fn route_length_in(route: &TendonRoute, pose: &FingerPose) -> f64 {
    let pts: Vec<Vec2> = route_points(route, pose).into_iter().map(|p| p.0).collect();
    polyline_length(&pts)
}

/// Path length of a route through the current hand pose (mm).
pub fn tendon_path_length(route: &TendonRoute, poses: &HandPose) -> f64 {
    route_length_in(route, &poses.fingers[route.finger.index()])
}

/// Per-segment moment arm contributions `-d|segment|/dq_j` (mm).
pub fn segment_arms(route: &TendonRoute, pose: &FingerPose) -> Vec<[f64; JOINTS_PER_FINGER]> {
    let pts = route_points(route, pose);
    pts.windows(2)
        .map(|w| {
            let (a, ka) = w[0];
            let (b, kb) = w[1];
            let u = (b - a).normalized();
            let mut arms = [0.0; JOINTS_PER_FINGER];
            for (j, arm) in arms.iter_mut().enumerate() {
                let va = ka.map_or(Vec2::ZERO, |k| pose.point_velocity(k, a, j));
                let vb = kb.map_or(Vec2::ZERO, |k| pose.point_velocity(k, b, j));
                *arm = -u.dot(vb - va);
            }
            arms
        })
        .collect()
}

pub fn moment_arms_in(route: &TendonRoute, pose: &FingerPose) -> [f64; JOINTS_PER_FINGER] {
    let mut out = [0.0; JOINTS_PER_FINGER];
    for s in segment_arms(route, pose) {
        for j in 0..JOINTS_PER_FINGER {
            out[j] += s[j];
        }
    }
    out
}

/// Signed moment arms (mm, + flexes) of a route at joint angles `q`.
pub fn moment_arms(route: &TendonRoute, finger: &Finger, q: &[f64; JOINTS_PER_FINGER]) -> [f64; JOINTS_PER_FINGER] {
    moment_arms_in(route, &chain_pose(finger, q))
}

/// Turn angle of the polyline at each point (0 at both ends), in rad.
pub fn wrap_angles(points: &[Vec2]) -> Vec<f64> {
    let n = points.len();
    let mut out = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        let u = points[i] - points[i - 1];
        let v = points[i + 1] - points[i];
        if u.norm() > 0.0 && v.norm() > 0.0 {
            out[i] = u.cross(v).abs().atan2(u.dot(v));
        }
    }
    out
}

/// Which way the tendon slides over its guides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlidingDirection {
    /// Toward the spool.
    Winding,
    /// Toward the fingertip.
    PayingOut,
    Stuck,
}

/// Capstan tension along a route, one value per segment from the spool end.
///
/// `previous` is the last step's profile and is only consulted when stuck.
pub fn tension_profile(
    points: &[Vec2],
    tension_at_spool: f64,
    mu: f64,
    direction: SlidingDirection,
    previous: Option<&[f64]>,
) -> Vec<f64> {
    let segs = points.len().saturating_sub(1);
    let t0 = tension_at_spool.max(0.0);
    if segs == 0 {
        return Vec::new();
    }
    if t0 == 0.0 {
        return vec![0.0; segs];
    }
    let wraps = wrap_angles(points);
    let mut out = Vec::with_capacity(segs);
    let mut cumulative = 0.0;
    let mut t = t0;
    for i in 0..segs {
        if i > 0 {
            cumulative += wraps[i];
        }
        let value = match direction {
            SlidingDirection::Winding => {
                if i > 0 {
                    t *= (-mu * wraps[i]).exp();
                }
                t
            }
            SlidingDirection::PayingOut => {
                if i > 0 {
                    t *= (mu * wraps[i]).exp();
                }
                t
            }
            SlidingDirection::Stuck => {
                let lo = t0 * (-mu * cumulative).exp();
                let hi = t0 * (mu * cumulative).exp();
                let prev = previous.and_then(|p| p.get(i).copied()).unwrap_or(t0);
                prev.clamp(lo, hi)
            }
        };
        out.push(value);
    }
    out
}

/// Tendon bookkeeping at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendonState {
    /// mm
    pub path_length: f64,
    /// rest length minus wound length (mm)
    pub commanded_length: f64,
    /// mm
    pub stretch: f64,
    /// N
    pub tension_at_spool: f64,
    /// N, one per segment from the spool end
    pub segment_tensions: Vec<f64>,
    pub slack: bool,
    pub direction: SlidingDirection,
}

impl TendonState {
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        route: &TendonRoute,
        pose: &FingerPose,
        wound_length: f64,
        stiffness: f64,
        mu: f64,
        direction: SlidingDirection,
        previous: Option<&[f64]>,
    ) -> TendonState {
        let pts: Vec<Vec2> = route_points(route, pose).into_iter().map(|p| p.0).collect();
        let path_length = polyline_length(&pts);
        let commanded_length = route.rest_length - wound_length;
        let stretch = (path_length - commanded_length).max(0.0);
        let tension_at_spool = stiffness * stretch;
        let segment_tensions = tension_profile(&pts, tension_at_spool, mu, direction, previous);
        TendonState {
            path_length,
            commanded_length,
            stretch,
            tension_at_spool,
            segment_tensions,
            slack: stretch == 0.0 && path_length < commanded_length,
            direction,
        }
    }

    /// Joint torques (N·m, + flexes) this tendon applies to its finger.
    pub fn joint_torques(&self, seg_arms: &[[f64; JOINTS_PER_FINGER]]) -> [f64; JOINTS_PER_FINGER] {
        let mut tau = [0.0; JOINTS_PER_FINGER];
        for (t, arms) in self.segment_tensions.iter().zip(seg_arms) {
            for j in 0..JOINTS_PER_FINGER {
                tau[j] += t * arms[j] * 1e-3;
            }
        }
        tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_default_hand, FingerId, HandParams, TendonSide};
    use std::f64::consts::FRAC_PI_2;

    fn index_route(side: TendonSide) -> (crate::model::HandModel, usize) {
        let h = build_default_hand();
        let r = h.route_for(FingerId::Index, side).unwrap();
        (h, r)
    }

    #[test]
    fn straight_finger_tip_is_145_mm_out() {
        let h = build_default_hand();
        for f in &h.fingers {
            let pose = forward_kinematics(f, &[0.0; 3]);
            let tip = pose.fingertip(f);
            assert!((tip.distance(f.base_pose.origin) - 145.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quarter_turn_at_first_joint_rotates_the_distal_chain() {
        let h = build_default_hand();
        let f = h.finger(FingerId::Index);
        let straight = forward_kinematics(f, &[0.0; 3]);
        let bent = forward_kinematics(f, &[FRAC_PI_2, 0.0, 0.0]);
        let axle = straight.axles[0];
        let expect = axle + (straight.fingertip(f) - axle).rotated(FRAC_PI_2 * bent.flex_sign);
        assert!(bent.fingertip(f).distance(expect) < 1e-9);
        // Index palm side faces +x, so flexing swings the tip toward +x.
        assert!(bent.fingertip(f).x > axle.x + 100.0);
    }

    #[test]
    fn out_of_range_angles_are_clamped_and_flagged() {
        let h = build_default_hand();
        let f = h.finger(FingerId::Thumb);
        let pose = forward_kinematics(f, &[-0.2, 0.5, 3.0]);
        assert!(pose.clamped);
        assert_eq!(pose.q[0], 0.0);
        assert_eq!(pose.q[2], f.joint_limits[2][1]);
        assert!(!forward_kinematics(f, &[0.1, 0.2, 0.3]).clamped);
    }

    #[test]
    fn collinear_route_length() {
        let (h, _) = index_route(TendonSide::Flexor);
        let f = h.finger(FingerId::Index).clone();
        let route = TendonRoute {
            finger: FingerId::Index,
            side: TendonSide::Flexor,
            spool: 0,
            guides: vec![
                GuideRef::Guide { phalanx: 0, point: Vec2::new(0.0, -5.0) },
                GuideRef::Guide { phalanx: 1, point: Vec2::new(10.0, -5.0) },
                GuideRef::Guide { phalanx: 2, point: Vec2::new(20.0, -5.0) },
                GuideRef::Anchor { phalanx: 3, point: Vec2::new(30.0, -5.0) },
            ],
            rest_length: 1.0,
        };
        let pose = chain_pose(&f, &[0.0; 3]);
        assert!((route_length_in(&route, &pose) - 140.0).abs() < 1e-12);
    }

    #[test]
    fn default_arm_signs_at_rest() {
        let (h, fr) = index_route(TendonSide::Flexor);
        let er = h.route_for(FingerId::Index, TendonSide::Extensor).unwrap();
        let f = h.finger(FingerId::Index);
        let fa = moment_arms(&h.routes[fr], f, &[0.0; 3]);
        let ea = moment_arms(&h.routes[er], f, &[0.0; 3]);
        for j in 0..3 {
            assert!(fa[j] > 0.0, "flexor arm {j} = {}", fa[j]);
            assert!(ea[j] < 0.0, "extensor arm {j} = {}", ea[j]);
        }
        // At q = 0 the crossing segments are parallel to the phalanx, so the
        // arm equals the lateral guide offset.
        assert!((fa[0] - 7.0).abs() < 1e-9);
        assert!((ea[0] + 12.0).abs() < 1e-9);
    }

    #[test]
    fn guides_on_the_axle_give_zero_arm() {
        let h = build_default_hand();
        let f = h.finger(FingerId::Index).clone();
        let l0 = f.phalanges[0].length;
        let route = TendonRoute {
            finger: FingerId::Index,
            side: TendonSide::Flexor,
            spool: 0,
            guides: vec![
                GuideRef::Guide { phalanx: 0, point: Vec2::new(10.0, -7.0) },
                GuideRef::Guide { phalanx: 0, point: Vec2::new(l0, 0.0) },
                GuideRef::Guide { phalanx: 1, point: Vec2::ZERO },
                GuideRef::Anchor { phalanx: 1, point: Vec2::new(20.0, -7.0) },
            ],
            rest_length: 1.0,
        };
        let segs = segment_arms(&route, &chain_pose(&f, &[0.4, 0.0, 0.0]));
        assert!(segs[1][0].abs() < 1e-12);
    }

    #[test]
    fn frictionless_profile_is_uniform() {
        let (h, r) = index_route(TendonSide::Flexor);
        let pose = chain_pose(h.finger(FingerId::Index), &[0.3, 0.3, 0.3]);
        let pts: Vec<Vec2> = route_points(&h.routes[r], &pose).into_iter().map(|p| p.0).collect();
        for dir in [SlidingDirection::Winding, SlidingDirection::PayingOut, SlidingDirection::Stuck] {
            let t = tension_profile(&pts, 4.0, 0.0, dir, None);
            assert!(t.iter().all(|&x| x == 4.0));
        }
        let zero = tension_profile(&pts, 0.0, 0.15, SlidingDirection::Winding, None);
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn capstan_against_hand_computed_wraps() {
        // Route with two 90-degree turns and one 45-degree turn.
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 10.0),
            Vec2::new(0.0, 10.0),
            Vec2::new(-10.0, 20.0),
        ];
        let mu = 0.15;
        let total = std::f64::consts::PI + std::f64::consts::FRAC_PI_4;
        let t = tension_profile(&pts, 5.0, mu, SlidingDirection::Winding, None);
        assert!((t[3] - 5.0 * (-mu * total).exp()).abs() < 1e-12);
        let t = tension_profile(&pts, 5.0, mu, SlidingDirection::PayingOut, None);
        assert!((t[3] - 5.0 * (mu * total).exp()).abs() < 1e-12);
        // Stuck: previous values clamp into the capstan band.
        let prev = [5.0, 100.0, 0.0, 5.0];
        let t = tension_profile(&pts, 5.0, mu, SlidingDirection::Stuck, Some(&prev));
        assert_eq!(t[0], 5.0);
        assert!((t[1] - 5.0 * (mu * FRAC_PI_2).exp()).abs() < 1e-12);
        assert!((t[2] - 5.0 * (-mu * std::f64::consts::PI).exp()).abs() < 1e-12);
        assert_eq!(t[3], 5.0);
    }

    #[test]
    fn slack_tendon_has_no_tension() {
        let (h, r) = index_route(TendonSide::Extensor);
        let pose = chain_pose(h.finger(FingerId::Index), &[0.0; 3]);
        let s = TendonState::evaluate(&h.routes[r], &pose, -3.0, 5.0, 0.15, SlidingDirection::Stuck, None);
        assert!(s.slack);
        assert!(s.segment_tensions.iter().all(|&t| t == 0.0));
        let s = TendonState::evaluate(&h.routes[r], &pose, 1.0, 5.0, 0.15, SlidingDirection::Winding, None);
        assert!(!s.slack);
        assert!((s.tension_at_spool - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rest_length_matches_straight_path() {
        let h = crate::model::build_hand(&HandParams::default());
        let poses = HandPose::new(&h, &[0.0; 12]);
        for r in &h.routes {
            assert!((tendon_path_length(r, &poses) - r.rest_length).abs() < 1e-12);
        }
    }
}
