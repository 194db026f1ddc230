//! Reference computations written against plain `(x, y)` tuples, sharing no
//! code with the library beyond reading its data structures.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use softhand::contact::{capsule_overlap, WorldShape};
use softhand::model::{Finger, GuideRef, TendonRoute};
use softhand::scene::{Scene, StopMode};
use softhand::solver::simulate;
use softhand::{FingerId, Vec2};

pub type P = (f64, f64);

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn add(a: P, b: P) -> P {
    (a.0 + b.0, a.1 + b.1)
}

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

fn len(a: P) -> f64 {
    a.0.hypot(a.1)
}

fn rot(v: P, th: f64) -> P {
    let (s, c) = th.sin_cos();
    (c * v.0 - s * v.1, s * v.0 + c * v.1)
}

/// Phalanx frames by accumulating absolute angles along the chain:
/// each joint turns the next link by `-mirror * q` and the next origin sits
/// at the previous link's tip.
pub fn frames(finger: &Finger, q: [f64; 3]) -> Vec<(P, f64)> {
    let base = finger.base_pose;
    let m = base.mirror;
    let mut out = vec![((base.origin.x, base.origin.y), base.angle)];
    for k in 1..finger.phalanges.len() {
        let (o, th) = out[k - 1];
        let l = finger.phalanges[k - 1].length;
        let next = add(o, (l * th.cos(), l * th.sin()));
        out.push((next, th - m * q[k - 1]));
    }
    out
}

/// Palm-frame position of a phalanx-local point.
pub fn world(finger: &Finger, q: [f64; 3], phalanx: usize, local: P) -> P {
    let (o, th) = frames(finger, q)[phalanx];
    add(o, rot((local.0, finger.base_pose.mirror * local.1), th))
}

pub fn fingertip(finger: &Finger, q: [f64; 3]) -> P {
    let last = finger.phalanges.len() - 1;
    world(finger, q, last, (finger.phalanges[last].length, 0.0))
}

pub fn route_length(route: &TendonRoute, finger: &Finger, q: [f64; 3]) -> f64 {
    let pts: Vec<P> = route
        .guides
        .iter()
        .map(|g| match *g {
            GuideRef::Palm(p) => (p.x, p.y),
            GuideRef::Guide { phalanx, point } | GuideRef::Anchor { phalanx, point } => {
                world(finger, q, phalanx, (point.x, point.y))
            }
        })
        .collect();
    pts.windows(2).map(|w| len(sub(w[1], w[0]))).sum()
}

/// Minimum of a unimodal function on [lo, hi] by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    f((lo + hi) / 2.0).min(f(lo)).min(f(hi))
}

/// Penetration of a disc into a capsule, from a direct 1-D minimisation of
/// the centre-to-segment distance.
pub fn circle_capsule_depth(a: P, b: P, r: f64, c: P, rc: f64) -> f64 {
    let d = golden_min(|t| len(sub(add(a, ((b.0 - a.0) * t, (b.1 - a.1) * t)), c)), 0.0, 1.0);
    r + rc - d
}

/// Gravity potential of one finger (J): masses in kg, mm positions.
pub fn potential(finger: &Finger, q: [f64; 3], g: P) -> f64 {
    (1..finger.phalanges.len())
        .map(|k| {
            let ph = &finger.phalanges[k];
            let p = world(finger, q, k, (ph.length / 2.0, 0.0));
            -ph.mass * (g.0 * p.0 + g.1 * p.1) * 1e-3
        })
        .sum()
}

/// Generalised gravity torques `-dV/dq` by central differences (N·m).
pub fn gravity_torques(finger: &Finger, q: [f64; 3], g: P) -> [f64; 3] {
    let h = 1e-6;
    let mut out = [0.0; 3];
    for j in 0..3 {
        let (mut qp, mut qm) = (q, q);
        qp[j] += h;
        qm[j] -= h;
        out[j] = -(potential(finger, qp, g) - potential(finger, qm, g)) / (2.0 * h);
    }
    out
}

/// Rest angles of a finger pressed into its upper stops by gravity alone:
/// the fixed point of `q = hi + tau(q) / k`.
pub fn stop_equilibrium(finger: &Finger, g: P, k: f64) -> [f64; 3] {
    let hi = [0, 1, 2].map(|j| finger.joint_limits[j][1]);
    let mut q = hi;
    for _ in 0..200 {
        let tau = gravity_torques(finger, q, g);
        q = [0, 1, 2].map(|j| hi[j] + tau[j] / k);
    }
    q
}

/// One randomised stop-equilibrium case: random phalanx masses and gravity
/// direction, every tendon slack, joints starting on their upper stops.
/// Returns `(simulated, oracle)` angles for each finger whose gravity torque
/// holds all three joints in flexion; other fingers are skipped.
pub fn stop_equilibrium_case(rng: &mut impl Rng) -> Vec<([f64; 3], [f64; 3])> {
    let mut scene = Scene::default();
    let gm: f64 = rng.random_range(5.0..30.0);
    let ga: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    scene.gravity = Vec2::new(gm * ga.cos(), gm * ga.sin());
    for f in scene.hand.fingers.iter_mut() {
        for ph in f.phalanges.iter_mut().skip(1) {
            ph.mass = rng.random_range(0.005..0.05);
        }
    }
    for (fi, cfg) in scene.fingers.iter_mut().enumerate() {
        let f = &scene.hand.fingers[fi];
        cfg.q = [0, 1, 2].map(|j| f.joint_limits[j][1]);
    }
    scene.sim.slack_agonist = 500.0;
    scene.sim.slack_antagonist = 500.0;
    scene.sim.stop = StopMode::AtEquilibrium;
    scene.sim.equilibrium_tol = 1e-10;
    scene.sim.equilibrium_steps = 5;
    scene.sim.t_end = 5.0;
    let g = (scene.gravity.x, scene.gravity.y);
    let k = scene.hand.stop_stiffness;
    let holds: Vec<bool> = scene
        .hand
        .fingers
        .iter()
        .map(|f| {
            let hi = [0, 1, 2].map(|j| f.joint_limits[j][1]);
            gravity_torques(f, hi, g).iter().all(|t| *t > 1e-4)
        })
        .collect();
    if !holds.iter().any(|h| *h) {
        return Vec::new();
    }
    for (cfg, h) in scene.fingers.iter_mut().zip(&holds) {
        cfg.active = *h;
    }
    let trace = match simulate(&scene) {
        Ok(t) => t,
        Err(e) => panic!("stop equilibrium run: {}", e.to_string().lines().next().unwrap_or("")),
    };
    assert!(trace.equilibrium, "stop equilibrium not reached");
    assert!(trace.final_state.contacts.is_empty(), "unexpected contact in stop case");
    FingerId::ALL
        .iter()
        .filter(|id| holds[id.index()])
        .map(|id| {
            let f = scene.hand.finger(*id);
            (trace.final_state.finger_q(id.index()), stop_equilibrium(f, g, k))
        })
        .collect()
}

/// One randomised circle-versus-capsule case: `(library depth, oracle depth)`
/// when the shapes overlap by a clear margin, `None` otherwise.
pub fn contact_case(rng: &mut impl Rng) -> Option<(f64, f64)> {
    let a = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let b = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let r = rng.random_range(2.0..15.0);
    let c = (rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
    let rc = rng.random_range(5.0..40.0);
    let oracle = circle_capsule_depth(a, b, r, c, rc);
    let shape = WorldShape::Circle {
        center: Vec2::new(c.0, c.1),
        radius: rc,
    };
    let got = capsule_overlap(Vec2::new(a.0, a.1), Vec2::new(b.0, b.1), r, &shape);
    if oracle.abs() < 1e-6 {
        return None;
    }
    match got {
        Some(o) => Some((o.depth, oracle)),
        None if oracle < 0.0 => None,
        None => Some((0.0, oracle)),
    }
}

pub fn random_q(rng: &mut impl Rng, finger: &Finger) -> [f64; 3] {
    [0, 1, 2].map(|j| {
        let [lo, hi] = finger.joint_limits[j];
        rng.random_range(lo..=hi)
    })
}

/// Relative error against a reference, floored at `scale`.
pub fn rel_err(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale)
}
