mod common;

use common::*;
use softhand::kinematics::{chain_pose, moment_arms, route_length_in};
use softhand::{build_default_hand, FingerId};

const CASES: usize = 60;

#[test]
fn forward_kinematics_matches_angle_accumulation() {
    let hand = build_default_hand();
    let mut r = rng(1);
    for _ in 0..CASES {
        for f in &hand.fingers {
            let q = random_q(&mut r, f);
            let pose = chain_pose(f, &q);
            let want = frames(f, q);
            for (k, (o, th)) in want.iter().enumerate() {
                let fr = pose.frames[k];
                assert!((fr.origin.x - o.0).abs() < 1e-6 && (fr.origin.y - o.1).abs() < 1e-6);
                let d = (fr.angle - th).rem_euclid(std::f64::consts::TAU);
                assert!(d.min(std::f64::consts::TAU - d) < 1e-9, "phalanx {k} angle");
            }
            let tip = pose.fingertip(f);
            let t = fingertip(f, q);
            assert!((tip.x - t.0).abs() < 1e-6 && (tip.y - t.1).abs() < 1e-6);
        }
    }
}

#[test]
fn path_lengths_match_guide_polylines() {
    let hand = build_default_hand();
    let mut r = rng(2);
    for _ in 0..CASES {
        for route in &hand.routes {
            let f = hand.finger(route.finger);
            let q = random_q(&mut r, f);
            let got = route_length_in(route, &chain_pose(f, &q));
            let want = route_length(route, f, q);
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }
}

#[test]
fn moment_arms_match_central_differences() {
    let hand = build_default_hand();
    let mut r = rng(3);
    let h = 1e-5;
    for route in &hand.routes {
        let f = hand.finger(route.finger);
        for _ in 0..100 {
            let q = random_q(&mut r, f);
            let arms = moment_arms(route, f, &q);
            for j in 0..3 {
                let (mut qp, mut qm) = (q, q);
                qp[j] += h;
                qm[j] -= h;
                let fd = -(route_length(route, f, qp) - route_length(route, f, qm)) / (2.0 * h);
                assert!(rel_err(arms[j], fd, 1.0) < 1e-6, "joint {j}: {} vs {fd}", arms[j]);
            }
        }
    }
}

#[test]
fn flexor_arms_flex_and_extensor_arms_extend() {
    let hand = build_default_hand();
    let mut r = rng(4);
    for route in &hand.routes {
        let f = hand.finger(route.finger);
        for _ in 0..20 {
            let q = random_q(&mut r, f);
            let arms = moment_arms(route, f, &q);
            let sign = match route.side {
                softhand::TendonSide::Flexor => 1.0,
                softhand::TendonSide::Extensor => -1.0,
            };
            assert!(arms.iter().all(|a| a * sign > 0.0), "{:?} {arms:?}", route.side);
        }
    }
}

#[test]
fn contact_depths_match_distance_minimisation() {
    let mut r = rng(5);
    let mut overlapping = 0;
    for _ in 0..2000 {
        if let Some((got, want)) = contact_case(&mut r) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
            overlapping += 1;
        }
    }
    assert!(overlapping >= 50, "only {overlapping} overlapping cases");
}

#[test]
fn stop_equilibria_match_fixed_point() {
    let mut r = rng(6);
    let mut n = 0;
    while n < 50 {
        for (sim, oracle) in stop_equilibrium_case(&mut r) {
            for j in 0..3 {
                assert!((sim[j] - oracle[j]).abs() < 1e-6, "{sim:?} vs {oracle:?}");
            }
            n += 1;
        }
    }
}

#[test]
fn mirrored_thumb_flexes_the_other_way() {
    let hand = build_default_hand();
    let thumb = hand.finger(FingerId::Thumb);
    let index = hand.finger(FingerId::Index);
    let q = [0.5, 0.5, 0.5];
    let t = fingertip(thumb, q);
    let i = fingertip(index, q);
    // Both fingertips curl toward the palm centreline.
    assert!(t.0 < thumb.base_pose.origin.x);
    assert!(i.0 > index.base_pose.origin.x);
}
