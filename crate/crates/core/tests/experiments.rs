use softhand::contact::Shape;
use softhand::experiments::*;
use softhand::model::DEFAULT_NO_LOAD_SPEED;
use softhand::scene::Scene;
use softhand::FingerId;

fn within(sim: f64, hw: f64) -> bool {
    (sim - hw).abs() <= 0.5 * hw
}

fn hardware(row: &str) -> f64 {
    HARDWARE_TABLE.iter().find(|r| r.0 == row).unwrap().1
}

#[test]
fn hardware_figures_are_the_published_ones() {
    let values: Vec<f64> = HARDWARE_TABLE.iter().map(|r| r.1).collect();
    assert_eq!(values, [0.84, 0.97, 5.0, 6.0, 1.8, 0.98, 1.12]);
}

#[test]
fn single_finger_close_time() {
    let r = run_response_time(Mode::SingleFinger, Direction::Close, &Scene::default()).unwrap();
    assert!(r.passed());
    assert!(within(r.value("response_time").unwrap(), hardware("A1")));
}

#[test]
fn whole_hand_open_time() {
    let r = run_response_time(Mode::WholeHand, Direction::Open, &Scene::default()).unwrap();
    assert!(within(r.value("response_time").unwrap(), hardware("C2")));
}

#[test]
fn stalled_motor_never_reaches_the_posture() {
    let mut base = Scene::default();
    for m in &mut base.hand.drive.motors {
        m.no_load_speed = 0.0;
    }
    let r = run_response_time(Mode::SingleFinger, Direction::Close, &base).unwrap();
    assert!(!r.passed());
    assert!(r.notes.iter().any(|n| n == "did not reach posture"));
    assert!(r.value("response_time").unwrap().is_nan());
}

#[test]
fn bearing_and_closing_force_capacities() {
    let base = Scene::default();
    let b1 = run_load_test(LoadKind::Bearing, &base).unwrap();
    assert!(within(b1.value("capacity").unwrap(), hardware("B1")));
    let b3 = run_load_test(LoadKind::ClosingForce, &base).unwrap();
    assert!(within(b3.value("closing_force").unwrap(), hardware("B3")));
}

#[test]
fn slipping_clutch_cannot_bear_a_load() {
    let mut base = Scene::default();
    for c in &mut base.hand.drive.clutches {
        c.slip_torque = 0.0;
    }
    let r = run_load_test(LoadKind::Bearing, &base).unwrap();
    assert!(r.value("capacity").unwrap() < 0.1);
}

#[test]
fn capacities_sit_on_the_search_grid() {
    assert!((step_above(4.6) - 4.7).abs() < 1e-12);
    assert!((step_above(0.0) - LOAD_RESOLUTION).abs() < 1e-12);
    let r = run_load_test(LoadKind::Pushing, &Scene::default()).unwrap();
    let c = r.value("capacity").unwrap();
    assert!((c / LOAD_RESOLUTION - (c / LOAD_RESOLUTION).round()).abs() < 1e-9);
}

#[test]
fn calibration_recovers_the_default_speed() {
    let (speed, a1) = calibrate(&Scene::default()).unwrap();
    assert!((speed - DEFAULT_NO_LOAD_SPEED).abs() < 0.01, "{speed}");
    assert!((a1 - hardware("A1")).abs() < 0.01, "{a1}");
}

#[test]
fn grasp_suite_holds_most_objects_in_several_postures() {
    let objects = default_grasp_objects();
    assert_eq!(objects.len(), GRASP_SET_SIZE);
    assert!(objects.iter().all(|o| (0.1..=0.8).contains(&o.mass)));
    let reports = run_grasp_suite(&objects, &Scene::default());
    let summary = reports.last().unwrap();
    assert!(summary.passed());
    assert!(summary.value("stable").unwrap() >= GRASP_MIN_STABLE as f64);
    assert!(summary.value("distinct_postures").unwrap() >= MIN_DISTINCT_POSTURES as f64);
    let large = reports.iter().find(|r| r.name == "grasp_large_ball").unwrap();
    assert!(large.passed());
}

#[test]
fn oversized_object_is_reported_unstable() {
    let mut obj = default_grasp_objects().remove(0);
    obj.name = "drum".into();
    obj.shape = Shape::Circle { radius: 100.0 };
    let reports = run_grasp_suite(&[obj], &Scene::default());
    assert!(!reports[0].passed());
    assert!(!reports[0].notes.is_empty());
    assert_eq!(reports[1].value("stable"), Some(0.0));
}

#[test]
fn grasp_reports_repeat_exactly() {
    let objects = &default_grasp_objects()[..2];
    let a = run_grasp_suite(objects, &Scene::default());
    let b = run_grasp_suite(objects, &Scene::default());
    assert_eq!(a, b);
    assert_eq!(reports_csv(&a), reports_csv(&b));
}

#[test]
fn blocked_middle_finger_leaves_the_others_free() {
    let r = run_blocked_finger(Some(FingerId::Middle), HALF_BLOCK, &Scene::default()).unwrap();
    assert!(r.passed(), "{r:?}");
    for f in ["thumb", "index", "pinkie"] {
        assert!(r.value(&format!("closure_ratio_{f}")).unwrap() >= ADAPTIVE_CLOSURE);
    }
    let middle = r.value("closure_middle").unwrap();
    assert!(middle <= 0.5 + 1e-9);
    let slip = Scene::default().hand.drive.clutches[0].slip_torque;
    assert_eq!(r.value("blocked_clutch_final"), Some(slip));
}

#[test]
fn nothing_blocked_is_the_plain_close() {
    let r = run_blocked_finger(None, HALF_BLOCK, &Scene::default()).unwrap();
    assert!(r.passed());
    for f in FingerId::ALL {
        assert!(r.value(&format!("closure_{}", f.name())).unwrap() >= POSTURE_THRESHOLD);
        assert_eq!(r.value(&format!("closure_ratio_{}", f.name())), Some(1.0));
    }
}

#[test]
fn zero_slack_reopens_like_the_single_finger_open() {
    let base = Scene::default();
    let slack = run_slack_demo(&[0.0], &base).unwrap();
    let a2 = run_response_time(Mode::SingleFinger, Direction::Open, &base).unwrap();
    assert_eq!(slack.value("delay_0mm"), a2.value("response_time"));
}

#[test]
fn slack_delays_never_shrink() {
    let r = run_slack_demo(&SLACK_SWEEP, &Scene::default()).unwrap();
    assert!(r.passed());
    let d: Vec<f64> = SLACK_SWEEP.iter().map(|s| r.value(&format!("delay_{s}mm")).unwrap()).collect();
    assert!(d.windows(2).all(|w| w[1] >= w[0]), "{d:?}");
    assert!(d[3] > d[0]);
    assert!(r.value("min_tension").unwrap() >= 0.0);
}

#[test]
fn negative_slack_is_rejected() {
    let r = run_slack_demo(&[-5.0], &Scene::default()).unwrap();
    assert!(!r.passed());
}

#[test]
fn fingerprints_follow_the_configuration() {
    let a = Scene::default();
    let mut b = Scene::default();
    assert_eq!(fingerprint(&a, "p"), fingerprint(&b, "p"));
    assert_ne!(fingerprint(&a, "p"), fingerprint(&a, "q"));
    b.sim.dt = 0.002;
    assert_ne!(fingerprint(&a, "p"), fingerprint(&b, "p"));
    assert_eq!(fingerprint(&a, "p").len(), 64);
}

#[test]
fn table_summary_compares_every_row() {
    let reports = run_table1(&Scene::default()).unwrap();
    assert_eq!(reports.len(), HARDWARE_TABLE.len() + 1);
    let summary = reports.last().unwrap();
    assert!(summary.passed());
    let text = table1_text(summary);
    for (row, _, _) in HARDWARE_TABLE {
        assert!(text.contains(row));
    }
    let manifest: serde_json::Value = serde_json::from_str(&reports_manifest(&reports)).unwrap();
    assert_eq!(manifest.as_array().map(Vec::len), Some(reports.len()));
}
