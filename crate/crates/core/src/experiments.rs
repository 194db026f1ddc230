//! Scripted test protocols: response times, load capacities, grasping,
//! blocked-finger adaptivity and slack.
//!
//! Every protocol takes a base scene (the "overrides": hand parameters,
//! simulation settings) and builds its own fixture scene on top of it.

use crate::contact::{Pose2, Shape};
use crate::geom::Vec2;
use crate::model::{FingerId, HandModel, Shaft, TendonSide, FINGER_COUNT, JOINTS_PER_FINGER};
use crate::scene::{fmt_num, serialize_scene, ControlCommand, ObjectSpec, Scene, SpeedCommand, StopMode};
use crate::solver::{simulate_from, simulate_with, SimError, SimState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Reference results of the physical hand: (row, value, unit).
pub const HARDWARE_TABLE: [(&str, f64, &str); 7] = [
    ("A1", 0.84, "s"),
    ("A2", 0.97, "s"),
    ("B1", 5.0, "N"),
    ("B2", 6.0, "N"),
    ("B3", 1.8, "N"),
    ("C1", 0.98, "s"),
    ("C2", 1.12, "s"),
];

/// Relative band within which a simulated row counts as reproducing the hardware.
pub const TABLE1_TOLERANCE: f64 = 0.5;

/// Closure fraction that counts as "reached the posture".
pub const POSTURE_THRESHOLD: f64 = 0.99;

/// Load-search resolution (N).
pub const LOAD_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub name: String,
    pub value: f64,
    pub unit: String,
    /// `None` for informational values.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
}

/// A labelled state worth rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub scene: Scene,
    pub state: SimState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub scalars: Vec<Scalar>,
    pub criteria: Vec<Criterion>,
    /// Paths of files written for this report (frames, traces).
    pub traces: Vec<String>,
    /// SHA-256 over the fixture scene and protocol parameters.
    pub fingerprint: String,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, fingerprint: String) -> Self {
        Self {
            name: name.into(),
            scalars: Vec::new(),
            criteria: Vec::new(),
            traces: Vec::new(),
            fingerprint,
            notes: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn scalar(&mut self, name: &str, value: f64, unit: &str, pass: Option<bool>) {
        self.scalars.push(Scalar {
            name: name.to_string(),
            value,
            unit: unit.to_string(),
            pass,
        });
    }

    pub fn criterion(&mut self, name: &str, pass: bool) {
        self.criteria.push(Criterion {
            name: name.to_string(),
            pass,
        });
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass) && self.scalars.iter().all(|s| s.pass != Some(false))
    }
}

/// One row per scalar: `name,value,unit,pass`, names prefixed by the report.
pub fn reports_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("name,value,unit,pass\n");
    for r in reports {
        for s in &r.scalars {
            let pass = match s.pass {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            out.push_str(&format!("{}.{},{},{},{}\n", r.name, s.name, fmt_num(s.value), s.unit, pass));
        }
        for c in &r.criteria {
            out.push_str(&format!("{}.{},{},,{}\n", r.name, c.name, u8::from(c.pass), c.pass));
        }
    }
    out
}

/// JSON manifest of reports: names, fingerprints, criteria and trace paths.
pub fn reports_manifest(reports: &[ExperimentReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

pub fn fingerprint(scene: &Scene, protocol: &str) -> String {
    let mut h = Sha256::new();
    h.update(serialize_scene(scene).as_bytes());
    h.update(b"\n--\n");
    h.update(protocol.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Mean fraction of the flexion range covered by the listed fingers.
pub fn closure_fraction(model: &HandModel, q: &[f64], fingers: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &fi in fingers {
        for j in 0..JOINTS_PER_FINGER {
            num += q[3 * fi + j];
            den += model.fingers[fi].joint_limits[j][1];
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    SingleFinger,
    WholeHand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Close,
    Open,
}

fn active_fingers(scene: &Scene) -> Vec<usize> {
    (0..FINGER_COUNT).filter(|&i| scene.fingers[i].active).collect()
}

fn set_mode(scene: &mut Scene, mode: Mode) {
    for (i, f) in scene.fingers.iter_mut().enumerate() {
        f.active = mode == Mode::WholeHand || i == FingerId::Index.index();
    }
}

fn fully_flexed(scene: &mut Scene) {
    for (i, f) in scene.fingers.iter_mut().enumerate() {
        for j in 0..JOINTS_PER_FINGER {
            f.q[j] = scene.hand.fingers[i].joint_limits[j][1];
        }
    }
}

/// One shaft drives at full speed while the other pays out at the same
/// speed; `close` picks the agonist as the driver.
fn drive(scene: &mut Scene, t: f64, close: bool, speed: f64) {
    let (driver, follower) = if close {
        (Shaft::Agonist, Shaft::Antagonist)
    } else {
        (Shaft::Antagonist, Shaft::Agonist)
    };
    scene.control.retain(|c| c.t < t);
    scene.control.push(ControlCommand {
        t,
        motor: driver,
        target: SpeedCommand::Speed(speed),
    });
    scene.control.push(ControlCommand {
        t,
        motor: follower,
        target: SpeedCommand::Speed(-speed),
    });
}

fn hold(scene: &mut Scene, t: f64) {
    scene.control.retain(|c| c.t < t);
    for motor in [Shaft::Agonist, Shaft::Antagonist] {
        scene.control.push(ControlCommand {
            t,
            motor,
            target: SpeedCommand::Hold,
        });
    }
}

fn no_load_speed(scene: &Scene, shaft: Shaft) -> f64 {
    scene.hand.drive.motors[shaft.index()].no_load_speed
}

/// Time to reach a posture, or `None` within `t_max`.
pub struct Timed {
    pub time: Option<f64>,
    pub state: SimState,
    pub max_clutch_torque: f64,
    pub min_tension: f64,
}

fn time_to_posture(scene: &Scene, start: SimState, close: bool, t_max: f64) -> Result<Timed, SimError> {
    let mut s = scene.clone();
    s.sim.t_end = t_max;
    s.sim.stop = StopMode::AtEnd;
    let fingers = active_fingers(&s);
    let step0 = start.step;
    let reached = |st: &SimState| {
        let c = closure_fraction(&s.hand, &st.q, &fingers);
        if close {
            c >= POSTURE_THRESHOLD
        } else {
            c <= 1.0 - POSTURE_THRESHOLD
        }
    };
    let already = reached(&start);
    let trace = simulate_with(&s, start, reached)?;
    let st = trace.final_state;
    // Rounded to the nanosecond so step counts print cleanly.
    let time = (already || reached(&st)).then(|| ((st.step - step0) as f64 * s.sim.dt * 1e9).round() / 1e9);
    Ok(Timed {
        time,
        state: st,
        max_clutch_torque: trace.stats.max_clutch_torque,
        min_tension: trace.stats.min_tension,
    })
}

/// Longest simulated time a response-time run may take.
pub const RESPONSE_T_MAX: f64 = 5.0;

/// Fixture scene for a response-time run.
pub fn response_scene(mode: Mode, direction: Direction, base: &Scene) -> Scene {
    let mut s = base.clone();
    set_mode(&mut s, mode);
    s.objects.clear();
    s.control.clear();
    for f in &mut s.fingers {
        f.q = [0.0; 3];
        f.block = None;
    }
    if direction == Direction::Open {
        fully_flexed(&mut s);
    }
    let close = direction == Direction::Close;
    let speed = no_load_speed(&s, if close { Shaft::Agonist } else { Shaft::Antagonist });
    drive(&mut s, 0.0, close, speed);
    s
}

/// Time for the active fingers to close from full extension (or open from
/// full flexion) to within 1% of the target posture.
pub fn run_response_time(mode: Mode, direction: Direction, base: &Scene) -> Result<ExperimentReport, SimError> {
    let scene = response_scene(mode, direction, base);
    let name = match (mode, direction) {
        (Mode::SingleFinger, Direction::Close) => "A1",
        (Mode::SingleFinger, Direction::Open) => "A2",
        (Mode::WholeHand, Direction::Close) => "C1",
        (Mode::WholeHand, Direction::Open) => "C2",
    };
    let mut report = ExperimentReport::new(name, fingerprint(&scene, &format!("response_time {mode:?} {direction:?}")));
    let timed = time_to_posture(&scene, SimState::initial(&scene), direction == Direction::Close, RESPONSE_T_MAX)?;
    report.criterion("reached_posture", timed.time.is_some());
    if timed.time.is_none() {
        report.notes.push("did not reach posture".to_string());
    }
    report.scalar("response_time", timed.time.unwrap_or(f64::NAN), "s", None);
    report.scalar("max_clutch_torque", timed.max_clutch_torque, "N·m", None);
    report.scalar("min_tension", timed.min_tension, "N", None);
    report.snapshots.push(Snapshot {
        label: name.to_lowercase(),
        scene,
        state: timed.state,
    });
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadKind {
    Bearing,
    Pushing,
    ClosingForce,
}

/// Fingertip drop beyond which a bearing load counts as dropped (mm).
pub const DROP_LIMIT: f64 = 10.0;
/// Slider travel that counts as "moved" in the pushing test (mm).
pub const PUSH_DISTANCE: f64 = 10.0;
/// Upper end of the load searches (N).
pub const LOAD_SEARCH_MAX: f64 = 30.0;
const SETTLE_T: f64 = 3.0;
const G: f64 = 9.81;

/// Unit vector toward the palmar side of a finger's base, i.e. the
/// direction its flexion sweeps the fingertip at full extension.
fn palmar_direction(model: &HandModel, finger: usize) -> Vec2 {
    model.fingers[finger].base_pose.apply_vec(Vec2::new(0.0, -1.0)).normalized()
}

fn settle(scene: &Scene, start: SimState, t_end: f64) -> Result<SimState, SimError> {
    let mut s = scene.clone();
    s.sim.t_end = t_end;
    s.sim.stop = StopMode::AtEquilibrium;
    Ok(simulate_from(&s, start)?.final_state)
}

/// Close the active fingers, then hold both motors and settle.
fn close_and_hold(scene: &mut Scene) -> Result<(SimState, bool), SimError> {
    let speed = no_load_speed(scene, Shaft::Agonist);
    drive(scene, 0.0, true, speed);
    let timed = time_to_posture(scene, SimState::initial(scene), true, RESPONSE_T_MAX)?;
    let t = timed.state.t;
    hold(scene, t);
    let st = settle(scene, timed.state, SETTLE_T)?;
    Ok((st, timed.time.is_some()))
}

/// Largest multiple of `LOAD_RESOLUTION` in `[0, LOAD_SEARCH_MAX]` for
/// which `holds` is true, assuming `holds` is monotone (true then false).
/// Returns 0 if even the smallest step fails. The bracket is grown by
/// doubling from the smallest load so that grossly excessive loads, which
/// fling the finger open, are never tried.
fn search_capacity(mut holds: impl FnMut(f64) -> Result<bool, SimError>) -> Result<f64, SimError> {
    let top = (LOAD_SEARCH_MAX / LOAD_RESOLUTION).round() as i64;
    let per_unit = (1.0 / LOAD_RESOLUTION).round();
    let load = |n: i64| n as f64 / per_unit;
    // Invariant: lo holds (0 trivially), hi fails (or is past the top).
    let mut lo = 0i64;
    let mut hi = 1i64;
    loop {
        if hi > top {
            if holds(load(top))? {
                return Ok(load(top));
            }
            hi = top;
            break;
        }
        if !holds(load(hi))? {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if holds(load(mid))? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(load(lo))
}

/// The next load of the search grid above `load`.
pub fn step_above(load: f64) -> f64 {
    let per_unit = (1.0 / LOAD_RESOLUTION).round();
    ((load * per_unit).round() + 1.0) / per_unit
}

/// Single finger with gravity pointing palmar, so a weight on the medial
/// phalanx pulls the curled finger open (a hook holding a bag).
pub fn bearing_scene(base: &Scene) -> Scene {
    let mut s = base.clone();
    set_mode(&mut s, Mode::SingleFinger);
    s.objects.clear();
    s.control.clear();
    for f in &mut s.fingers {
        f.q = [0.0; 3];
        f.block = None;
    }
    s.gravity = palmar_direction(&s.hand, FingerId::Index.index()) * G;
    s
}

/// Phalanx that carries the bearing load.
pub const BEARING_PHALANX: usize = 2;

fn with_bearing_load(scene: &Scene, load: f64) -> Scene {
    let mut s = scene.clone();
    let fi = FingerId::Index.index();
    s.hand.fingers[fi].phalanges[BEARING_PHALANX].mass += load / s.gravity.norm();
    s
}

fn fingertip(scene: &Scene, state: &SimState, finger: usize) -> Vec2 {
    let poses = state.poses(&scene.hand);
    poses.fingers[finger].fingertip(&scene.hand.fingers[finger])
}

fn run_bearing(base: &Scene) -> Result<ExperimentReport, SimError> {
    let mut scene = bearing_scene(base);
    let fi = FingerId::Index.index();
    let (held, closed) = close_and_hold(&mut scene)?;
    let mut report = ExperimentReport::new("B1", fingerprint(&scene, "load bearing"));
    report.criterion("closed_before_loading", closed);
    let down = scene.gravity.normalized();
    let tip0 = fingertip(&scene, &held, fi);
    let drop_at = |load: f64| -> Result<(f64, SimState), SimError> {
        let s = with_bearing_load(&scene, load);
        let st = settle(&s, held.clone(), SETTLE_T)?;
        Ok(((fingertip(&s, &st, fi) - tip0).dot(down), st))
    };
    let capacity = if closed {
        search_capacity(|w| match drop_at(w) {
            Ok((d, _)) => Ok(d <= DROP_LIMIT),
            // The finger was flung open faster than the step can follow.
            Err(SimError::NumericalBlowup { .. }) => Ok(false),
            Err(e) => Err(e),
        })?
    } else {
        report.notes.push("finger did not close; nothing to load".to_string());
        0.0
    };
    report.scalar("capacity", capacity, "N", None);
    if closed {
        let (d, st) = drop_at(capacity)?;
        report.scalar("drop_at_capacity", d, "mm", None);
        report.scalar("drop_above_capacity", drop_at(step_above(capacity))?.0, "mm", None);
        report.snapshots.push(Snapshot {
            label: "b1".to_string(),
            scene: with_bearing_load(&scene, capacity),
            state: st,
        });
    }
    Ok(report)
}

/// Side length of the pushed slider (mm).
pub const SLIDER_SIZE: f64 = 30.0;
const SLIDER_MASS: f64 = 0.1;
/// Sliding friction between the obstacle and its table: the finger must
/// overcome this fraction of the obstacle's weight to move it.
pub const SLIDER_TABLE_MU: f64 = 0.3;

fn square(side: f64) -> Shape {
    let h = side / 2.0;
    Shape::Polygon {
        vertices: vec![Vec2::new(-h, -h), Vec2::new(h, -h), Vec2::new(h, h), Vec2::new(-h, h)],
    }
}

/// Start posture of the pushing test (fractions of each flexion limit).
pub const PUSH_POSTURE: [f64; 3] = [0.5, 0.5, 0.5];
/// Phalanx whose back pushes the slider (1 = proximal).
pub const PUSH_PHALANX: usize = 1;

/// Half-flexed single finger in zero gravity with a slider resting
/// against the back of the proximal phalanx; the finger then extends.
pub fn pushing_scene(base: &Scene, slider_weight: f64) -> Scene {
    pushing_scene_at(base, slider_weight, PUSH_POSTURE, PUSH_PHALANX)
}

pub fn pushing_scene_at(base: &Scene, slider_weight: f64, posture: [f64; 3], phalanx: usize) -> Scene {
    let mut s = base.clone();
    set_mode(&mut s, Mode::SingleFinger);
    s.objects.clear();
    s.control.clear();
    for (i, f) in s.fingers.iter_mut().enumerate() {
        f.q = std::array::from_fn(|j| posture[j] * s.hand.fingers[i].joint_limits[j][1]);
        f.block = None;
    }
    s.gravity = Vec2::ZERO;
    let fi = FingerId::Index.index();
    let finger = &s.hand.fingers[fi];
    let q = s.fingers[fi].q;
    let pose = crate::kinematics::chain_pose(finger, &q);
    let frame = pose.frames[phalanx];
    let mid = pose.point(phalanx, Vec2::new(finger.phalanges[phalanx].length / 2.0, 0.0));
    let dorsal = frame.apply_vec(Vec2::new(0.0, 1.0)).normalized();
    let centre = mid + dorsal * (finger.half_width + SLIDER_SIZE / 2.0);
    s.objects.push(ObjectSpec {
        name: "slider".to_string(),
        shape: square(SLIDER_SIZE),
        mass: SLIDER_MASS,
        pose: Pose2 {
            position: centre,
            angle: dorsal.y.atan2(dorsal.x) - std::f64::consts::FRAC_PI_2,
        },
        fixed: false,
        mu: None,
        friction_load: SLIDER_TABLE_MU * slider_weight,
    });
    let speed = no_load_speed(&s, Shaft::Antagonist);
    drive(&mut s, 0.0, false, speed);
    s.sim.t_end = RESPONSE_T_MAX;
    s.sim.stop = StopMode::AtEnd;
    s
}

fn push_travel(base: &Scene, weight: f64) -> Result<(f64, Scene, SimState), SimError> {
    let scene = pushing_scene(base, weight);
    let start = SimState::initial(&scene);
    let p0 = start.objects[0].pose.position;
    let st = simulate_from(&scene, start)?.final_state;
    Ok(((st.objects[0].pose.position - p0).norm(), scene, st))
}

fn run_pushing(base: &Scene) -> Result<ExperimentReport, SimError> {
    let mut report = ExperimentReport::new("B2", fingerprint(&pushing_scene(base, 0.0), "load pushing"));
    report
        .notes
        .push("capacity is the resisting weight of the moved obstacle, not a fingertip force".to_string());
    let capacity = search_capacity(|w| Ok(push_travel(base, w)?.0 >= PUSH_DISTANCE))?;
    report.scalar("capacity", capacity, "N", None);
    let (d, scene, st) = push_travel(base, capacity)?;
    report.scalar("travel_at_capacity", d, "mm", None);
    report.scalar("travel_above_capacity", push_travel(base, step_above(capacity))?.0, "mm", None);
    report.snapshots.push(Snapshot {
        label: "b2".to_string(),
        scene,
        state: st,
    });
    Ok(report)
}

/// Posture (fractions of each joint's flexion limit) at which the
/// fingertip meets the plate: proximal joints closed, distal joint a third of the way.
pub const PLATE_POSTURE: [f64; 3] = [1.0, 1.0, 0.35];
/// Plate side length across the fingertip (mm).
pub const PLATE_LENGTH: f64 = 20.0;
const PLATE_THICKNESS: f64 = 10.0;

/// Single finger closing onto a fixed plate placed where the fingertip
/// arrives at [`PLATE_POSTURE`], facing the distal joint's direction of travel.
pub fn closing_force_scene(base: &Scene) -> Scene {
    closing_force_scene_at(base, PLATE_POSTURE)
}

pub fn closing_force_scene_at(base: &Scene, posture: [f64; 3]) -> Scene {
    let mut s = base.clone();
    set_mode(&mut s, Mode::SingleFinger);
    s.objects.clear();
    s.control.clear();
    for f in &mut s.fingers {
        f.q = [0.0; 3];
        f.block = None;
    }
    s.gravity = Vec2::ZERO;
    let fi = FingerId::Index.index();
    let finger = &s.hand.fingers[fi];
    let q: [f64; 3] = std::array::from_fn(|j| posture[j] * finger.joint_limits[j][1]);
    let pose = crate::kinematics::chain_pose(finger, &q);
    let tip = pose.fingertip(finger);
    let travel = pose.point_velocity(3, tip, JOINTS_PER_FINGER - 1).normalized();
    let centre = tip + travel * (finger.half_width + PLATE_THICKNESS / 2.0);
    let (hl, ht) = (PLATE_LENGTH / 2.0, PLATE_THICKNESS / 2.0);
    s.objects.push(ObjectSpec {
        name: "plate".to_string(),
        shape: Shape::Polygon {
            vertices: vec![Vec2::new(-ht, -hl), Vec2::new(ht, -hl), Vec2::new(ht, hl), Vec2::new(-ht, hl)],
        },
        mass: 1.0,
        pose: Pose2 {
            position: centre,
            angle: travel.y.atan2(travel.x),
        },
        fixed: true,
        mu: None,
        friction_load: 0.0,
    });
    s
}

fn run_closing_force(base: &Scene) -> Result<ExperimentReport, SimError> {
    let mut scene = closing_force_scene(base);
    let mut report = ExperimentReport::new("B3", fingerprint(&scene, "closing force"));
    let speed = no_load_speed(&scene, Shaft::Agonist);
    drive(&mut scene, 0.0, true, speed);
    scene.sim.t_end = RESPONSE_T_MAX;
    scene.sim.stop = StopMode::AtEquilibrium;
    let st = simulate_from(&scene, SimState::initial(&scene))?.final_state;
    let force: f64 = st.contacts.iter().filter(|c| c.object == 0).map(|c| c.normal_force).sum();
    report.criterion("touching_plate", force > 0.0);
    report.scalar("closing_force", force, "N", None);
    report.snapshots.push(Snapshot {
        label: "b3".to_string(),
        scene,
        state: st,
    });
    Ok(report)
}

pub fn run_load_test(kind: LoadKind, base: &Scene) -> Result<ExperimentReport, SimError> {
    match kind {
        LoadKind::Bearing => run_bearing(base),
        LoadKind::Pushing => run_pushing(base),
        LoadKind::ClosingForce => run_closing_force(base),
    }
}

/// Row name → report, in the order of [`HARDWARE_TABLE`].
fn table1_row(name: &str, base: &Scene) -> Result<ExperimentReport, SimError> {
    match name {
        "A1" => run_response_time(Mode::SingleFinger, Direction::Close, base),
        "A2" => run_response_time(Mode::SingleFinger, Direction::Open, base),
        "C1" => run_response_time(Mode::WholeHand, Direction::Close, base),
        "C2" => run_response_time(Mode::WholeHand, Direction::Open, base),
        "B1" => run_load_test(LoadKind::Bearing, base),
        "B2" => run_load_test(LoadKind::Pushing, base),
        _ => run_load_test(LoadKind::ClosingForce, base),
    }
}

/// Headline scalar of a hardware-table row report.
fn headline(report: &ExperimentReport) -> f64 {
    ["response_time", "capacity", "closing_force"]
        .iter()
        .find_map(|k| report.value(k))
        .unwrap_or(f64::NAN)
}

/// Runs all seven hardware-table rows and appends a `table1` report comparing
/// each headline value with the hardware figure (±[`TABLE1_TOLERANCE`]).
pub fn run_table1(base: &Scene) -> Result<Vec<ExperimentReport>, SimError> {
    let mut reports = Vec::with_capacity(HARDWARE_TABLE.len() + 1);
    for (name, _, _) in HARDWARE_TABLE {
        reports.push(table1_row(name, base)?);
    }
    let mut summary = ExperimentReport::new("table1", fingerprint(base, "table1"));
    for ((name, hw, unit), r) in HARDWARE_TABLE.iter().zip(&reports) {
        let sim = headline(r);
        let within = (sim - hw).abs() <= TABLE1_TOLERANCE * hw;
        summary.scalar(&format!("{name}_hardware"), *hw, unit, None);
        summary.scalar(&format!("{name}_sim"), sim, unit, Some(within && r.passed()));
    }
    reports.push(summary);
    Ok(reports)
}

/// Plain-text comparison table for a `table1` summary report.
pub fn table1_text(summary: &ExperimentReport) -> String {
    let mut out = format!("{:<4} {:>8} {:>8} {:>5}  {}\n", "row", "hw", "sim", "unit", "within");
    for (name, hw, unit) in HARDWARE_TABLE {
        let s = summary.scalars.iter().find(|s| s.name == format!("{name}_sim"));
        let (sim, ok) = s.map_or((f64::NAN, false), |s| (s.value, s.pass == Some(true)));
        out.push_str(&format!(
            "{name:<4} {hw:>8.2} {sim:>8.2} {unit:>5}  {}\n",
            if ok { "yes" } else { "no" }
        ));
    }
    out
}

/// No-load speed bracket searched by [`calibrate`] (rad/s).
pub const CALIBRATION_SPEED_RANGE: (f64, f64) = (2.0, 40.0);

/// Fits the motors' no-load speed so the single-finger close time (A1)
/// matches the hardware figure; joint damping and guide friction stay at
/// the base scene's values. Returns the fitted speed and the A1 time.
pub fn calibrate(base: &Scene) -> Result<(f64, f64), SimError> {
    let target = HARDWARE_TABLE[0].1;
    let a1 = |speed: f64| -> Result<f64, SimError> {
        let mut s = base.clone();
        for m in &mut s.hand.drive.motors {
            m.no_load_speed = speed;
        }
        Ok(run_response_time(Mode::SingleFinger, Direction::Close, &s)?
            .value("response_time")
            .unwrap_or(f64::INFINITY))
    };
    // Close time falls as the motor speeds up.
    let (mut lo, mut hi) = CALIBRATION_SPEED_RANGE;
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if a1(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-3 {
            break;
        }
    }
    let speed = 0.5 * (lo + hi);
    Ok((speed, a1(speed)?))
}

/// Object/finger posture differences below this count as "the same
/// posture" when counting distinct grasps (rad, max over joints).
pub const DISTINCT_POSTURE: f64 = 10.0 * std::f64::consts::PI / 180.0;
/// Stability tolerance on the object's residual wrench (N and N·m).
pub const GRASP_TOL: f64 = 1e-3;
/// Simulated time allowed for closing on and settling around an object (s).
pub const GRASP_T_MAX: f64 = 6.0;
/// Pass mark of the grasp suite: this many of every [`GRASP_SET_SIZE`]
/// objects must end in a stable grasp.
pub const GRASP_MIN_STABLE: usize = 7;
pub const GRASP_SET_SIZE: usize = 9;
/// Stable grasps whose final postures must differ pairwise.
pub const MIN_DISTINCT_POSTURES: usize = 3;
/// Gap left between a spawned object and the palm (mm).
const SPAWN_GAP: f64 = 0.5;

fn object(name: &str, shape: Shape, mass: f64, mu: Option<f64>) -> ObjectSpec {
    ObjectSpec {
        name: name.to_string(),
        shape,
        mass,
        pose: Pose2::default(),
        fixed: false,
        mu,
        friction_load: 0.0,
    }
}

fn rect(w: f64, h: f64) -> Shape {
    let (x, y) = (w / 2.0, h / 2.0);
    Shape::Polygon {
        vertices: vec![Vec2::new(-x, -y), Vec2::new(x, -y), Vec2::new(x, y), Vec2::new(-x, y)],
    }
}

/// Half-disc, round side down: the cross-section of a bowl.
fn bowl(radius: f64, segments: usize) -> Shape {
    let vertices = (0..=segments)
        .map(|i| {
            let a = std::f64::consts::PI * (1.0 + i as f64 / segments as f64);
            Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect();
    Shape::Polygon { vertices }
}

/// Planar stand-ins for the household objects of the grasping trials,
/// 0.1–0.8 kg.
pub fn default_grasp_objects() -> Vec<ObjectSpec> {
    vec![
        object("ball", Shape::Circle { radius: 30.0 }, 0.1, None),
        object("large_ball", Shape::Circle { radius: 45.0 }, 0.4, None),
        object("wheel", Shape::Circle { radius: 40.0 }, 0.3, None),
        object("box", rect(60.0, 80.0), 0.5, None),
        object(
            "handle",
            Shape::Capsule {
                a: Vec2::new(0.0, -30.0),
                b: Vec2::new(0.0, 30.0),
                radius: 15.0,
            },
            0.2,
            None,
        ),
        object("cup", rect(70.0, 90.0), 0.3, None),
        object("bowl", bowl(55.0, 12), 0.8, None),
        object("tape", Shape::Circle { radius: 35.0 }, 0.15, None),
        object("soft_toy", Shape::Circle { radius: 40.0 }, 0.2, Some(1.5)),
    ]
}

/// Widest object the open hand can take between its fingers (mm).
pub fn max_aperture(model: &HandModel) -> f64 {
    model.params.aperture
}

/// Lowest point of a shape in its own frame (mm, ≤ 0 for centred shapes).
fn shape_bottom(shape: &Shape) -> f64 {
    match shape {
        Shape::Circle { radius } => -radius,
        Shape::Capsule { a, b, radius } => a.y.min(b.y) - radius,
        Shape::Polygon { vertices } => vertices.iter().map(|v| v.y).fold(f64::INFINITY, f64::min),
    }
}

/// Whole hand, open, with `obj` resting just above the middle of the palm
/// and the agonist closing while the antagonist pays out.
pub fn grasp_scene(base: &Scene, obj: &ObjectSpec) -> Scene {
    let mut s = base.clone();
    set_mode(&mut s, Mode::WholeHand);
    s.objects.clear();
    s.control.clear();
    for f in &mut s.fingers {
        f.q = [0.0; 3];
        f.block = None;
    }
    let palm_top = s.hand.palm.a.y.max(s.hand.palm.b.y) + s.hand.palm.radius;
    let mut o = obj.clone();
    o.fixed = false;
    o.pose = Pose2 {
        position: Vec2::new(0.0, palm_top - shape_bottom(&o.shape) + SPAWN_GAP),
        angle: 0.0,
    };
    s.objects.push(o);
    let speed = no_load_speed(&s, Shaft::Agonist);
    drive(&mut s, 0.0, true, speed);
    s.sim.t_end = GRASP_T_MAX;
    s.sim.stop = StopMode::AtEquilibrium;
    s
}

fn joint_names(fi: usize) -> [String; JOINTS_PER_FINGER] {
    let f = FingerId::ALL[fi].name();
    ["mcp", "pip", "dip"].map(|j| format!("q_{f}_{j}"))
}

fn run_grasp(base: &Scene, obj: &ObjectSpec) -> ExperimentReport {
    let scene = grasp_scene(base, obj);
    let mut report = ExperimentReport::new(
        format!("grasp_{}", obj.name),
        fingerprint(&scene, "grasp"),
    );
    report.scalar("mass", obj.mass, "kg", None);
    report.scalar("width", obj.shape.width(), "mm", None);
    if obj.shape.width() >= max_aperture(&scene.hand) {
        report.criterion("stable", false);
        report.notes.push("wider than the hand's aperture; not simulated".to_string());
        return report;
    }
    let st = match simulate_from(&scene, SimState::initial(&scene)) {
        Ok(trace) => trace.final_state,
        Err(SimError::EquilibriumNotReached { trace, .. }) => {
            report.notes.push("did not settle".to_string());
            trace.final_state
        }
        Err(e) => {
            report.criterion("stable", false);
            report.notes.push(e.to_string());
            return report;
        }
    };
    let q = crate::solver::grasp_quality(&st, &scene, 0, GRASP_TOL);
    let settled = report.notes.is_empty();
    report.criterion("stable", q.stable && settled);
    report.scalar("contact_count", q.contact_count as f64, "1", None);
    report.scalar("force_residual", q.force_residual, "N", None);
    report.scalar("torque_residual", q.torque_residual, "N·m", None);
    report.scalar("min_cone_margin", q.min_cone_margin, "N", None);
    report.scalar("settle_time", st.t, "s", None);
    for fi in 0..FINGER_COUNT {
        for (j, name) in joint_names(fi).iter().enumerate() {
            report.scalar(name, st.q[3 * fi + j], "rad", None);
        }
    }
    report.snapshots.push(Snapshot {
        label: format!("grasp_{}", obj.name),
        scene,
        state: st,
    });
    report
}

/// Final joint angles recorded in a grasp report, if it was simulated.
pub fn grasp_posture(report: &ExperimentReport) -> Option<Vec<f64>> {
    (0..FINGER_COUNT)
        .flat_map(joint_names)
        .map(|n| report.value(&n))
        .collect()
}

/// Size of a set of postures that are pairwise more than
/// [`DISTINCT_POSTURE`] apart, picked greedily in order.
pub fn distinct_postures(postures: &[Vec<f64>]) -> usize {
    let mut picked: Vec<&Vec<f64>> = Vec::new();
    for p in postures {
        let far = |o: &&Vec<f64>| p.iter().zip(o.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > DISTINCT_POSTURE;
        if picked.iter().all(far) {
            picked.push(p);
        }
    }
    picked.len()
}

/// One report per object plus a `grasps` summary (stable count and number
/// of distinct final postures). Failures are recorded, never propagated.
pub fn run_grasp_suite(objects: &[ObjectSpec], base: &Scene) -> Vec<ExperimentReport> {
    let mut reports: Vec<ExperimentReport> = objects.iter().map(|o| run_grasp(base, o)).collect();
    let stable = reports.iter().filter(|r| r.passed()).count();
    let postures: Vec<Vec<f64>> = reports.iter().filter(|r| r.passed()).filter_map(grasp_posture).collect();
    let mut summary = ExperimentReport::new("grasps", fingerprint(base, "grasp suite"));
    summary.scalar("objects", objects.len() as f64, "1", None);
    summary.scalar("stable", stable as f64, "1", None);
    let distinct = distinct_postures(&postures);
    summary.scalar("distinct_postures", distinct as f64, "1", None);
    summary.criterion("enough_stable", stable * GRASP_SET_SIZE >= GRASP_MIN_STABLE * objects.len());
    summary.criterion("distinct_postures", distinct >= MIN_DISTINCT_POSTURES.min(objects.len()));
    reports.push(summary);
    reports
}

/// Default block used by the blocked-finger protocol: every joint at half
/// of its flexion range.
pub const HALF_BLOCK: [f64; 3] = [0.5, 0.5, 0.5];
/// Share of its free-run closure each unblocked finger must still reach.
pub const ADAPTIVE_CLOSURE: f64 = 0.95;

/// Whole-hand close to equilibrium with an optional finger blocked;
/// every step is recorded.
fn blocked_close(base: &Scene, blocked: Option<(FingerId, [f64; 3])>) -> Result<(Scene, crate::solver::Trace), SimError> {
    let mut s = response_scene(Mode::WholeHand, Direction::Close, base);
    if let Some((f, fractions)) = blocked {
        s.fingers[f.index()].block = Some(fractions);
    }
    s.sim.t_end = RESPONSE_T_MAX;
    s.sim.stop = StopMode::AtEquilibrium;
    s.sim.record_every = 1;
    let trace = simulate_from(&s, SimState::initial(&s))?;
    Ok((s, trace))
}

/// Blocks one finger rigidly at `fractions` of its flexion range, closes the
/// whole hand and compares every finger's closure with an unblocked run.
/// With `blocked = None` this is the plain whole-hand close.
pub fn run_blocked_finger(blocked: Option<FingerId>, fractions: [f64; 3], base: &Scene) -> Result<ExperimentReport, SimError> {
    let (_, free) = blocked_close(base, None)?;
    let (scene, trace) = blocked_close(base, blocked.map(|f| (f, fractions)))?;
    let label = blocked.map_or("none", FingerId::name);
    let mut report = ExperimentReport::new(
        format!("blocked_{label}"),
        fingerprint(&scene, &format!("blocked finger {label}")),
    );
    let st = &trace.final_state;
    let mut others_closed = true;
    for f in FingerId::ALL {
        let ours = closure_fraction(&scene.hand, &st.q, &[f.index()]);
        let theirs = closure_fraction(&scene.hand, &free.final_state.q, &[f.index()]);
        let ratio = if theirs > 0.0 { ours / theirs } else { 1.0 };
        let name = f.name();
        report.scalar(&format!("closure_{name}"), ours, "1", None);
        if Some(f) != blocked {
            let ok = ratio >= ADAPTIVE_CLOSURE;
            others_closed &= ok;
            report.scalar(&format!("closure_ratio_{name}"), ratio, "1", Some(ok));
        }
    }
    report.criterion("others_closed", others_closed);
    report.criterion("equilibrium", trace.equilibrium);
    let slip = scene.hand.drive.clutches[0].slip_torque;
    report.scalar("max_clutch_torque", trace.stats.max_clutch_torque, "N·m", Some(trace.stats.max_clutch_torque <= slip));
    if let Some(f) = blocked {
        let route = scene.hand.route_for(f, TendonSide::Flexor).expect("every finger has a flexor");
        let spool = scene.hand.routes[route].spool;
        let history: Vec<f64> = trace.states.iter().map(|s| s.clutch(spool).transmitted_torque.abs()).collect();
        let peak = history.iter().copied().fold(0.0, f64::max);
        let last = st.clutch(spool).transmitted_torque.abs();
        report.scalar("blocked_clutch_peak", peak, "N·m", Some(peak <= slip));
        report.scalar("blocked_clutch_final", last, "N·m", None);
        report.criterion("blocked_clutch_saturated", last == slip && st.clutch(spool).slipping);
    }
    report.snapshots.push(Snapshot {
        label: format!("blocked_{label}"),
        scene,
        state: trace.final_state,
    });
    Ok(report)
}

/// Injected antagonist slack values of the default sweep (mm).
pub const SLACK_SWEEP: [f64; 4] = [0.0, 5.0, 10.0, 20.0];

/// Reopening time from full flexion with `slack` mm of extra line paid off
/// the antagonist spools, plus the lowest tendon tension seen.
fn reopen_time(base: &Scene, slack: f64) -> Result<(Option<f64>, f64), SimError> {
    let mut s = response_scene(Mode::SingleFinger, Direction::Open, base);
    s.sim.slack_antagonist = slack;
    let timed = time_to_posture(&s, SimState::initial(&s), false, RESPONSE_T_MAX)?;
    Ok((timed.time, timed.min_tension))
}

fn slack_key(slack: f64) -> String {
    format!("delay_{}mm", fmt_num(slack))
}

/// Single-finger reopening (as in A2) after slack is injected into the
/// extensor line, for each value of `slacks`. Reports the delay per value,
/// whether it never decreases along the sweep, and whether any tendon
/// tension went negative.
pub fn run_slack_demo(slacks: &[f64], base: &Scene) -> Result<ExperimentReport, SimError> {
    let protocol = format!("slack {}", slacks.iter().map(|s| fmt_num(*s)).collect::<Vec<_>>().join(" "));
    let mut report = ExperimentReport::new("slack", fingerprint(base, &protocol));
    if slacks.iter().any(|s| !(*s >= 0.0)) {
        report.criterion("valid_slack", false);
        report.notes.push("slack must be >= 0".to_string());
        return Ok(report);
    }
    let mut delays = Vec::with_capacity(slacks.len());
    let mut min_tension = f64::INFINITY;
    for &slack in slacks {
        let (time, tension) = reopen_time(base, slack)?;
        if time.is_none() {
            report.notes.push(format!("slack {} mm: did not reopen", fmt_num(slack)));
        }
        let delay = time.unwrap_or(f64::INFINITY);
        report.scalar(&slack_key(slack), delay, "s", None);
        delays.push(delay);
        min_tension = min_tension.min(tension);
    }
    report.scalar("min_tension", min_tension, "N", None);
    report.criterion("reopened", delays.iter().all(|d| d.is_finite()));
    report.criterion("monotone", delays.windows(2).all(|w| w[1] >= w[0]));
    report.criterion("tension_nonnegative", min_tension >= 0.0);
    Ok(report)
}

/// One row per recorded state: time, the twelve joint angles, every
/// object pose, and the equilibrium residual.
pub fn trace_csv(states: &[SimState], scene: &Scene) -> String {
    let mut out = String::from("t");
    for fi in 0..FINGER_COUNT {
        for n in joint_names(fi) {
            out.push(',');
            out.push_str(&n);
        }
    }
    for o in &scene.objects {
        out.push_str(&format!(",{0}_x,{0}_y,{0}_angle", o.name));
    }
    out.push_str(",residual\n");
    for st in states {
        out.push_str(&fmt_num(st.t));
        for q in &st.q {
            out.push(',');
            out.push_str(&fmt_num(*q));
        }
        for o in &st.objects {
            out.push_str(&format!(",{},{},{}", fmt_num(o.pose.position.x), fmt_num(o.pose.position.y), fmt_num(o.pose.angle)));
        }
        out.push(',');
        out.push_str(&fmt_num(st.residual));
        out.push('\n');
    }
    out
}
