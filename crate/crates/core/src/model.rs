//! Mechanical description of the hand and the default four-finger build.

use crate::geom::{Frame2, Vec2};
use crate::kinematics;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const FINGER_COUNT: usize = 4;
pub const PHALANX_COUNT: usize = 4;
pub const JOINTS_PER_FINGER: usize = 3;
pub const JOINT_COUNT: usize = FINGER_COUNT * JOINTS_PER_FINGER;
pub const ROUTE_COUNT: usize = 2 * FINGER_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FingerId {
    Thumb,
    Index,
    Middle,
    Pinkie,
}

impl FingerId {
    pub const ALL: [FingerId; FINGER_COUNT] =
        [FingerId::Thumb, FingerId::Index, FingerId::Middle, FingerId::Pinkie];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FingerId::Thumb => "thumb",
            FingerId::Index => "index",
            FingerId::Middle => "middle",
            FingerId::Pinkie => "pinkie",
        }
    }

    pub fn from_name(name: &str) -> Option<FingerId> {
        FingerId::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for FingerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TendonSide {
    Flexor,
    Extensor,
}

/// Which motor shaft a spool sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shaft {
    Agonist,
    Antagonist,
}

impl Shaft {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Shaft::Agonist => "agonist",
            Shaft::Antagonist => "antagonist",
        }
    }

    pub fn for_side(side: TendonSide) -> Shaft {
        match side {
            TendonSide::Flexor => Shaft::Agonist,
            TendonSide::Extensor => Shaft::Antagonist,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phalanx {
    /// mm
    pub length: f64,
    /// Phalanx-local guide points (x along the phalanx, palm side is -y).
    pub guides_flexor: Vec<Vec2>,
    pub guides_extensor: Vec<Vec2>,
    pub is_terminal: bool,
    pub terminal_anchor_flexor: Option<Vec2>,
    pub terminal_anchor_extensor: Option<Vec2>,
    /// Coulomb coefficient of the phalanx surface.
    pub pad_friction: f64,
    /// kg, lumped at the phalanx midpoint.
    pub mass: f64,
}

impl Phalanx {
    pub fn guides(&self, side: TendonSide) -> &[Vec2] {
        match side {
            TendonSide::Flexor => &self.guides_flexor,
            TendonSide::Extensor => &self.guides_extensor,
        }
    }

    pub fn anchor(&self, side: TendonSide) -> Option<Vec2> {
        match side {
            TendonSide::Flexor => self.terminal_anchor_flexor,
            TendonSide::Extensor => self.terminal_anchor_extensor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finger {
    pub id: FingerId,
    /// Base, medial, medial, distal.
    pub phalanges: Vec<Phalanx>,
    /// Per joint `[min, max]` in rad; flexion is positive.
    pub joint_limits: Vec<[f64; 2]>,
    /// Pose of the base phalanx in the palm frame. `mirror = -1` puts the
    /// palm side on the opposite hand of the finger axis (opposing thumb).
    pub base_pose: Frame2,
    /// Half of the phalanx width, used as the contact capsule radius (mm).
    pub half_width: f64,
}

impl Finger {
    pub fn total_length(&self) -> f64 {
        self.phalanges.iter().map(|p| p.length).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GuideRef {
    /// Fixed point in the palm frame.
    Palm(Vec2),
    /// Guide bearing on a phalanx (local coordinates).
    Guide { phalanx: usize, point: Vec2 },
    /// Tie-off point on a phalanx (local coordinates).
    Anchor { phalanx: usize, point: Vec2 },
}

impl GuideRef {
    /// Phalanx carrying the point; `None` for palm points.
    pub fn phalanx(&self) -> Option<usize> {
        match *self {
            GuideRef::Palm(_) => None,
            GuideRef::Guide { phalanx, .. } | GuideRef::Anchor { phalanx, .. } => Some(phalanx),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendonRoute {
    pub finger: FingerId,
    pub side: TendonSide,
    pub spool: usize,
    /// Ordered from the spool end to the fingertip anchor.
    pub guides: Vec<GuideRef>,
    /// mm; path length at which the tendon is just taut with nothing wound.
    pub rest_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorSpec {
    /// N·m
    pub max_torque: f64,
    /// rad/s
    pub no_load_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutchSpec {
    /// N·m
    pub slip_torque: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpoolSpec {
    /// mm
    pub radius: f64,
    pub clutch: usize,
    pub shaft: Shaft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub motors: Vec<MotorSpec>,
    pub clutches: Vec<ClutchSpec>,
    pub spools: Vec<SpoolSpec>,
}

impl DriveSpec {
    pub fn spools_on(&self, shaft: Shaft) -> impl Iterator<Item = usize> + '_ {
        self.spools
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.shaft == shaft)
            .map(|(i, _)| i)
    }
}

/// Fixed palm surface: a capsule in the palm frame that objects can rest on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PalmSpec {
    pub a: Vec2,
    pub b: Vec2,
    pub radius: f64,
    pub friction: f64,
}

/// The scalar knobs the default hand is built from. Every field is
/// overridable from a scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandParams {
    /// Base, medial, medial, distal (mm).
    pub phalanx_lengths: [f64; PHALANX_COUNT],
    /// Medial flexor guides, local to a 35 mm phalanx; shifted for other lengths.
    pub flexor_guides: [Vec2; 3],
    pub extensor_guides: [Vec2; 3],
    pub distal_flexor_guide: Vec2,
    pub distal_extensor_guide: Vec2,
    pub flexor_anchor: Vec2,
    pub extensor_anchor: Vec2,
    /// rad
    pub joint_limit: f64,
    /// mm
    pub finger_width: f64,
    /// Clear distance between the palm-side surfaces of opposing base phalanges (mm).
    pub aperture: f64,
    /// mm
    pub spool_radius: f64,
    /// N·m
    pub slip_torque: f64,
    /// N·m
    pub motor_max_torque: f64,
    /// rad/s
    pub no_load_speed: f64,
    /// N/mm
    pub tendon_stiffness: f64,
    pub guide_friction_mu: f64,
    /// N·m·s/rad
    pub joint_damping: f64,
    /// N·m/rad
    pub stop_stiffness: f64,
    pub beam_friction: f64,
    pub pad_friction: f64,
    /// kg
    pub phalanx_mass: f64,
    /// N/mm
    pub contact_stiffness: f64,
    /// N·s/mm, compression only
    pub contact_damping: f64,
    pub palm_friction: f64,
}

impl Default for HandParams {
    fn default() -> Self {
        Self {
            phalanx_lengths: [40.0, 35.0, 35.0, 35.0],
            flexor_guides: [Vec2::new(11.0, -7.0), Vec2::new(17.5, -14.0), Vec2::new(24.0, -7.0)],
            extensor_guides: [Vec2::new(6.0, 12.0), Vec2::new(17.5, 8.0), Vec2::new(29.0, 12.0)],
            distal_flexor_guide: Vec2::new(11.0, -7.0),
            distal_extensor_guide: Vec2::new(6.0, 12.0),
            flexor_anchor: Vec2::new(33.0, -7.0),
            extensor_anchor: Vec2::new(33.0, 12.0),
            joint_limit: 110f64.to_radians(),
            finger_width: 30.0,
            aperture: 120.0,
            spool_radius: 8.0,
            slip_torque: 0.05,
            motor_max_torque: 0.40,
            no_load_speed: DEFAULT_NO_LOAD_SPEED,
            tendon_stiffness: 5.0,
            guide_friction_mu: DEFAULT_GUIDE_MU,
            joint_damping: DEFAULT_JOINT_DAMPING,
            stop_stiffness: 10.0,
            beam_friction: 0.5,
            pad_friction: 0.9,
            phalanx_mass: 0.005,
            contact_stiffness: 10.0,
            contact_damping: 0.02,
            palm_friction: 0.5,
        }
    }
}

/// Result of fitting the A1 single-finger close time; see `experiments::calibrate`.
pub const DEFAULT_NO_LOAD_SPEED: f64 = 9.53;
pub const DEFAULT_JOINT_DAMPING: f64 = 0.002;
pub const DEFAULT_GUIDE_MU: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    pub params: HandParams,
    pub fingers: Vec<Finger>,
    pub routes: Vec<TendonRoute>,
    pub drive: DriveSpec,
    pub palm: PalmSpec,
    /// N/mm
    pub tendon_stiffness: f64,
    pub guide_friction_mu: f64,
    /// N·m·s/rad
    pub joint_damping: f64,
    /// N·m/rad
    pub stop_stiffness: f64,
    /// N/mm
    pub contact_stiffness: f64,
    /// N·s/mm
    pub contact_damping: f64,
}

impl HandModel {
    pub fn finger(&self, id: FingerId) -> &Finger {
        &self.fingers[id.index()]
    }

    pub fn guide_count(&self) -> usize {
        self.routes
            .iter()
            .flat_map(|r| r.guides.iter())
            .filter(|g| !matches!(g, GuideRef::Anchor { .. }))
            .count()
    }

    pub fn route_for(&self, finger: FingerId, side: TendonSide) -> Option<usize> {
        self.routes
            .iter()
            .position(|r| r.finger == finger && r.side == side)
    }

    /// Rigidly move the whole hand (fingers, palm and palm guides).
    pub fn transformed(&self, rotation: f64, translation: Vec2) -> HandModel {
        let mv = |p: Vec2| p.rotated(rotation) + translation;
        let mut out = self.clone();
        for f in &mut out.fingers {
            f.base_pose = f.base_pose.transformed(rotation, translation);
        }
        for r in &mut out.routes {
            for g in &mut r.guides {
                if let GuideRef::Palm(p) = g {
                    *p = mv(*p);
                }
            }
        }
        out.palm.a = mv(out.palm.a);
        out.palm.b = mv(out.palm.b);
        out
    }
}

pub fn build_default_hand() -> HandModel {
    build_hand(&HandParams::default())
}

/// Build the four-finger hand from its parameter set.
pub fn build_hand(p: &HandParams) -> HandModel {
    let base_x = p.aperture / 2.0 + p.finger_width / 2.0;
    // (finger, base x, base y, mirror): three fingers on one side, thumb opposite.
    let layout = [
        (FingerId::Thumb, base_x, 0.0, -1.0),
        (FingerId::Index, -base_x, 0.0, 1.0),
        (FingerId::Middle, -base_x, 5.0, 1.0),
        (FingerId::Pinkie, -base_x, -5.0, 1.0),
    ];
    let up = std::f64::consts::FRAC_PI_2;

    let mut fingers = Vec::with_capacity(FINGER_COUNT);
    let mut routes = Vec::with_capacity(ROUTE_COUNT);
    for (id, x, y, mirror) in layout {
        // Left fingers (mirror +1) have their palm side (local -y) facing +x.
        let base_pose = Frame2::new(Vec2::new(x, y), up, mirror);
        let finger = build_finger(id, base_pose, p);
        for side in [TendonSide::Flexor, TendonSide::Extensor] {
            let shaft = Shaft::for_side(side);
            let spool = shaft.index() * FINGER_COUNT + id.index();
            let lateral = match side {
                TendonSide::Flexor => p.flexor_guides[0].y,
                TendonSide::Extensor => p.extensor_guides[0].y,
            };
            let mut guides: Vec<GuideRef> = [-80.0, -40.0, -10.0]
                .iter()
                .map(|&d| GuideRef::Palm(base_pose.apply(Vec2::new(d, lateral))))
                .collect();
            for (k, ph) in finger.phalanges.iter().enumerate() {
                for &g in ph.guides(side) {
                    guides.push(GuideRef::Guide { phalanx: k, point: g });
                }
                if let Some(a) = ph.anchor(side) {
                    guides.push(GuideRef::Anchor { phalanx: k, point: a });
                }
            }
            let mut route = TendonRoute {
                finger: id,
                side,
                spool,
                guides,
                rest_length: 0.0,
            };
            let pose = kinematics::chain_pose(&finger, &[0.0; 3]);
            route.rest_length = kinematics::route_length_in(&route, &pose);
            routes.push(route);
        }
        fingers.push(finger);
    }
    routes.sort_by_key(|r| r.spool);

    let drive = DriveSpec {
        motors: vec![
            MotorSpec {
                max_torque: p.motor_max_torque,
                no_load_speed: p.no_load_speed,
            };
            2
        ],
        clutches: vec![
            ClutchSpec {
                slip_torque: p.slip_torque,
            };
            ROUTE_COUNT
        ],
        spools: (0..ROUTE_COUNT)
            .map(|i| SpoolSpec {
                radius: p.spool_radius,
                clutch: i,
                shaft: if i < FINGER_COUNT { Shaft::Agonist } else { Shaft::Antagonist },
            })
            .collect(),
    };

    let palm_half = base_x - p.finger_width / 2.0;
    let palm_r = 10.0;
    HandModel {
        params: p.clone(),
        fingers,
        routes,
        drive,
        palm: PalmSpec {
            a: Vec2::new(-palm_half, -palm_r),
            b: Vec2::new(palm_half, -palm_r),
            radius: palm_r,
            friction: p.palm_friction,
        },
        tendon_stiffness: p.tendon_stiffness,
        guide_friction_mu: p.guide_friction_mu,
        joint_damping: p.joint_damping,
        stop_stiffness: p.stop_stiffness,
        contact_stiffness: p.contact_stiffness,
        contact_damping: p.contact_damping,
    }
}

fn build_finger(id: FingerId, base_pose: Frame2, p: &HandParams) -> Finger {
    let medial_ref = 35.0;
    let shift = |g: Vec2, len: f64| Vec2::new(g.x + (len - medial_ref), g.y);
    let phalanges = p
        .phalanx_lengths
        .iter()
        .enumerate()
        .map(|(k, &len)| {
            let terminal = k == PHALANX_COUNT - 1;
            if terminal {
                Phalanx {
                    length: len,
                    guides_flexor: vec![p.distal_flexor_guide],
                    guides_extensor: vec![p.distal_extensor_guide],
                    is_terminal: true,
                    terminal_anchor_flexor: Some(p.flexor_anchor),
                    terminal_anchor_extensor: Some(p.extensor_anchor),
                    pad_friction: p.pad_friction,
                    mass: p.phalanx_mass,
                }
            } else {
                Phalanx {
                    length: len,
                    guides_flexor: p.flexor_guides.iter().map(|&g| shift(g, len)).collect(),
                    guides_extensor: p.extensor_guides.iter().map(|&g| shift(g, len)).collect(),
                    is_terminal: false,
                    terminal_anchor_flexor: None,
                    terminal_anchor_extensor: None,
                    pad_friction: p.beam_friction,
                    mass: p.phalanx_mass,
                }
            }
        })
        .collect();
    Finger {
        id,
        phalanges,
        joint_limits: vec![[0.0, p.joint_limit]; JOINTS_PER_FINGER],
        base_pose,
        half_width: p.finger_width / 2.0,
    }
}

/// One violated invariant. `field` names the offending part of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.field.contains(needle) || v.message.contains(needle))
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

/// Check every structural invariant of a hand model. Violations are data.
pub fn validate(model: &HandModel) -> ValidationReport {
    let mut r = ValidationReport::default();

    if model.fingers.len() != FINGER_COUNT {
        r.push(
            "fingers",
            format!("finger count is {}, expected {FINGER_COUNT}", model.fingers.len()),
        );
    }
    let joints: usize = model.fingers.iter().map(|f| f.joint_limits.len()).sum();
    if joints != JOINT_COUNT {
        r.push("joints", format!("joint count is {joints}, expected {JOINT_COUNT}"));
    }
    for (fi, f) in model.fingers.iter().enumerate() {
        validate_finger(&mut r, fi, f);
    }

    if model.routes.len() != ROUTE_COUNT {
        r.push(
            "routes",
            format!("route count is {}, expected {ROUTE_COUNT}", model.routes.len()),
        );
    }
    let mut spools_seen = Vec::new();
    for (ri, route) in model.routes.iter().enumerate() {
        let field = format!("routes[{ri}]");
        if spools_seen.contains(&route.spool) {
            r.push(format!("{field}.spool"), format!("spool {} used by more than one route", route.spool));
        }
        spools_seen.push(route.spool);
        if route.spool >= model.drive.spools.len() {
            r.push(format!("{field}.spool"), format!("spool {} does not exist", route.spool));
        } else if model.drive.spools[route.spool].shaft != Shaft::for_side(route.side) {
            r.push(format!("{field}.spool"), "spool sits on the wrong shaft for this tendon side");
        }
        if !(route.rest_length > 0.0) {
            r.push(format!("{field}.rest_length"), "rest_length must be > 0");
        }
        let mut last = None;
        for g in &route.guides {
            if let Some(k) = g.phalanx() {
                if last.is_some_and(|l| k < l) {
                    r.push(format!("{field}.guides"), "routing order is not proximal to distal");
                    break;
                }
                last = Some(k);
            } else if last.is_some() {
                r.push(format!("{field}.guides"), "routing order: palm guide after a phalanx guide");
                break;
            }
        }
        if !matches!(route.guides.last(), Some(GuideRef::Anchor { .. })) {
            r.push(format!("{field}.guides"), "route does not terminate at an anchor");
        }
    }

    let guides = model.guide_count();
    if guides < 100 {
        r.push("guides", format!("guide count is {guides}, expected at least 100"));
    }

    let d = &model.drive;
    if d.motors.len() != 2 {
        r.push("drive.motors", format!("motor count is {}, expected 2", d.motors.len()));
    }
    for (i, m) in d.motors.iter().enumerate() {
        if !(m.max_torque > 0.0) {
            r.push(format!("drive.motors[{i}].max_torque"), "max_torque must be > 0");
        }
        if !(m.no_load_speed >= 0.0) {
            r.push(format!("drive.motors[{i}].no_load_speed"), "no_load_speed must be >= 0");
        }
    }
    if d.clutches.len() != ROUTE_COUNT {
        r.push("drive.clutches", format!("clutch count is {}, expected {ROUTE_COUNT}", d.clutches.len()));
    }
    for (i, c) in d.clutches.iter().enumerate() {
        if !(c.slip_torque > 0.0) {
            r.push(format!("drive.clutches[{i}].slip_torque"), "slip_torque must be > 0");
        }
    }
    for (i, s) in d.spools.iter().enumerate() {
        if !(s.radius > 0.0) {
            r.push(format!("drive.spools[{i}].radius"), "spool radius must be > 0");
        }
        if s.clutch >= d.clutches.len() {
            r.push(format!("drive.spools[{i}].clutch"), "spool attached to a missing clutch");
        }
    }
    for shaft in [Shaft::Agonist, Shaft::Antagonist] {
        let n = d.spools_on(shaft).count();
        if n != 4 {
            r.push(
                format!("drive.shafts.{}", shaft.name()),
                format!("{n} spools on the {} shaft, expected 4", shaft.name()),
            );
        }
    }

    if !(model.tendon_stiffness > 0.0) {
        r.push("tendon_stiffness", "must be > 0");
    }
    if !(model.guide_friction_mu >= 0.0) {
        r.push("guide_friction_mu", "must be >= 0");
    }
    if !(model.joint_damping > 0.0) {
        r.push("joint_damping", "must be > 0");
    }
    if !(model.stop_stiffness > 0.0) {
        r.push("stop_stiffness", "must be > 0");
    }
    if !(model.contact_stiffness > 0.0) {
        r.push("contact_stiffness", "must be > 0");
    }

    // Moment-arm signs at the straight posture; only meaningful on a
    // structurally sound finger.
    for route in &model.routes {
        let Some(finger) = model.fingers.get(route.finger.index()) else {
            continue;
        };
        if finger.phalanges.len() != PHALANX_COUNT || route.guides.iter().any(|g| g.phalanx().is_some_and(|k| k >= PHALANX_COUNT)) {
            continue;
        }
        let pose = kinematics::chain_pose(finger, &[0.0; 3]);
        let arms = kinematics::moment_arms_in(route, &pose);
        for (j, &arm) in arms.iter().enumerate() {
            let ok = match route.side {
                TendonSide::Flexor => arm > 0.0,
                TendonSide::Extensor => arm < 0.0,
            };
            if !ok {
                r.push(
                    format!("{}.{:?}.joint[{j}]", route.finger, route.side).to_lowercase(),
                    format!("moment-arm sign: arm {arm:.6} mm at q = 0 does not drive the expected direction"),
                );
            }
        }
    }
    r
}

fn validate_finger(r: &mut ValidationReport, fi: usize, f: &Finger) {
    let field = format!("fingers[{fi}]");
    if f.phalanges.len() != PHALANX_COUNT {
        r.push(
            format!("{field}.phalanges"),
            format!("phalanx count is {}, expected {PHALANX_COUNT}", f.phalanges.len()),
        );
    }
    if f.joint_limits.len() != JOINTS_PER_FINGER {
        r.push(
            format!("{field}.joint_limits"),
            format!("{} joints, expected {JOINTS_PER_FINGER}", f.joint_limits.len()),
        );
    }
    for (j, lim) in f.joint_limits.iter().enumerate() {
        if lim[0] != 0.0 {
            r.push(format!("{field}.joint_limits[{j}]"), "joint min must be 0 (extension stop)");
        }
        if !(lim[1] > 0.0) {
            r.push(format!("{field}.joint_limits[{j}]"), "joint max must be > 0");
        }
    }
    if !(f.half_width > 0.0) {
        r.push(format!("{field}.half_width"), "must be > 0");
    }
    let n = f.phalanges.len();
    for (k, ph) in f.phalanges.iter().enumerate() {
        let pf = format!("{field}.phalanges[{k}]");
        if !(ph.length > 0.0) {
            r.push(format!("{pf}.length"), "length must be > 0");
        }
        for side in [TendonSide::Flexor, TendonSide::Extensor] {
            for g in ph.guides(side) {
                if !(g.x >= 0.0 && g.x <= ph.length) {
                    r.push(format!("{pf}.guides"), format!("guide x {} outside [0, {}]", g.x, ph.length));
                }
            }
        }
        let terminal = k + 1 == n;
        if ph.is_terminal != terminal {
            r.push(format!("{pf}.is_terminal"), "only the last phalanx may be terminal");
        }
        if terminal {
            if ph.guides_flexor.is_empty() || ph.guides_extensor.is_empty() {
                r.push(format!("{pf}.guides"), "terminal phalanx needs at least one guide per side");
            }
            if ph.terminal_anchor_flexor.is_none() || ph.terminal_anchor_extensor.is_none() {
                r.push(format!("{pf}.anchors"), "terminal phalanx needs both anchors");
            }
        } else {
            if ph.terminal_anchor_flexor.is_some() || ph.terminal_anchor_extensor.is_some() {
                r.push(format!("{pf}.anchors"), "anchors only allowed on the terminal phalanx");
            }
            if k > 0 && (ph.guides_flexor.len() < 3 || ph.guides_extensor.len() < 3) {
                r.push(format!("{pf}.guides"), "medial phalanx needs at least 3 guides per side");
            }
        }
        if !(ph.pad_friction >= 0.0) {
            r.push(format!("{pf}.pad_friction"), "must be >= 0");
        }
        if !(ph.mass >= 0.0) {
            r.push(format!("{pf}.mass"), "must be >= 0");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hand_counts() {
        let h = build_default_hand();
        assert_eq!(h.routes.len(), 8);
        assert_eq!(h.fingers.len(), 4);
        let joints: usize = h.fingers.iter().map(|f| f.joint_limits.len()).sum();
        assert_eq!(joints, 12);
        assert!(h.guide_count() >= 100);
        for f in &h.fingers {
            assert_eq!(f.total_length(), 145.0);
            let per_finger: usize = f
                .phalanges
                .iter()
                .map(|p| p.guides_flexor.len() + p.guides_extensor.len())
                .sum();
            assert_eq!(per_finger, 20);
        }
    }

    #[test]
    fn default_hand_validates() {
        let report = validate(&build_default_hand());
        assert!(report.is_ok(), "{report}");
    }

    #[test]
    fn build_is_pure() {
        assert_eq!(build_default_hand(), build_default_hand());
    }

    #[test]
    fn three_fingers_is_a_count_violation() {
        let mut h = build_default_hand();
        h.fingers.pop();
        let report = validate(&h);
        assert!(report.mentions("finger count"));
    }

    #[test]
    fn mirrored_flexor_guide_flips_arm_sign() {
        let mut h = build_default_hand();
        // First guide after joint 2 on the index flexor.
        let ri = h.route_for(FingerId::Index, TendonSide::Flexor).unwrap();
        let g = h.routes[ri]
            .guides
            .iter_mut()
            .find(|g| matches!(g, GuideRef::Guide { phalanx: 2, .. }))
            .unwrap();
        if let GuideRef::Guide { point, .. } = g {
            point.y = -point.y;
        }
        let report = validate(&h);
        assert!(report.mentions("moment-arm sign"), "{report}");
        assert!(report.mentions("index.flexor.joint[1]"), "{report}");
    }

    #[test]
    fn single_field_mutations_are_caught() {
        let base = build_default_hand();
        type Mutation = Box<dyn Fn(&mut HandModel)>;
        let cases: Vec<(&str, Mutation)> = vec![
            ("length", Box::new(|h| h.fingers[1].phalanges[2].length = -1.0)),
            ("joint_limits", Box::new(|h| h.fingers[0].joint_limits[1][0] = 0.2)),
            ("slip_torque", Box::new(|h| h.drive.clutches[3].slip_torque = 0.0)),
            ("radius", Box::new(|h| h.drive.spools[5].radius = 0.0)),
            ("rest_length", Box::new(|h| h.routes[2].rest_length = 0.0)),
            ("spool", Box::new(|h| h.routes[1].spool = h.routes[0].spool)),
            ("tendon_stiffness", Box::new(|h| h.tendon_stiffness = 0.0)),
            ("anchors", Box::new(|h| h.fingers[2].phalanges[3].terminal_anchor_flexor = None)),
            ("guides", Box::new(|h| h.fingers[2].phalanges[1].guides_extensor.truncate(2))),
            ("motors", Box::new(|h| {
                h.drive.motors.pop();
            })),
        ];
        for (needle, mutate) in cases {
            let mut h = base.clone();
            mutate(&mut h);
            let report = validate(&h);
            assert!(report.mentions(needle), "mutation of {needle} not reported: {report}");
        }
    }
}
