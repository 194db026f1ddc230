//! `.shs` scene files.
//!
//! ```text
//! # comment
//! sim { dt 0.001; t_end 2; }
//! gravity { x 0; y -9.81; }
//! hand { spool_radius 8; slip_torque 0.05; }
//! object ball { circle 30; mass 0.2; pose 0 31 0; }
//! finger middle { block 0.5 0.5 0.5; }
//! control { at 0 agonist 10; at 0 antagonist -10; at 1.5 agonist hold; }
//! ```
//!
//! Units are fixed per key: mm for lengths and positions, rad for angles,
//! kg, s, rad/s, N, N·m, N/mm, m/s² for gravity. Unknown keys are errors.

use crate::contact::{is_convex_ccw, Pose2, Shape};
use crate::geom::Vec2;
use crate::model::{build_hand, validate, FingerId, HandModel, HandParams, Shaft, FINGER_COUNT};
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub shape: Shape,
    /// kg
    pub mass: f64,
    pub pose: Pose2,
    pub fixed: bool,
    /// Overrides the finger surface friction for contacts with this object.
    pub mu: Option<f64>,
    /// Coulomb resistance from whatever the object slides on (N).
    pub friction_load: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpeedCommand {
    /// rad/s at the motor shaft; positive winds its spools.
    Speed(f64),
    Hold,
}

impl SpeedCommand {
    pub fn speed(self) -> f64 {
        match self {
            SpeedCommand::Speed(s) => s,
            SpeedCommand::Hold => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    /// s
    pub t: f64,
    pub motor: Shaft,
    pub target: SpeedCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopMode {
    AtEnd,
    AtEquilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// s
    pub dt: f64,
    /// s
    pub t_end: f64,
    /// N·m
    pub equilibrium_tol: f64,
    /// Consecutive steps under tolerance before equilibrium is declared.
    pub equilibrium_steps: usize,
    /// Record every k-th state in the trace.
    pub record_every: usize,
    /// rad/s; anything faster is treated as a numerical blow-up.
    pub max_joint_speed: f64,
    pub stop: StopMode,
    /// Extra line paid off each shaft's spools before the run (mm).
    pub slack_agonist: f64,
    pub slack_antagonist: f64,
    /// Linear settling damping of mobile objects (N·s/mm).
    pub object_damping: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            t_end: 2.0,
            equilibrium_tol: 1e-4,
            equilibrium_steps: 50,
            record_every: 10,
            max_joint_speed: 200.0,
            stop: StopMode::AtEnd,
            slack_agonist: 0.0,
            slack_antagonist: 0.0,
            object_damping: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerConfig {
    /// Inactive fingers are frozen and their spools are not mounted.
    pub active: bool,
    /// Initial joint angles (rad).
    pub q: [f64; 3],
    /// Rigid block at these fractions of each joint's flexion limit.
    pub block: Option<[f64; 3]>,
}

impl Default for FingerConfig {
    fn default() -> Self {
        Self {
            active: true,
            q: [0.0; 3],
            block: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub hand: HandModel,
    pub objects: Vec<ObjectSpec>,
    /// m/s²
    pub gravity: Vec2,
    /// Sorted by time; later entries override earlier ones per motor.
    pub control: Vec<ControlCommand>,
    pub sim: SimConfig,
    /// Indexed by `FingerId::index()`.
    pub fingers: Vec<FingerConfig>,
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            hand: crate::model::build_default_hand(),
            objects: Vec::new(),
            gravity: Vec2::new(0.0, -9.81),
            control: Vec::new(),
            sim: SimConfig::default(),
            fingers: vec![FingerConfig::default(); FINGER_COUNT],
        }
    }
}

impl Scene {
    /// Active command for `motor` at time `t`.
    pub fn command_at(&self, motor: Shaft, t: f64) -> SpeedCommand {
        self.control
            .iter()
            .rev()
            .find(|c| c.motor == motor && c.t <= t + 1e-12)
            .map_or(SpeedCommand::Hold, |c| c.target)
    }

    pub fn with_hand_params(mut self, params: HandParams) -> Scene {
        self.hand = build_hand(&params);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    Syntax,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    /// 1-based
    pub line: usize,
    /// 1-based
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Semantic => "error",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct SceneError {
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Open,
    Close,
    Semi,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(n) => format!("number {n}"),
        Tok::Open => "`{`".into(),
        Tok::Close => "`}`".into(),
        Tok::Semi => "`;`".into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let at = |tok| Token { tok, line: li + 1, column };
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '{' => {
                    out.push(at(Tok::Open));
                    i += 1;
                }
                '}' => {
                    out.push(at(Tok::Close));
                    i += 1;
                }
                ';' => {
                    out.push(at(Tok::Semi));
                    i += 1;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                        i += 1;
                    }
                    out.push(at(Tok::Ident(chars[start..i].iter().collect())));
                }
                c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '.' | '-' | '+'))
                    {
                        i += 1;
                    }
                    let raw: String = chars[start..i].iter().collect();
                    let value: f64 = raw.parse().map_err(|_| Diagnostic {
                        kind: DiagnosticKind::Syntax,
                        line: li + 1,
                        column,
                        message: format!("malformed number `{raw}`"),
                    })?;
                    if !value.is_finite() {
                        return Err(Diagnostic {
                            kind: DiagnosticKind::Syntax,
                            line: li + 1,
                            column,
                            message: format!("non-finite number `{raw}`"),
                        });
                    }
                    out.push(at(Tok::Number(value)));
                }
                other => {
                    return Err(Diagnostic {
                        kind: DiagnosticKind::Syntax,
                        line: li + 1,
                        column,
                        message: format!("unexpected character `{other}`; expected identifier, number, `{{`, `}}`, `;` or `#`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Statement {
    key: String,
    values: Vec<Token>,
    line: usize,
    column: usize,
}

#[derive(Debug, Clone)]
struct Section {
    kind: String,
    name: Option<String>,
    line: usize,
    column: usize,
    statements: Vec<Statement>,
}

fn syntax(t: Option<&Token>, eof_line: usize, expected: &str) -> Diagnostic {
    match t {
        Some(t) => Diagnostic {
            kind: DiagnosticKind::Syntax,
            line: t.line,
            column: t.column,
            message: format!("expected {expected}, found {}", describe(&t.tok)),
        },
        None => Diagnostic {
            kind: DiagnosticKind::Syntax,
            line: eof_line.max(1),
            column: 1,
            message: format!("expected {expected}, found end of input"),
        },
    }
}

fn parse_sections(tokens: &[Token], eof_line: usize) -> Result<Vec<Section>, Diagnostic> {
    let mut sections = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let head = &tokens[i];
        let Tok::Ident(kind) = &head.tok else {
            return Err(syntax(Some(head), eof_line, "section keyword"));
        };
        i += 1;
        let mut name = None;
        if let Some(Token { tok: Tok::Ident(n), .. }) = tokens.get(i) {
            name = Some(n.clone());
            i += 1;
        }
        match tokens.get(i) {
            Some(Token { tok: Tok::Open, .. }) => i += 1,
            other => return Err(syntax(other, eof_line, "`{` or section name")),
        }
        let mut statements = Vec::new();
        loop {
            match tokens.get(i) {
                Some(Token { tok: Tok::Close, .. }) => {
                    i += 1;
                    break;
                }
                Some(t @ Token { tok: Tok::Ident(key), .. }) => {
                    let (line, column) = (t.line, t.column);
                    let key = key.clone();
                    i += 1;
                    let mut values = Vec::new();
                    loop {
                        match tokens.get(i) {
                            Some(Token { tok: Tok::Semi, .. }) => {
                                i += 1;
                                break;
                            }
                            Some(v @ Token { tok: Tok::Ident(_) | Tok::Number(_), .. }) => {
                                values.push(v.clone());
                                i += 1;
                            }
                            other => return Err(syntax(other, eof_line, "value or `;`")),
                        }
                    }
                    statements.push(Statement { key, values, line, column });
                }
                other => return Err(syntax(other, eof_line, "key or `}`")),
            }
        }
        sections.push(Section {
            kind: kind.clone(),
            name,
            line: head.line,
            column: head.column,
            statements,
        });
    }
    Ok(sections)
}

struct Ctx {
    errors: Vec<Diagnostic>,
}

impl Ctx {
    fn err(&mut self, line: usize, column: usize, message: impl Into<String>) {
        self.errors.push(Diagnostic {
            kind: DiagnosticKind::Semantic,
            line,
            column,
            message: message.into(),
        });
    }

    fn numbers(&mut self, st: &Statement, n: usize) -> Option<Vec<f64>> {
        let nums: Vec<f64> = st
            .values
            .iter()
            .filter_map(|v| match v.tok {
                Tok::Number(x) => Some(x),
                _ => None,
            })
            .collect();
        if nums.len() != st.values.len() || nums.len() != n {
            self.err(st.line, st.column, format!("`{}` expects {n} number(s)", st.key));
            return None;
        }
        Some(nums)
    }

    fn number(&mut self, st: &Statement) -> Option<f64> {
        self.numbers(st, 1).map(|v| v[0])
    }

    fn word(&mut self, st: &Statement) -> Option<String> {
        match st.values.as_slice() {
            [Token { tok: Tok::Ident(w), .. }] => Some(w.clone()),
            _ => {
                self.err(st.line, st.column, format!("`{}` expects one word", st.key));
                None
            }
        }
    }

    fn boolean(&mut self, st: &Statement) -> Option<bool> {
        match self.word(st)?.as_str() {
            "true" => Some(true),
            "false" => Some(false),
            other => {
                self.err(st.line, st.column, format!("`{}` expects true or false, found `{other}`", st.key));
                None
            }
        }
    }
}

fn points(v: &[f64]) -> Vec<Vec2> {
    v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

/// Parse a scene document. Unspecified fields take their documented defaults.
pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    let eof_line = text.lines().count();
    let tokens = lex(text).map_err(|d| SceneError { diagnostics: vec![d] })?;
    let sections = parse_sections(&tokens, eof_line).map_err(|d| SceneError { diagnostics: vec![d] })?;

    let mut cx = Ctx { errors: Vec::new() };
    let mut scene = Scene::default();
    let mut params = HandParams::default();
    let mut hand_line = None;
    let mut seen_singletons: Vec<&str> = Vec::new();
    let mut finger_seen = [false; FINGER_COUNT];

    for sec in &sections {
        let singleton = matches!(sec.kind.as_str(), "sim" | "gravity" | "hand" | "control");
        if singleton {
            if seen_singletons.contains(&sec.kind.as_str()) {
                cx.err(sec.line, sec.column, format!("duplicate `{}` section", sec.kind));
                continue;
            }
            seen_singletons.push(sec.kind.as_str());
            if sec.name.is_some() {
                cx.err(sec.line, sec.column, format!("`{}` section takes no name", sec.kind));
            }
        }
        match sec.kind.as_str() {
            "sim" => parse_sim(&mut cx, sec, &mut scene.sim),
            "gravity" => {
                for st in &sec.statements {
                    match st.key.as_str() {
                        "x" => scene.gravity.x = cx.number(st).unwrap_or(scene.gravity.x),
                        "y" => scene.gravity.y = cx.number(st).unwrap_or(scene.gravity.y),
                        k => cx.err(st.line, st.column, format!("unknown key `{k}` in gravity")),
                    }
                }
            }
            "hand" => {
                hand_line = Some((sec.line, sec.column));
                parse_hand(&mut cx, sec, &mut params);
            }
            "object" => {
                let Some(name) = sec.name.clone() else {
                    cx.err(sec.line, sec.column, "object section needs a name");
                    continue;
                };
                if scene.objects.iter().any(|o| o.name == name) {
                    cx.err(sec.line, sec.column, format!("duplicate object `{name}`"));
                    continue;
                }
                if let Some(obj) = parse_object(&mut cx, sec, name) {
                    scene.objects.push(obj);
                }
            }
            "finger" => {
                let Some(id) = sec.name.as_deref().and_then(FingerId::from_name) else {
                    cx.err(sec.line, sec.column, "finger section needs one of thumb, index, middle, pinkie");
                    continue;
                };
                if std::mem::replace(&mut finger_seen[id.index()], true) {
                    cx.err(sec.line, sec.column, format!("duplicate finger `{id}`"));
                    continue;
                }
                parse_finger(&mut cx, sec, &mut scene.fingers[id.index()]);
            }
            "control" => {
                for st in &sec.statements {
                    if st.key != "at" {
                        cx.err(st.line, st.column, format!("unknown key `{}` in control", st.key));
                        continue;
                    }
                    match parse_command(st) {
                        Ok(c) => scene.control.push(c),
                        Err(m) => cx.err(st.line, st.column, m),
                    }
                }
            }
            other => cx.err(sec.line, sec.column, format!("unknown section `{other}`")),
        }
    }
    scene.control.sort_by(|a, b| a.t.total_cmp(&b.t));

    scene.hand = build_hand(&params);
    let report = validate(&scene.hand);
    if !report.is_ok() {
        let (line, column) = hand_line.unwrap_or((1, 1));
        for v in report.violations {
            cx.err(line, column, format!("hand: {}: {}", v.field, v.message));
        }
    }

    if cx.errors.is_empty() {
        Ok(scene)
    } else {
        Err(SceneError { diagnostics: cx.errors })
    }
}

fn parse_sim(cx: &mut Ctx, sec: &Section, sim: &mut SimConfig) {
    for st in &sec.statements {
        let (line, column) = (st.line, st.column);
        match st.key.as_str() {
            "dt" => {
                if let Some(v) = cx.number(st) {
                    if v > 0.0 {
                        sim.dt = v;
                    } else {
                        cx.err(line, column, "dt must be > 0");
                    }
                }
            }
            "t_end" => {
                if let Some(v) = cx.number(st) {
                    if v >= 0.0 {
                        sim.t_end = v;
                    } else {
                        cx.err(line, column, "t_end must be >= 0");
                    }
                }
            }
            "equilibrium_tol" => {
                if let Some(v) = cx.number(st) {
                    if v > 0.0 {
                        sim.equilibrium_tol = v;
                    } else {
                        cx.err(line, column, "equilibrium_tol must be > 0");
                    }
                }
            }
            "equilibrium_steps" | "record_every" => {
                if let Some(v) = cx.number(st) {
                    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
                        if st.key == "record_every" {
                            sim.record_every = v as usize;
                        } else {
                            sim.equilibrium_steps = v as usize;
                        }
                    } else {
                        cx.err(line, column, format!("{} must be a positive integer", st.key));
                    }
                }
            }
            "max_joint_speed" | "object_damping" => {
                if let Some(v) = cx.number(st) {
                    if v > 0.0 {
                        if st.key == "object_damping" {
                            sim.object_damping = v;
                        } else {
                            sim.max_joint_speed = v;
                        }
                    } else {
                        cx.err(line, column, format!("{} must be > 0", st.key));
                    }
                }
            }
            "stop" => match cx.word(st).as_deref() {
                Some("t_end") => sim.stop = StopMode::AtEnd,
                Some("equilibrium") => sim.stop = StopMode::AtEquilibrium,
                Some(w) => cx.err(line, column, format!("stop expects t_end or equilibrium, found `{w}`")),
                None => {}
            },
            "slack_agonist" | "slack_antagonist" => {
                if let Some(v) = cx.number(st) {
                    if v >= 0.0 {
                        if st.key == "slack_agonist" {
                            sim.slack_agonist = v;
                        } else {
                            sim.slack_antagonist = v;
                        }
                    } else {
                        cx.err(line, column, format!("{} must be >= 0", st.key));
                    }
                }
            }
            k => cx.err(line, column, format!("unknown key `{k}` in sim")),
        }
    }
}

fn parse_hand(cx: &mut Ctx, sec: &Section, p: &mut HandParams) {
    for st in &sec.statements {
        macro_rules! scalar {
            ($field:ident) => {
                if let Some(v) = cx.number(st) {
                    p.$field = v;
                }
            };
        }
        macro_rules! point {
            ($field:ident) => {
                if let Some(v) = cx.numbers(st, 2) {
                    p.$field = Vec2::new(v[0], v[1]);
                }
            };
        }
        match st.key.as_str() {
            "phalanx_lengths" => {
                if let Some(v) = cx.numbers(st, 4) {
                    p.phalanx_lengths = [v[0], v[1], v[2], v[3]];
                }
            }
            "flexor_guides" => {
                if let Some(v) = cx.numbers(st, 6) {
                    let pts = points(&v);
                    p.flexor_guides = [pts[0], pts[1], pts[2]];
                }
            }
            "extensor_guides" => {
                if let Some(v) = cx.numbers(st, 6) {
                    let pts = points(&v);
                    p.extensor_guides = [pts[0], pts[1], pts[2]];
                }
            }
            "distal_flexor_guide" => point!(distal_flexor_guide),
            "distal_extensor_guide" => point!(distal_extensor_guide),
            "flexor_anchor" => point!(flexor_anchor),
            "extensor_anchor" => point!(extensor_anchor),
            "joint_limit" => scalar!(joint_limit),
            "finger_width" => scalar!(finger_width),
            "aperture" => scalar!(aperture),
            "spool_radius" => scalar!(spool_radius),
            "slip_torque" => scalar!(slip_torque),
            "motor_max_torque" => scalar!(motor_max_torque),
            "no_load_speed" => scalar!(no_load_speed),
            "tendon_stiffness" => scalar!(tendon_stiffness),
            "guide_friction_mu" => scalar!(guide_friction_mu),
            "joint_damping" => scalar!(joint_damping),
            "stop_stiffness" => scalar!(stop_stiffness),
            "beam_friction" => scalar!(beam_friction),
            "pad_friction" => scalar!(pad_friction),
            "phalanx_mass" => scalar!(phalanx_mass),
            "contact_stiffness" => scalar!(contact_stiffness),
            "contact_damping" => scalar!(contact_damping),
            "palm_friction" => scalar!(palm_friction),
            k => cx.err(st.line, st.column, format!("unknown key `{k}` in hand")),
        }
    }
}

fn parse_object(cx: &mut Ctx, sec: &Section, name: String) -> Option<ObjectSpec> {
    let mut shape = None;
    let mut mass = None;
    let mut obj = ObjectSpec {
        name,
        shape: Shape::Circle { radius: 1.0 },
        mass: 0.0,
        pose: Pose2::default(),
        fixed: false,
        mu: None,
        friction_load: 0.0,
    };
    let before = cx.errors.len();
    for st in &sec.statements {
        let (line, column) = (st.line, st.column);
        match st.key.as_str() {
            "circle" => {
                if let Some(r) = cx.number(st) {
                    if r > 0.0 {
                        shape = Some(Shape::Circle { radius: r });
                    } else {
                        cx.err(line, column, "circle radius must be > 0");
                    }
                }
            }
            "capsule" => {
                if let Some(v) = cx.numbers(st, 5) {
                    if v[4] > 0.0 {
                        shape = Some(Shape::Capsule {
                            a: Vec2::new(v[0], v[1]),
                            b: Vec2::new(v[2], v[3]),
                            radius: v[4],
                        });
                    } else {
                        cx.err(line, column, "capsule radius must be > 0");
                    }
                }
            }
            "polygon" => {
                let n = st.values.len();
                if n < 6 || n % 2 != 0 {
                    cx.err(line, column, "polygon expects at least 3 x y vertex pairs");
                } else if let Some(v) = cx.numbers(st, n) {
                    let verts = points(&v);
                    if is_convex_ccw(&verts) {
                        shape = Some(Shape::Polygon { vertices: verts });
                    } else {
                        cx.err(line, column, "polygon must be convex and counter-clockwise");
                    }
                }
            }
            "mass" => {
                if let Some(m) = cx.number(st) {
                    if m > 0.0 {
                        mass = Some(m);
                    } else {
                        cx.err(line, column, format!("mass must be > 0, found {m}"));
                    }
                }
            }
            "pose" => {
                if let Some(v) = cx.numbers(st, 3) {
                    obj.pose = Pose2::new(v[0], v[1], v[2]);
                }
            }
            "fixed" => {
                if let Some(b) = cx.boolean(st) {
                    obj.fixed = b;
                }
            }
            "mu" => {
                if let Some(m) = cx.number(st) {
                    if m >= 0.0 {
                        obj.mu = Some(m);
                    } else {
                        cx.err(line, column, "mu must be >= 0");
                    }
                }
            }
            "friction_load" => {
                if let Some(f) = cx.number(st) {
                    if f >= 0.0 {
                        obj.friction_load = f;
                    } else {
                        cx.err(line, column, "friction_load must be >= 0");
                    }
                }
            }
            k => cx.err(line, column, format!("unknown key `{k}` in object")),
        }
    }
    if cx.errors.len() > before {
        return None;
    }
    match (shape, mass) {
        (Some(s), Some(m)) => {
            obj.shape = s;
            obj.mass = m;
            Some(obj)
        }
        (None, _) => {
            cx.err(sec.line, sec.column, format!("object `{}` has no shape", obj.name));
            None
        }
        (_, None) => {
            cx.err(sec.line, sec.column, format!("object `{}` has no mass", obj.name));
            None
        }
    }
}

fn parse_finger(cx: &mut Ctx, sec: &Section, f: &mut FingerConfig) {
    for st in &sec.statements {
        match st.key.as_str() {
            "active" => {
                if let Some(b) = cx.boolean(st) {
                    f.active = b;
                }
            }
            "q" => {
                if let Some(v) = cx.numbers(st, 3) {
                    f.q = [v[0], v[1], v[2]];
                }
            }
            "block" => {
                if let Some(v) = cx.numbers(st, 3) {
                    if v.iter().all(|x| (0.0..=1.0).contains(x)) {
                        f.block = Some([v[0], v[1], v[2]]);
                    } else {
                        cx.err(st.line, st.column, "block fractions must lie in [0, 1]");
                    }
                }
            }
            k => cx.err(st.line, st.column, format!("unknown key `{k}` in finger")),
        }
    }
}

fn parse_command(st: &Statement) -> Result<ControlCommand, String> {
    let [t, motor, target] = st.values.as_slice() else {
        return Err("`at` expects: time motor speed|hold".into());
    };
    let Tok::Number(t) = t.tok else {
        return Err("`at` time must be a number".into());
    };
    if t < 0.0 {
        return Err("`at` time must be >= 0".into());
    }
    let motor = match &motor.tok {
        Tok::Ident(m) if m == "agonist" => Shaft::Agonist,
        Tok::Ident(m) if m == "antagonist" => Shaft::Antagonist,
        _ => return Err("motor must be agonist or antagonist".into()),
    };
    let target = match &target.tok {
        Tok::Number(s) => SpeedCommand::Speed(*s),
        Tok::Ident(h) if h == "hold" => SpeedCommand::Hold,
        _ => return Err("target must be a speed in rad/s or hold".into()),
    };
    Ok(ControlCommand { t, motor, target })
}

/// Shortest decimal that parses back to the same value; 6 significant
/// digits or fewer whenever the value has them.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v}")
}

fn fmt_pts(pts: &[Vec2]) -> String {
    pts.iter()
        .map(|p| format!("{} {}", fmt_num(p.x), fmt_num(p.y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canonical text form: fixed section and key order, LF line endings.
pub fn serialize_scene(scene: &Scene) -> String {
    let mut out = String::new();
    let s = &scene.sim;
    let p = &scene.hand.params;

    out.push_str("control {\n");
    for c in &scene.control {
        let target = match c.target {
            SpeedCommand::Speed(v) => fmt_num(v),
            SpeedCommand::Hold => "hold".into(),
        };
        let _ = writeln!(out, "  at {} {} {};", fmt_num(c.t), c.motor.name(), target);
    }
    out.push_str("}\n");

    for id in FingerId::ALL {
        let f = &scene.fingers[id.index()];
        let _ = writeln!(out, "finger {id} {{");
        let _ = writeln!(out, "  active {};", f.active);
        if let Some(b) = f.block {
            let _ = writeln!(out, "  block {} {} {};", fmt_num(b[0]), fmt_num(b[1]), fmt_num(b[2]));
        }
        let _ = writeln!(out, "  q {} {} {};", fmt_num(f.q[0]), fmt_num(f.q[1]), fmt_num(f.q[2]));
        out.push_str("}\n");
    }

    let _ = writeln!(out, "gravity {{\n  x {};\n  y {};\n}}", fmt_num(scene.gravity.x), fmt_num(scene.gravity.y));

    out.push_str("hand {\n");
    let scalars = [
        ("aperture", p.aperture),
        ("beam_friction", p.beam_friction),
        ("contact_damping", p.contact_damping),
        ("contact_stiffness", p.contact_stiffness),
    ];
    for (k, v) in scalars {
        let _ = writeln!(out, "  {k} {};", fmt_num(v));
    }
    let _ = writeln!(out, "  distal_extensor_guide {};", fmt_pts(&[p.distal_extensor_guide]));
    let _ = writeln!(out, "  distal_flexor_guide {};", fmt_pts(&[p.distal_flexor_guide]));
    let _ = writeln!(out, "  extensor_anchor {};", fmt_pts(&[p.extensor_anchor]));
    let _ = writeln!(out, "  extensor_guides {};", fmt_pts(&p.extensor_guides));
    let _ = writeln!(out, "  finger_width {};", fmt_num(p.finger_width));
    let _ = writeln!(out, "  flexor_anchor {};", fmt_pts(&[p.flexor_anchor]));
    let _ = writeln!(out, "  flexor_guides {};", fmt_pts(&p.flexor_guides));
    let scalars = [
        ("guide_friction_mu", p.guide_friction_mu),
        ("joint_damping", p.joint_damping),
        ("joint_limit", p.joint_limit),
        ("motor_max_torque", p.motor_max_torque),
        ("no_load_speed", p.no_load_speed),
        ("pad_friction", p.pad_friction),
        ("palm_friction", p.palm_friction),
    ];
    for (k, v) in scalars {
        let _ = writeln!(out, "  {k} {};", fmt_num(v));
    }
    let l = p.phalanx_lengths;
    let _ = writeln!(
        out,
        "  phalanx_lengths {} {} {} {};",
        fmt_num(l[0]),
        fmt_num(l[1]),
        fmt_num(l[2]),
        fmt_num(l[3])
    );
    let scalars = [
        ("phalanx_mass", p.phalanx_mass),
        ("slip_torque", p.slip_torque),
        ("spool_radius", p.spool_radius),
        ("stop_stiffness", p.stop_stiffness),
        ("tendon_stiffness", p.tendon_stiffness),
    ];
    for (k, v) in scalars {
        let _ = writeln!(out, "  {k} {};", fmt_num(v));
    }
    out.push_str("}\n");

    for o in &scene.objects {
        let _ = writeln!(out, "object {} {{", o.name);
        match &o.shape {
            Shape::Capsule { a, b, radius } => {
                let _ = writeln!(out, "  capsule {} {};", fmt_pts(&[*a, *b]), fmt_num(*radius));
            }
            Shape::Circle { radius } => {
                let _ = writeln!(out, "  circle {};", fmt_num(*radius));
            }
            Shape::Polygon { vertices } => {
                let _ = writeln!(out, "  polygon {};", fmt_pts(vertices));
            }
        }
        let _ = writeln!(out, "  fixed {};", o.fixed);
        let _ = writeln!(out, "  friction_load {};", fmt_num(o.friction_load));
        let _ = writeln!(out, "  mass {};", fmt_num(o.mass));
        if let Some(mu) = o.mu {
            let _ = writeln!(out, "  mu {};", fmt_num(mu));
        }
        let _ = writeln!(
            out,
            "  pose {} {} {};",
            fmt_num(o.pose.position.x),
            fmt_num(o.pose.position.y),
            fmt_num(o.pose.angle)
        );
        out.push_str("}\n");
    }

    out.push_str("sim {\n");
    let _ = writeln!(out, "  dt {};", fmt_num(s.dt));
    let _ = writeln!(out, "  equilibrium_steps {};", s.equilibrium_steps);
    let _ = writeln!(out, "  equilibrium_tol {};", fmt_num(s.equilibrium_tol));
    let _ = writeln!(out, "  max_joint_speed {};", fmt_num(s.max_joint_speed));
    let _ = writeln!(out, "  object_damping {};", fmt_num(s.object_damping));
    let _ = writeln!(out, "  record_every {};", s.record_every);
    let _ = writeln!(out, "  slack_agonist {};", fmt_num(s.slack_agonist));
    let _ = writeln!(out, "  slack_antagonist {};", fmt_num(s.slack_antagonist));
    let stop = match s.stop {
        StopMode::AtEnd => "t_end",
        StopMode::AtEquilibrium => "equilibrium",
    };
    let _ = writeln!(out, "  stop {stop};");
    let _ = writeln!(out, "  t_end {};", fmt_num(s.t_end));
    out.push_str("}\n");
    out
}
