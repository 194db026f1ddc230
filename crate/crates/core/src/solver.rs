//! Time-stepped quasi-static simulation.
//!
//! Joints follow overdamped first-order dynamics, `b·q̇ = τ`, integrated
//! linearly-implicitly per finger with the tendon, contact and stop
//! stiffnesses folded into the step matrix. Mobile objects settle under
//! viscous damping. After the hand and objects move, each motor shaft
//! is stepped and the tendon states are refreshed.

use crate::contact::{detect_contacts, ContactBody, ContactParams, ContactPoint, ContactSource, Pose2, WorldShape};
use crate::drive::{ShaftSpec, ShaftState, TendonLoad};
use crate::geom::Vec2;
use crate::kinematics::{segment_arms, FingerPose, HandPose, SlidingDirection, TendonState};
use crate::model::{HandModel, Shaft, FINGER_COUNT, JOINTS_PER_FINGER, JOINT_COUNT};
use crate::scene::{Scene, StopMode};
use serde::{Deserialize, Serialize};

/// Tendon flow per step below which a tendon counts as stuck on its guides (mm).
const STUCK_FLOW: f64 = 1e-5;
/// Sliding distance over which guide friction develops fully (mm).
pub const PRESLIDING_LENGTH: f64 = 1.0;
/// Lever used to express object force residuals as a torque (m); unity
/// makes an object residual in N count as the same number in N·m.
const OBJECT_RESIDUAL_LEVER: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub pose: Pose2,
    /// mm/s
    pub velocity: Vec2,
    /// rad/s
    pub angular_velocity: f64,
    /// Net force after settling damping is removed (N).
    pub net_force: Vec2,
    /// N·m
    pub net_torque: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    /// s
    pub t: f64,
    /// 12 joint angles, finger-major (rad).
    pub q: Vec<f64>,
    /// rad/s
    pub qdot: Vec<f64>,
    pub objects: Vec<ObjectState>,
    /// Agonist, antagonist.
    pub shafts: Vec<ShaftState>,
    /// One per route, indexed like `HandModel::routes` (= spool index).
    pub tendons: Vec<TendonState>,
    /// Tendon material flow toward the spool over the last step (mm).
    pub tendon_flow: Vec<f64>,
    pub contacts: Vec<ContactPoint>,
    /// Largest unbalanced joint torque (N·m) or object settling force (N).
    pub residual: f64,
    pub step: u64,
}

impl SimState {
    pub fn finger_q(&self, finger: usize) -> [f64; 3] {
        [self.q[3 * finger], self.q[3 * finger + 1], self.q[3 * finger + 2]]
    }

    pub fn poses(&self, model: &HandModel) -> HandPose {
        HandPose::new(model, &self.q)
    }

    /// Flat view of spools in spool-index order.
    pub fn spool_wound(&self, spool: usize) -> f64 {
        self.shafts[spool / FINGER_COUNT].spools[spool % FINGER_COUNT].wound_length
    }

    pub fn clutch(&self, spool: usize) -> &crate::drive::ClutchState {
        &self.shafts[spool / FINGER_COUNT].clutches[spool % FINGER_COUNT]
    }

    /// Initial state of a scene: joints at their configured angles, every
    /// tendon just taut (less any injected slack), objects at rest.
    pub fn initial(scene: &Scene) -> SimState {
        let model = &scene.hand;
        let mut q = vec![0.0; JOINT_COUNT];
        for (fi, finger) in model.fingers.iter().enumerate() {
            let cfg = &scene.fingers[fi];
            for j in 0..JOINTS_PER_FINGER {
                let [lo, hi] = finger.joint_limits[j];
                let mut v = cfg.q[j].clamp(lo, hi);
                if let Some(b) = cfg.block {
                    v = v.min(b[j] * hi);
                }
                q[3 * fi + j] = v;
            }
        }
        let poses = HandPose::new(model, &q);
        let mut shafts = vec![ShaftState::new(&[0, 1, 2, 3]), ShaftState::new(&[4, 5, 6, 7])];
        let mut tendons = Vec::with_capacity(model.routes.len());
        for (ri, route) in model.routes.iter().enumerate() {
            let spool = &model.drive.spools[route.spool];
            let slack = match spool.shaft {
                Shaft::Agonist => scene.sim.slack_agonist,
                Shaft::Antagonist => scene.sim.slack_antagonist,
            };
            let pose = &poses.fingers[route.finger.index()];
            let path = crate::kinematics::route_length_in(route, pose);
            let wound = route.rest_length - path - slack;
            let s = &mut shafts[spool.shaft.index()].spools[route.spool % FINGER_COUNT];
            s.tendon = ri;
            s.wound_length = wound;
            s.angle = wound / spool.radius;
            tendons.push(TendonState::evaluate(
                route,
                pose,
                wound,
                model.tendon_stiffness,
                model.guide_friction_mu,
                SlidingDirection::Stuck,
                None,
            ));
        }
        SimState {
            t: 0.0,
            qdot: vec![0.0; JOINT_COUNT],
            q,
            objects: scene
                .objects
                .iter()
                .map(|o| ObjectState {
                    pose: o.pose,
                    velocity: Vec2::ZERO,
                    angular_velocity: 0.0,
                    net_force: Vec2::ZERO,
                    net_torque: 0.0,
                })
                .collect(),
            shafts,
            tendon_flow: vec![0.0; tendons.len()],
            tendons,
            contacts: Vec::new(),
            residual: 0.0,
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("numerical blow-up at t = {t:.4} s: joint {joint} speed {speed:.1} rad/s exceeds the bound (stiffness too high for dt?)")]
    NumericalBlowup { t: f64, joint: usize, speed: f64 },
    #[error("equilibrium not reached by t = {:.3} s (residual {:.3e} N·m)", .trace.final_state.t, .residual)]
    EquilibriumNotReached { trace: Box<Trace>, residual: f64 },
}

/// Solve `a x = b` for a small dense system; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn contact_bodies(scene: &Scene, objects: &[ObjectState]) -> Vec<ContactBody> {
    scene
        .objects
        .iter()
        .zip(objects)
        .map(|(spec, st)| ContactBody {
            shape: WorldShape::place(&spec.shape, &st.pose),
            mu: spec.mu,
        })
        .collect()
}

/// Sliding direction from the tendon flow over the last step.
fn direction_of(flow: f64) -> SlidingDirection {
    if flow > STUCK_FLOW {
        SlidingDirection::Winding
    } else if flow < -STUCK_FLOW {
        SlidingDirection::PayingOut
    } else {
        SlidingDirection::Stuck
    }
}

/// Tendon state after sliding `flow` mm over its guides. Guide friction
/// follows a pre-sliding law: the tension profile relaxes from the previous
/// (stuck) one toward the fully developed capstan profile over a
/// characteristic sliding distance, so reversals pass smoothly through the
/// friction band instead of jumping across it.
fn relaxed_tendon(
    route: &crate::model::TendonRoute,
    pose: &FingerPose,
    wound: f64,
    model: &HandModel,
    flow: f64,
    previous: &[f64],
) -> TendonState {
    let (k, mu) = (model.tendon_stiffness, model.guide_friction_mu);
    let direction = direction_of(flow);
    let mut ts = TendonState::evaluate(route, pose, wound, k, mu, SlidingDirection::Stuck, Some(previous));
    if direction != SlidingDirection::Stuck {
        let sliding = TendonState::evaluate(route, pose, wound, k, mu, direction, None);
        let w = (-flow.abs() / PRESLIDING_LENGTH).exp();
        for (t, full) in ts.segment_tensions.iter_mut().zip(&sliding.segment_tensions) {
            *t = full + (*t - full) * w;
        }
    }
    ts.direction = direction;
    ts
}

const MAX_ACTIVE_SET_ITERATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowMode {
    Stick,
    /// Sliding; the tangential force is `sign · μ · f_n`.
    Slide(f64),
    Released,
}

/// One contact linearised for an implicit solve of the body on its finger
/// side (`jn`, `jt` = generalized directions of finger-minus-object
/// displacement along the normal and tangent).
#[derive(Debug, Clone)]
struct Row {
    jn: Vec<f64>,
    jt: Vec<f64>,
    /// Forces at the start of the current solve (N).
    fn0: f64,
    ft0: f64,
    mu: f64,
    damp: bool,
    mode: RowMode,
}

impl Row {
    fn start(c: &ContactPoint, p: &ContactParams) -> Row {
        let fn0 = p.k_n * c.depth;
        let limit = c.mu * fn0;
        let ft0 = (-p.k_t * c.stick).clamp(-limit, limit);
        Row {
            jn: vec![0.0; 3],
            jt: vec![0.0; 3],
            fn0,
            ft0,
            mu: c.mu,
            damp: true,
            mode: RowMode::Stick,
        }
    }

    fn normal_gain(&self, p: &ContactParams, dt: f64) -> f64 {
        p.k_n + if self.damp { p.c_n / dt } else { 0.0 }
    }

    fn assemble(&self, a: &mut [Vec<f64>], rhs: &mut [f64], scale: f64, p: &ContactParams, dt: f64) {
        let an = self.normal_gain(p, dt);
        let n = rhs.len();
        match self.mode {
            RowMode::Released => {}
            RowMode::Stick => {
                for r in 0..n {
                    rhs[r] += scale * (self.fn0 * self.jn[r] + self.ft0 * self.jt[r]);
                    for c in 0..n {
                        a[r][c] += scale * (an * self.jn[r] * self.jn[c] + p.k_t * self.jt[r] * self.jt[c]);
                    }
                }
            }
            RowMode::Slide(s) => {
                for r in 0..n {
                    rhs[r] += scale * self.fn0 * (self.jn[r] + s * self.mu * self.jt[r]);
                    for c in 0..n {
                        a[r][c] += scale * an * (self.jn[r] + s * self.mu * self.jt[r]) * self.jn[c];
                    }
                }
            }
        }
    }

    fn forces_after(&self, dx: &[f64], p: &ContactParams, dt: f64) -> (f64, f64) {
        let dn: f64 = self.jn.iter().zip(dx).map(|(a, b)| a * b).sum();
        let dtan: f64 = self.jt.iter().zip(dx).map(|(a, b)| a * b).sum();
        let f_n = self.fn0 - self.normal_gain(p, dt) * dn;
        let f_t = match self.mode {
            RowMode::Stick => self.ft0 - p.k_t * dtan,
            RowMode::Slide(s) => s * self.mu * f_n,
            RowMode::Released => 0.0,
        };
        if self.mode == RowMode::Released {
            (0.0, 0.0)
        } else {
            (f_n, f_t)
        }
    }

    /// Re-derive damping and friction modes from a trial solution.
    fn update_mode(&mut self, dx: &[f64], p: &ContactParams, dt: f64) -> bool {
        let dn: f64 = self.jn.iter().zip(dx).map(|(a, b)| a * b).sum();
        let dtan: f64 = self.jt.iter().zip(dx).map(|(a, b)| a * b).sum();
        let mut changed = false;
        if self.damp && dn > 0.0 {
            self.damp = false;
            changed = true;
        }
        let f_n = self.fn0 - self.normal_gain(p, dt) * dn;
        let mode = if f_n <= 0.0 {
            RowMode::Released
        } else {
            let trial = self.ft0 - p.k_t * dtan;
            if trial.abs() <= self.mu * f_n {
                RowMode::Stick
            } else {
                RowMode::Slide(trial.signum())
            }
        };
        if mode != self.mode {
            self.mode = mode;
            changed = true;
        }
        changed
    }

    /// Accept a solution: its forces become the start values for the next
    /// body's solve.
    fn advance(&mut self, dx: &[f64], p: &ContactParams, dt: f64) {
        let (f_n, f_t) = self.forces_after(dx, p, dt);
        self.fn0 = f_n;
        self.ft0 = f_t;
        self.jn.iter_mut().for_each(|x| *x = 0.0);
        self.jt.iter_mut().for_each(|x| *x = 0.0);
        if self.mode == RowMode::Released {
            self.mode = RowMode::Stick;
            self.fn0 = 0.0;
            self.ft0 = 0.0;
        }
    }

    fn force_vector(&self, c: &ContactPoint) -> Vec2 {
        c.normal * self.fn0 + c.tangent() * self.ft0
    }

    fn finish(&self, c: &mut ContactPoint, p: &ContactParams) {
        c.normal_force = self.fn0.max(0.0);
        let limit = c.mu * c.normal_force;
        c.tangent_force = self.ft0.clamp(-limit, limit);
        c.stick = if c.normal_force == 0.0 { 0.0 } else { -c.tangent_force / p.k_t };
    }
}

/// Advance the whole system by one step of `dt`.
pub fn quasi_static_step(state: &SimState, scene: &Scene, dt: f64) -> Result<SimState, SimError> {
    let model = &scene.hand;
    let poses = state.poses(model);
    let active: Vec<bool> = scene.fingers.iter().map(|f| f.active).collect();

    // Tendon tensions at the current configuration.
    let seg_arms: Vec<_> = model
        .routes
        .iter()
        .map(|r| segment_arms(r, &poses.fingers[r.finger.index()]))
        .collect();

    let mut tau = [0.0; JOINT_COUNT];
    let mut stiff = vec![[[0.0; JOINTS_PER_FINGER]; JOINTS_PER_FINGER]; FINGER_COUNT];
    for (ri, route) in model.routes.iter().enumerate() {
        let fi = route.finger.index();
        if !active[fi] {
            continue;
        }
        let t = state.tendons[ri].joint_torques(&seg_arms[ri]);
        let arms = crate::kinematics::moment_arms_in(route, &poses.fingers[fi]);
        for j in 0..JOINTS_PER_FINGER {
            tau[3 * fi + j] += t[j];
        }
        let taut = state.tendons[ri].stretch > 0.0 && !state.clutch(route.spool).slipping;
        if taut {
            for a in 0..JOINTS_PER_FINGER {
                for b in 0..JOINTS_PER_FINGER {
                    stiff[fi][a][b] += model.tendon_stiffness * arms[a] * arms[b] * 1e-3;
                }
            }
        }
    }

    // Contacts at the current configuration, stick carried over by key.
    let cparams = ContactParams::from_model(model);
    let bodies = contact_bodies(scene, &state.objects);
    let mut contacts = detect_contacts(model, &poses, &bodies);
    contacts.retain(|c| match c.source {
        ContactSource::Phalanx { finger, .. } => active[finger.index()],
        ContactSource::Palm => !scene.objects[c.object].fixed,
    });
    for c in &mut contacts {
        if let Some(prev) = state.contacts.iter().find(|p| p.key() == c.key()) {
            c.stick = prev.stick;
        }
    }
    let mut rows: Vec<Row> = contacts.iter().map(|c| Row::start(c, &cparams)).collect();

    // Gravity on the phalanges.
    for (fi, finger) in model.fingers.iter().enumerate() {
        let pose = &poses.fingers[fi];
        for (k, ph) in finger.phalanges.iter().enumerate().skip(1) {
            if ph.mass == 0.0 {
                continue;
            }
            let mid = pose.point(k, Vec2::new(ph.length / 2.0, 0.0));
            let w = scene.gravity * ph.mass;
            for j in 0..JOINTS_PER_FINGER {
                tau[3 * fi + j] += pose.point_velocity(k, mid, j).dot(w) * 1e-3;
            }
        }
    }

    // Per-finger implicit update with active sets for stops, blocks and
    // contact modes. Objects are held in place for this half of the step.
    let b = model.joint_damping;
    let mut q = state.q.clone();
    let mut qdot = vec![0.0; JOINT_COUNT];
    let mut residual: f64 = 0.0;
    let mut finger_dq = [[0.0; JOINTS_PER_FINGER]; FINGER_COUNT];
    for (fi, finger) in model.fingers.iter().enumerate() {
        if !active[fi] {
            continue;
        }
        let base = 3 * fi;
        let cfg = &scene.fingers[fi];
        let pose = &poses.fingers[fi];
        let q0: Vec<f64> = state.q[base..base + 3].to_vec();
        let upper: Vec<f64> = (0..JOINTS_PER_FINGER)
            .map(|j| cfg.block.map_or(f64::INFINITY, |bl| bl[j] * finger.joint_limits[j][1]))
            .collect();
        let mine: Vec<usize> = (0..rows.len())
            .filter(|&i| matches!(contacts[i].source, ContactSource::Phalanx { finger, .. } if finger.index() == fi))
            .collect();
        for &i in &mine {
            let ContactSource::Phalanx { phalanx, .. } = contacts[i].source else { unreachable!() };
            let c = &contacts[i];
            for j in 0..JOINTS_PER_FINGER {
                let v = pose.point_velocity(phalanx, c.position, j);
                rows[i].jn[j] = v.dot(c.normal);
                rows[i].jt[j] = v.dot(c.tangent());
            }
        }
        let mut stop_on = [false; JOINTS_PER_FINGER];
        for j in 0..JOINTS_PER_FINGER {
            let [lo, hi] = finger.joint_limits[j];
            stop_on[j] = q0[j] < lo || q0[j] > hi;
        }
        let mut pinned = [false; JOINTS_PER_FINGER];
        let mut dq = vec![0.0; JOINTS_PER_FINGER];
        for _ in 0..MAX_ACTIVE_SET_ITERATIONS {
            let mut a = vec![vec![0.0; JOINTS_PER_FINGER]; JOINTS_PER_FINGER];
            let mut rhs = vec![0.0; JOINTS_PER_FINGER];
            for j in 0..JOINTS_PER_FINGER {
                rhs[j] = tau[base + j];
                for k in 0..JOINTS_PER_FINGER {
                    a[j][k] = stiff[fi][j][k];
                }
                a[j][j] += b / dt;
                if stop_on[j] {
                    let [lo, hi] = finger.joint_limits[j];
                    let target = if q0[j] + dq[j] < (lo + hi) / 2.0 { lo } else { hi };
                    rhs[j] += model.stop_stiffness * (target - q0[j]);
                    a[j][j] += model.stop_stiffness;
                }
            }
            for &i in &mine {
                rows[i].assemble(&mut a, &mut rhs, 1e-3, &cparams, dt);
            }
            for j in 0..JOINTS_PER_FINGER {
                if pinned[j] {
                    a[j] = vec![0.0; JOINTS_PER_FINGER];
                    a[j][j] = 1.0;
                    rhs[j] = upper[j] - q0[j];
                }
            }
            dq = solve_dense(a, rhs).unwrap_or_else(|| vec![0.0; JOINTS_PER_FINGER]);
            let mut changed = false;
            for j in 0..JOINTS_PER_FINGER {
                let [lo, hi] = finger.joint_limits[j];
                let qn = q0[j] + dq[j];
                if !pinned[j] && qn > upper[j] + 1e-12 {
                    pinned[j] = true;
                    changed = true;
                }
                // Stops only push: engaged exactly when the trial ends beyond.
                let beyond = qn < lo || qn > hi;
                if beyond != stop_on[j] && !pinned[j] {
                    stop_on[j] = beyond;
                    changed = true;
                }
            }
            for &i in &mine {
                changed |= rows[i].update_mode(&dq, &cparams, dt);
            }
            if !changed {
                break;
            }
        }
        for j in 0..JOINTS_PER_FINGER {
            let v = dq[j] / dt;
            if !v.is_finite() || v.abs() > scene.sim.max_joint_speed {
                return Err(SimError::NumericalBlowup {
                    t: state.t,
                    joint: base + j,
                    speed: v,
                });
            }
            q[base + j] = q0[j] + dq[j];
            qdot[base + j] = v;
            finger_dq[fi][j] = dq[j];
            if !pinned[j] {
                residual = residual.max((b * v).abs());
            }
        }
        // Fold the finger's motion into the contact start values.
        for &i in &mine {
            rows[i].advance(&dq, &cparams, dt);
        }
    }

    // Objects settle against the updated contacts.
    let mut objects = state.objects.clone();
    for (oi, (spec, obj)) in scene.objects.iter().zip(objects.iter_mut()).enumerate() {
        let mine: Vec<usize> = (0..rows.len()).filter(|&i| contacts[i].object == oi).collect();
        let centre = obj.pose.position;
        let weight = scene.gravity * spec.mass;
        if spec.fixed {
            let mut force = weight;
            let mut torque = 0.0;
            for &i in &mine {
                let f = -rows[i].force_vector(&contacts[i]);
                force += f;
                torque += (contacts[i].position - centre).cross(f);
            }
            obj.velocity = Vec2::ZERO;
            obj.angular_velocity = 0.0;
            obj.net_force = force;
            obj.net_torque = torque * 1e-3;
            continue;
        }
        for &i in &mine {
            let c = &contacts[i];
            let r = c.position - centre;
            rows[i].jn = vec![-c.normal.x, -c.normal.y, -r.cross(c.normal)];
            rows[i].jt = vec![-c.tangent().x, -c.tangent().y, -r.cross(c.tangent())];
        }
        let c_lin = scene.sim.object_damping;
        let c_ang = c_lin * spec.shape.gyration_sq();
        let damping = [c_lin, c_lin, c_ang];
        // Support friction: a Coulomb limit on the generalized push
        // (Fx, Fy, M/ρ), ρ the radius of gyration.
        let rho = spec.shape.gyration_sq().sqrt().max(1e-9);
        let mut resist = [0.0; 3];
        let mut dx = vec![0.0; 3];
        for _ in 0..MAX_ACTIVE_SET_ITERATIONS {
            let mut a = vec![vec![0.0; 3]; 3];
            let mut rhs = vec![weight.x - resist[0], weight.y - resist[1], -resist[2] * rho];
            for d in 0..3 {
                a[d][d] = damping[d] / dt;
            }
            for &i in &mine {
                rows[i].assemble(&mut a, &mut rhs, 1.0, &cparams, dt);
            }
            dx = solve_dense(a, rhs).unwrap_or_else(|| vec![0.0; 3]);
            let mut changed = false;
            for &i in &mine {
                changed |= rows[i].update_mode(&dx, &cparams, dt);
            }
            if spec.friction_load > 0.0 {
                let push = [
                    dx[0] * c_lin / dt + resist[0],
                    dx[1] * c_lin / dt + resist[1],
                    dx[2] * c_ang / dt / rho + resist[2],
                ];
                let norm = push.iter().map(|x| x * x).sum::<f64>().sqrt();
                let scale = if norm <= spec.friction_load { 1.0 } else { spec.friction_load / norm };
                let want = push.map(|x| x * scale);
                if want.iter().zip(&resist).any(|(w, r)| (w - r).abs() > 1e-12) {
                    resist = want;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for &i in &mine {
            rows[i].advance(&dx, &cparams, dt);
        }
        let vel = Vec2::new(dx[0], dx[1]) * (1.0 / dt);
        obj.velocity = vel;
        obj.angular_velocity = dx[2] / dt;
        obj.pose.position += Vec2::new(dx[0], dx[1]);
        obj.pose.angle += dx[2];
        obj.net_force = vel * c_lin;
        obj.net_torque = c_ang * obj.angular_velocity * 1e-3;
        residual = residual.max(obj.net_force.norm() * OBJECT_RESIDUAL_LEVER).max(obj.net_torque.abs());
    }
    let contacts: Vec<ContactPoint> = contacts
        .into_iter()
        .zip(&rows)
        .map(|(mut c, r)| {
            r.finish(&mut c, &cparams);
            c
        })
        .collect();

    // Drive train against the new path lengths.
    let new_poses = HandPose::new(model, &q);
    let paths: Vec<f64> = model
        .routes
        .iter()
        .map(|r| crate::kinematics::route_length_in(r, &new_poses.fingers[r.finger.index()]))
        .collect();
    let mut shafts = Vec::with_capacity(2);
    for shaft in [Shaft::Agonist, Shaft::Antagonist] {
        let st = &state.shafts[shaft.index()];
        let spec = ShaftSpec {
            radii: st.spools.iter().map(|s| model.drive.spools[model.routes[s.tendon].spool].radius).collect(),
            slip_torques: st
                .spools
                .iter()
                .map(|s| model.drive.clutches[model.drive.spools[model.routes[s.tendon].spool].clutch].slip_torque)
                .collect(),
            motor_max_torque: model.drive.motors[shaft.index()].max_torque,
        };
        let loads: Vec<TendonLoad> = st
            .spools
            .iter()
            .map(|s| TendonLoad {
                stretch_offset: paths[s.tendon] - model.routes[s.tendon].rest_length,
                stiffness: model.tendon_stiffness,
            })
            .collect();
        let engaged: Vec<bool> = st.spools.iter().map(|s| active[model.routes[s.tendon].finger.index()]).collect();
        let command = scene.command_at(shaft, state.t).speed();
        shafts.push(crate::drive::shaft_step(st, &spec, &loads, &engaged, command, dt));
    }

    let mut tendons = Vec::with_capacity(model.routes.len());
    let mut flows = Vec::with_capacity(model.routes.len());
    for (ri, route) in model.routes.iter().enumerate() {
        let fi = route.finger.index();
        let sp = route.spool;
        let old_wound = state.spool_wound(sp);
        let new_wound = shafts[sp / FINGER_COUNT].spools[sp % FINGER_COUNT].wound_length;
        let flow = 0.5 * ((new_wound - old_wound) - (paths[ri] - state.tendons[ri].path_length));
        flows.push(flow);
        let mut ts = relaxed_tendon(
            route,
            &new_poses.fingers[fi],
            new_wound,
            model,
            flow,
            &state.tendons[ri].segment_tensions,
        );
        if !active[fi] {
            ts.tension_at_spool = 0.0;
            ts.segment_tensions.iter_mut().for_each(|t| *t = 0.0);
        }
        tendons.push(ts);
    }

    Ok(SimState {
        // Snapped to the picosecond so long runs do not drift off the grid.
        t: ((state.t + dt) * 1e12).round() / 1e12,
        q,
        qdot,
        objects,
        shafts,
        tendons,
        tendon_flow: flows,
        contacts,
        residual,
        step: state.step + 1,
    })
}

/// Invariant bookkeeping over every step of a run, recorded or not.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: u64,
    /// N·m
    pub max_clutch_torque: f64,
    /// N·m
    pub max_motor_torque: f64,
    /// N
    pub min_tension: f64,
    /// rad beyond the joint limits
    pub max_stop_excess: f64,
    /// N, most positive `|f_t| - μ f_n`
    pub max_cone_excess: f64,
    /// N, most negative normal force
    pub min_normal_force: f64,
}

impl StepStats {
    /// Folds another run's extremes into this one.
    pub fn merge(&mut self, o: &StepStats) {
        self.steps += o.steps;
        self.max_clutch_torque = self.max_clutch_torque.max(o.max_clutch_torque);
        self.max_motor_torque = self.max_motor_torque.max(o.max_motor_torque);
        self.min_tension = self.min_tension.min(o.min_tension);
        self.max_stop_excess = self.max_stop_excess.max(o.max_stop_excess);
        self.max_cone_excess = self.max_cone_excess.max(o.max_cone_excess);
        self.min_normal_force = self.min_normal_force.min(o.min_normal_force);
    }

    fn absorb(&mut self, s: &SimState, model: &HandModel) {
        self.steps += 1;
        for sh in &s.shafts {
            self.max_motor_torque = self.max_motor_torque.max(sh.motor.delivered_torque.abs());
            for c in &sh.clutches {
                self.max_clutch_torque = self.max_clutch_torque.max(c.transmitted_torque.abs());
            }
        }
        for t in &s.tendons {
            for &x in std::iter::once(&t.tension_at_spool).chain(&t.segment_tensions) {
                self.min_tension = self.min_tension.min(x);
            }
        }
        for (fi, f) in model.fingers.iter().enumerate() {
            for j in 0..JOINTS_PER_FINGER {
                let q = s.q[3 * fi + j];
                let [lo, hi] = f.joint_limits[j];
                self.max_stop_excess = self.max_stop_excess.max(lo - q).max(q - hi);
            }
        }
        for c in &s.contacts {
            self.max_cone_excess = self.max_cone_excess.max(c.tangent_force.abs() - c.mu * c.normal_force);
            self.min_normal_force = self.min_normal_force.min(c.normal_force);
        }
    }
}

thread_local! {
    static COLLECTOR: std::cell::RefCell<Option<StepStats>> = const { std::cell::RefCell::new(None) };
}

fn observe(state: &SimState, model: &HandModel) {
    COLLECTOR.with(|c| {
        if let Some(stats) = c.borrow_mut().as_mut() {
            stats.absorb(state, model);
        }
    });
}

/// Runs `f` and returns, alongside its result, the extremes over every
/// step simulated on this thread meanwhile, including runs that ended in
/// an error. Calls nest.
pub fn collect_stats<T>(f: impl FnOnce() -> T) -> (T, StepStats) {
    let outer = COLLECTOR.with(|c| c.borrow_mut().replace(StepStats::default()));
    let out = f();
    let mine = COLLECTOR.with(|c| c.borrow_mut().take()).unwrap_or_default();
    if let Some(mut o) = outer {
        o.merge(&mine);
        COLLECTOR.with(|c| *c.borrow_mut() = Some(o));
    }
    (out, mine)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// Every `record_every`-th state, always including the first and last.
    pub states: Vec<SimState>,
    pub final_state: SimState,
    pub equilibrium: bool,
    pub stats: StepStats,
}

/// Run a scene from its initial state.
pub fn simulate(scene: &Scene) -> Result<Trace, SimError> {
    simulate_from(scene, SimState::initial(scene))
}

/// Run a scene from a given state until `t_end` (or equilibrium).
pub fn simulate_from(scene: &Scene, start: SimState) -> Result<Trace, SimError> {
    simulate_with(scene, start, |_| false)
}

/// Like [`simulate_from`] with an extra caller-supplied stop condition
/// checked after every step.
pub fn simulate_with(scene: &Scene, start: SimState, mut stop_when: impl FnMut(&SimState) -> bool) -> Result<Trace, SimError> {
    let dt = scene.sim.dt;
    let n_steps = ((scene.sim.t_end / dt) - 1e-9).ceil().max(0.0) as u64;
    let every = scene.sim.record_every.max(1) as u64;
    let mut stats = StepStats::default();
    stats.absorb(&start, &scene.hand);
    observe(&start, &scene.hand);
    let mut states = vec![start.clone()];
    let mut state = start;
    let mut calm = 0usize;
    let mut equilibrium = false;
    for i in 0..n_steps {
        state = quasi_static_step(&state, scene, dt)?;
        stats.absorb(&state, &scene.hand);
        observe(&state, &scene.hand);
        if (i + 1) % every == 0 {
            states.push(state.clone());
        }
        if state.residual < scene.sim.equilibrium_tol {
            calm += 1;
        } else {
            calm = 0;
        }
        if calm >= scene.sim.equilibrium_steps {
            equilibrium = true;
            if scene.sim.stop == StopMode::AtEquilibrium {
                break;
            }
        }
        if stop_when(&state) {
            break;
        }
    }
    if states.last().map(|s| s.step) != Some(state.step) {
        states.push(state.clone());
    }
    let trace = Trace {
        states,
        final_state: state,
        equilibrium,
        stats,
    };
    if scene.sim.stop == StopMode::AtEquilibrium && !trace.equilibrium {
        let residual = trace.final_state.residual;
        return Err(SimError::EquilibriumNotReached {
            trace: Box::new(trace),
            residual,
        });
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspReport {
    pub stable: bool,
    /// N
    pub force_residual: f64,
    /// N·m
    pub torque_residual: f64,
    pub contact_count: usize,
    /// Smallest `μ f_n - |f_t|` over the object's contacts (N); negative
    /// means a contact left its cone. Infinite with no contacts.
    pub min_cone_margin: f64,
    pub opposing: bool,
}

/// Static check of an object's grasp in a settled state.
pub fn grasp_quality(state: &SimState, scene: &Scene, object: usize, tol: f64) -> GraspReport {
    let spec = &scene.objects[object];
    let centre = state.objects[object].pose.position;
    let contacts: Vec<&ContactPoint> = state.contacts.iter().filter(|c| c.object == object).collect();
    let mut force = scene.gravity * spec.mass;
    let mut torque = 0.0;
    for c in &contacts {
        let f = -c.force_on_finger();
        force += f;
        torque += (c.position - centre).cross(f) * 1e-3;
    }
    let min_cone_margin = contacts
        .iter()
        .map(|c| c.mu * c.normal_force - c.tangent_force.abs())
        .fold(f64::INFINITY, f64::min);
    let opposing = contacts
        .iter()
        .enumerate()
        .any(|(i, a)| contacts[i + 1..].iter().any(|b| a.normal.dot(b.normal) < 0.0));
    let force_residual = force.norm();
    let torque_residual = torque.abs();
    GraspReport {
        stable: force_residual < tol && torque_residual < tol && min_cone_margin >= -1e-12 && contacts.len() >= 2 && opposing,
        force_residual,
        torque_residual,
        contact_count: contacts.len(),
        min_cone_margin,
        opposing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solver() {
        let a = vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]];
        let x = solve_dense(a.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        for r in 0..3 {
            let s: f64 = (0..3).map(|c| a[r][c] * x[c]).sum();
            assert!((s - [1.0, 2.0, 3.0][r]).abs() < 1e-12);
        }
        assert!(solve_dense(vec![vec![0.0]], vec![1.0]).is_none());
    }

    #[test]
    fn flow_classification() {
        assert_eq!(direction_of(1.0), SlidingDirection::Winding);
        assert_eq!(direction_of(-1.0), SlidingDirection::PayingOut);
        assert_eq!(direction_of(0.0), SlidingDirection::Stuck);
    }
}
