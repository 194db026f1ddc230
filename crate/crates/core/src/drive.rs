//! Motors, clutch-coupled spools and the two differential shafts.
//!
//! Each shaft carries four spools. A spool turns with its shaft until the
//! tendon torque on it reaches the clutch slip torque; beyond that the clutch
//! slips and the spool only gives or takes as much tendon as keeps the
//! transmitted torque at the limit.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorState {
    /// rad
    pub shaft_angle: f64,
    /// rad/s
    pub speed: f64,
    /// rad/s
    pub commanded_speed: f64,
    /// N·m
    pub delivered_torque: f64,
    /// 1 tick = 1 degree
    pub encoder_ticks: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClutchState {
    /// N·m
    pub transmitted_torque: f64,
    pub slipping: bool,
    /// rad
    pub slip_angle_accum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpoolState {
    /// rad
    pub angle: f64,
    /// mm, radius × angle
    pub wound_length: f64,
    pub tendon: usize,
}

/// Ideal torque-limited coupling.
pub fn clutch_transmit(demand: f64, limit: f64) -> (f64, bool) {
    (demand.clamp(-limit, limit), demand.abs() > limit)
}

/// Linear speed-torque droop: full command at no load, stall at `max_torque`.
/// `load` is the spools' pull toward paying out (N·m); it slows the motor
/// only while it opposes the command, so a shaft paying out line is not
/// held back by the tension it releases.
pub fn motor_step(state: &MotorState, command: f64, load: f64, max_torque: f64, dt: f64) -> MotorState {
    let opposing = if command >= 0.0 { load } else { -load };
    let droop = (1.0 - opposing.max(0.0) / max_torque).max(0.0);
    let speed = command * droop;
    let shaft_angle = state.shaft_angle + speed * dt;
    MotorState {
        shaft_angle,
        speed,
        commanded_speed: command,
        delivered_torque: load.clamp(-max_torque, max_torque),
        encoder_ticks: shaft_angle.to_degrees().round() as i64,
    }
}

/// Elastic tendon as seen from its spool: tension is
/// `stiffness * max(0, stretch_offset + wound_length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TendonLoad {
    /// Path length minus rest length (mm).
    pub stretch_offset: f64,
    /// N/mm
    pub stiffness: f64,
}

impl TendonLoad {
    /// Load that carries `tension` at the current wound length.
    pub fn with_tension(tension: f64, wound_length: f64, stiffness: f64) -> TendonLoad {
        TendonLoad {
            stretch_offset: tension / stiffness - wound_length,
            stiffness,
        }
    }

    pub fn tension(&self, wound_length: f64) -> f64 {
        self.stiffness * (self.stretch_offset + wound_length).max(0.0)
    }

    /// Wound length at which the tension equals `tension` (> 0).
    fn wound_for(&self, tension: f64) -> f64 {
        tension / self.stiffness - self.stretch_offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShaftState {
    pub motor: MotorState,
    pub clutches: Vec<ClutchState>,
    pub spools: Vec<SpoolState>,
}

impl ShaftState {
    pub fn new(tendons: &[usize]) -> ShaftState {
        ShaftState {
            motor: MotorState::default(),
            clutches: vec![ClutchState::default(); tendons.len()],
            spools: tendons
                .iter()
                .map(|&t| SpoolState {
                    tendon: t,
                    ..Default::default()
                })
                .collect(),
        }
    }
}

/// Per-shaft constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShaftSpec {
    /// mm, per spool
    pub radii: Vec<f64>,
    /// N·m, per clutch
    pub slip_torques: Vec<f64>,
    /// N·m
    pub motor_max_torque: f64,
}

/// Spool torque (N·m) from a tendon tension (N) on a radius in mm.
fn spool_torque(tension: f64, radius_mm: f64) -> f64 {
    tension * radius_mm * 1e-3
}

/// Advance one shaft by `dt`.
///
/// `engaged[i] == false` decouples spool `i` entirely (its tendon is not
/// mounted); it neither turns nor loads the motor.
pub fn shaft_step(
    shaft: &ShaftState,
    spec: &ShaftSpec,
    loads: &[TendonLoad],
    engaged: &[bool],
    command: f64,
    dt: f64,
) -> ShaftState {
    let n = shaft.spools.len();
    let load: f64 = (0..n)
        .filter(|&i| engaged[i])
        .map(|i| {
            let demand = spool_torque(loads[i].tension(shaft.spools[i].wound_length), spec.radii[i]);
            clutch_transmit(demand, spec.slip_torques[i]).0
        })
        .sum();
    let mut motor = motor_step(&shaft.motor, command, load, spec.motor_max_torque, dt);
    let delta = motor.shaft_angle - shaft.motor.shaft_angle;

    let mut clutches = shaft.clutches.clone();
    let mut spools = shaft.spools.clone();
    let mut transmitted_total = 0.0;
    for i in 0..n {
        if !engaged[i] {
            clutches[i].transmitted_torque = 0.0;
            clutches[i].slipping = false;
            continue;
        }
        let r = spec.radii[i];
        let limit = spec.slip_torques[i];
        let tentative_angle = spools[i].angle + delta;
        let demand = spool_torque(loads[i].tension(r * tentative_angle), r);
        let (transmitted, slipping) = clutch_transmit(demand, limit);
        let angle = if slipping {
            // Spool settles where the tendon torque equals the slip torque.
            let limit_tension = limit / (r * 1e-3);
            loads[i].wound_for(limit_tension) / r
        } else {
            tentative_angle
        };
        clutches[i].slip_angle_accum += (tentative_angle - angle).abs();
        clutches[i].transmitted_torque = transmitted;
        clutches[i].slipping = slipping;
        spools[i].angle = angle;
        spools[i].wound_length = r * angle;
        transmitted_total += transmitted;
    }
    motor.delivered_torque = transmitted_total.clamp(-spec.motor_max_torque, spec.motor_max_torque);
    ShaftState {
        motor,
        clutches,
        spools,
    }
}
