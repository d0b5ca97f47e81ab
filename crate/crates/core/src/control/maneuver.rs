//! Gesture-triggered maneuver scripts and their step-by-step execution.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::VelocityCommand;
use crate::gesture::Gesture;
use crate::sim::{Direction, DroneState, Rotation, TelloCommand};
use crate::stability::GestureEvent;

/// Translation per gesture, cm.
pub const STEP_CM: u32 = 50;
/// Rotation per gesture, degrees.
pub const STEP_DEG: u32 = 90;
/// Tangential speed along the circle-around arc, cm/s.
const ARC_SPEED: f64 = 30.0;
/// Hover after the arc so the velocity lag dies out before rotating.
const ARC_SETTLE_MS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Step {
    /// Send a discrete command and wait for its reply.
    Command(TelloCommand),
    /// Hold an rc velocity for one control tick.
    Velocity(VelocityCommand),
    Hover { duration_ms: u64 },
    /// Photo capture; no motion.
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maneuver {
    pub gesture: Gesture,
    pub steps: Vec<Step>,
    /// Nominal path length in cm.
    pub path_length_cm: f64,
    /// Net heading change in degrees, clockwise positive.
    pub yaw_deg: f64,
}

/// Script for a stable gesture. Translations are [`STEP_CM`], rotations
/// [`STEP_DEG`]. The side gestures fly a quarter circle of radius
/// `distance_cm` around the user (who stands straight ahead), using one rc
/// chord per control tick of `tick_ms`, then turn 90 degrees to face them.
/// A drone on the ground gets an empty script.
pub fn gesture_to_maneuver(event: &GestureEvent, current: &DroneState, distance_cm: f64, tick_ms: u64) -> Maneuver {
    let gesture = event.gesture;
    let single = |cmd: TelloCommand, length: f64, yaw: f64| Maneuver {
        gesture,
        steps: vec![Step::Command(cmd)],
        path_length_cm: length,
        yaw_deg: yaw,
    };
    let mv = |direction| single(TelloCommand::Move { direction, cm: STEP_CM }, STEP_CM as f64, 0.0);
    let turn = |rotation| {
        let sign = if rotation == Rotation::Cw { 1.0 } else { -1.0 };
        single(
            TelloCommand::Rotate {
                rotation,
                degrees: STEP_DEG,
            },
            0.0,
            sign * STEP_DEG as f64,
        )
    };
    if !current.flying {
        return Maneuver {
            gesture,
            steps: Vec::new(),
            path_length_cm: 0.0,
            yaw_deg: 0.0,
        };
    }
    match gesture {
        Gesture::Up => mv(Direction::Up),
        Gesture::Down => mv(Direction::Down),
        Gesture::Left => mv(Direction::Left),
        Gesture::Right => mv(Direction::Right),
        Gesture::Forward => mv(Direction::Forward),
        Gesture::Backward => mv(Direction::Back),
        Gesture::Cw => turn(Rotation::Cw),
        Gesture::Ccw => turn(Rotation::Ccw),
        Gesture::Cheese => Maneuver {
            gesture,
            steps: vec![Step::Snapshot],
            path_length_cm: 0.0,
            yaw_deg: 0.0,
        },
        Gesture::SideLeft | Gesture::SideRight => circle_around(gesture, distance_cm, tick_ms),
    }
}

/// Body-frame offset (lateral, longitudinal) after sweeping `theta` along
/// the arc. `side` is -1 to pass around the user's left, +1 for the right.
fn arc_point(radius: f64, theta: f64, side: f64) -> (f64, f64) {
    (side * radius * theta.sin(), radius * (1.0 - theta.cos()))
}

fn circle_around(gesture: Gesture, radius: f64, tick_ms: u64) -> Maneuver {
    let (side, rotation) = if gesture == Gesture::SideLeft {
        (-1.0, Rotation::Cw)
    } else {
        (1.0, Rotation::Ccw)
    };
    let length = FRAC_PI_2 * radius;
    let dt = tick_ms as f64 / 1000.0;
    let ticks = ((length / ARC_SPEED) / dt).ceil().max(1.0) as usize;
    let mut steps = Vec::with_capacity(ticks + 3);

    // Integer rc channels: carry the rounding remainder forward so the
    // summed displacement matches the arc endpoint.
    let mut carry = (0.0, 0.0);
    let mut prev = arc_point(radius, 0.0, side);
    for k in 1..=ticks {
        let p = arc_point(radius, FRAC_PI_2 * k as f64 / ticks as f64, side);
        let want = ((p.0 - prev.0) / dt + carry.0, (p.1 - prev.1) / dt + carry.1);
        let sent = (want.0.round(), want.1.round());
        carry = (want.0 - sent.0, want.1 - sent.1);
        prev = p;
        steps.push(Step::Velocity(VelocityCommand {
            lateral: sent.0,
            longitudinal: sent.1,
            vertical: 0.0,
            yaw_rate: 0.0,
        }));
    }
    steps.push(Step::Velocity(VelocityCommand::ZERO));
    steps.push(Step::Hover {
        duration_ms: ARC_SETTLE_MS,
    });
    steps.push(Step::Command(TelloCommand::Rotate {
        rotation,
        degrees: STEP_DEG,
    }));
    let sign = if rotation == Rotation::Cw { 1.0 } else { -1.0 };
    Maneuver {
        gesture,
        steps,
        path_length_cm: length,
        yaw_deg: sign * STEP_DEG as f64,
    }
}

/// What the runner wants done on this control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunnerAction {
    Send(TelloCommand),
    Snapshot,
}

/// Executes a [`Maneuver`] one control tick at a time.
#[derive(Debug, Clone, Default)]
pub struct ManeuverRunner {
    steps: VecDeque<Step>,
    awaiting_reply: bool,
    hover_until: Option<u64>,
    failed: bool,
}

impl ManeuverRunner {
    pub fn start(&mut self, maneuver: &Maneuver) {
        self.steps = maneuver.steps.iter().copied().collect();
        self.awaiting_reply = false;
        self.hover_until = None;
        self.failed = false;
    }

    pub fn cancel(&mut self) {
        *self = ManeuverRunner::default();
    }

    pub fn is_active(&self) -> bool {
        !self.steps.is_empty() || self.awaiting_reply || self.hover_until.is_some()
    }

    /// True if the last script was aborted by an "error" reply.
    pub fn failed(&self) -> bool {
        self.failed
    }

    /// Feeds a reply from the drone. An "error" aborts the rest of the script.
    pub fn on_reply(&mut self, reply: &str) {
        if !self.awaiting_reply {
            return;
        }
        self.awaiting_reply = false;
        if reply.trim() == "error" {
            self.steps.clear();
            self.failed = true;
        }
    }

    pub fn tick(&mut self, now_ms: u64) -> Option<RunnerAction> {
        if self.awaiting_reply {
            return None;
        }
        if let Some(until) = self.hover_until {
            if now_ms < until {
                return None;
            }
            self.hover_until = None;
        }
        match self.steps.pop_front()? {
            Step::Command(cmd) => {
                self.awaiting_reply = true;
                Some(RunnerAction::Send(cmd))
            }
            Step::Velocity(v) => Some(RunnerAction::Send(v.to_rc())),
            Step::Snapshot => Some(RunnerAction::Snapshot),
            Step::Hover { duration_ms } => {
                self.hover_until = Some(now_ms + duration_ms);
                None
            }
        }
    }
}
