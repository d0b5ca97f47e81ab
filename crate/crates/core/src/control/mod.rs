//! Flight control: PID loops for face tracking, gesture maneuvers, and the
//! mode arbiter that decides which of them drives the drone.

mod controller;
mod maneuver;
mod mode;
mod pid;

pub use controller::{ControlOutput, ControllerConfig, FlightController};
pub use maneuver::{gesture_to_maneuver, Maneuver, ManeuverRunner, Step, STEP_CM, STEP_DEG};
pub use mode::{mode_arbiter, Arrow, ControlMode, Key, ModeInput};
pub use pid::{pid_step, PidGains, PidState, INTEGRAL_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::{Drone, SimConfig, TelloCommand};

/// Magnitude limit of every rc channel.
pub const CHANNEL_LIMIT: f64 = 100.0;
/// Face and distance observations older than this are ignored.
pub const STALE_INPUT_MS: u64 = 500;

/// Body-frame velocity request: cm/s for translation, deg/s for yaw.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub lateral: f64,
    pub longitudinal: f64,
    pub vertical: f64,
    pub yaw_rate: f64,
}

impl VelocityCommand {
    pub const ZERO: VelocityCommand = VelocityCommand {
        lateral: 0.0,
        longitudinal: 0.0,
        vertical: 0.0,
        yaw_rate: 0.0,
    };

    /// Every channel limited to ±100; NaN becomes 0.
    pub fn clamped(self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-CHANNEL_LIMIT, CHANNEL_LIMIT) };
        VelocityCommand {
            lateral: c(self.lateral),
            longitudinal: c(self.longitudinal),
            vertical: c(self.vertical),
            yaw_rate: c(self.yaw_rate),
        }
    }

    pub fn channels(&self) -> [f64; 4] {
        [self.lateral, self.longitudinal, self.vertical, self.yaw_rate]
    }

    pub fn to_rc(self) -> TelloCommand {
        let c = self.clamped();
        TelloCommand::Rc {
            lateral: c.lateral.round() as i32,
            longitudinal: c.longitudinal.round() as i32,
            vertical: c.vertical.round() as i32,
            yaw: c.yaw_rate.round() as i32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceTrackingGains {
    /// deg/s per pixel of horizontal offset.
    pub yaw: PidGains,
    /// cm/s per pixel of vertical offset.
    pub vertical: PidGains,
    /// cm/s per cm of distance error.
    pub longitudinal: PidGains,
}

impl Default for FaceTrackingGains {
    /// Tuned against the simulator with the trial-and-error recipe; see
    /// the README.
    fn default() -> Self {
        FaceTrackingGains {
            yaw: PidGains::new(0.1, 0.01, 0.0),
            vertical: PidGains::new(0.25, 0.02, 0.0),
            longitudinal: PidGains::new(0.6, 0.02, 0.0),
        }
    }
}

/// Latest perception inputs for face tracking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceInput {
    pub face_center: (f64, f64),
    pub face_timestamp_ms: u64,
    pub frame_dims: (u32, u32),
    pub distance_cm: Option<f64>,
    pub distance_timestamp_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct FaceTracker {
    pub gains: FaceTrackingGains,
    yaw: PidState,
    vertical: PidState,
    longitudinal: PidState,
}

impl FaceTracker {
    pub fn new(gains: FaceTrackingGains) -> Self {
        FaceTracker {
            gains,
            ..FaceTracker::default()
        }
    }

    pub fn reset(&mut self) {
        self.yaw.reset();
        self.vertical.reset();
        self.longitudinal.reset();
    }

    /// Keeps the face centered and at `target_distance_cm`.
    ///
    /// A face right of center gives a positive (clockwise) yaw rate, a face
    /// above center a positive vertical speed, and a user farther than the
    /// target a positive (forward) longitudinal speed. A stale face yields
    /// a hover; a stale or missing distance zeros only the longitudinal
    /// channel.
    pub fn update(&mut self, input: Option<&FaceInput>, target_distance_cm: f64, now_ms: u64) -> Result<VelocityCommand> {
        let Some(input) = input.filter(|i| now_ms.saturating_sub(i.face_timestamp_ms) < STALE_INPUT_MS) else {
            self.reset();
            return Ok(VelocityCommand::ZERO);
        };
        let (w, h) = (input.frame_dims.0 as f64, input.frame_dims.1 as f64);
        let (fx, fy) = input.face_center;
        let yaw_rate = self.yaw.step(&self.gains.yaw, fx, w / 2.0, now_ms)?;
        let vertical = self.vertical.step(&self.gains.vertical, h / 2.0, fy, now_ms)?;
        let fresh_distance = input
            .distance_cm
            .filter(|_| now_ms.saturating_sub(input.distance_timestamp_ms) < STALE_INPUT_MS);
        let longitudinal = match fresh_distance {
            Some(d) => self.longitudinal.step(&self.gains.longitudinal, d, target_distance_cm, now_ms)?,
            None => {
                self.longitudinal.reset();
                0.0
            }
        };
        Ok(VelocityCommand {
            lateral: 0.0,
            longitudinal,
            vertical,
            yaw_rate,
        }
        .clamped())
    }
}

/// Altitude trace of a hovering drone asked to climb `step_cm`, with a PID
/// on altitude setting the vertical velocity every `tick_ms`. Returns
/// `(time_ms, z - z0)` after each control period.
pub fn altitude_step_response(gains: &PidGains, step_cm: f64, duration_ms: u64, tick_ms: u64) -> Result<Vec<(u64, f64)>> {
    let mut drone = Drone::hovering(SimConfig::default(), 0.0, 0.0, 100.0, 0.0);
    let z0 = drone.state().z;
    let mut pid = PidState::default();
    let mut trace = Vec::new();
    let mut t = 0;
    while t < duration_ms {
        let u = pid.step(gains, z0 + step_cm, drone.state().z, t)?;
        drone.command_velocity(0.0, 0.0, u, 0.0);
        drone.advance(tick_ms, 10);
        t += tick_ms;
        trace.push((t, drone.state().z - z0));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(x: f64, y: f64, d: Option<f64>) -> FaceInput {
        FaceInput {
            face_center: (x, y),
            face_timestamp_ms: 1000,
            frame_dims: (960, 720),
            distance_cm: d,
            distance_timestamp_ms: 1000,
        }
    }

    #[test]
    fn centered_at_target_hovers() {
        let mut t = FaceTracker::default();
        let cmd = t.update(Some(&input(480.0, 360.0, Some(150.0))), 150.0, 1000).unwrap();
        assert_eq!(cmd, VelocityCommand::ZERO);
    }

    #[test]
    fn signs() {
        let mut t = FaceTracker::default();
        let cmd = t.update(Some(&input(300.0, 200.0, Some(250.0))), 150.0, 1000).unwrap();
        assert!(cmd.yaw_rate < 0.0, "face left of center turns counter-clockwise");
        assert!(cmd.vertical > 0.0, "face above center climbs");
        assert!(cmd.longitudinal > 0.0, "too far approaches");
    }

    #[test]
    fn stale_inputs() {
        let mut t = FaceTracker::default();
        let i = input(100.0, 100.0, Some(300.0));
        assert_eq!(t.update(Some(&i), 150.0, 1500).unwrap(), VelocityCommand::ZERO);
        assert_eq!(t.update(None, 150.0, 1500).unwrap(), VelocityCommand::ZERO);
        let mut i = input(100.0, 360.0, Some(300.0));
        i.face_timestamp_ms = 1400;
        let cmd = t.update(Some(&i), 150.0, 1500).unwrap();
        assert_eq!(cmd.longitudinal, 0.0);
        assert!(cmd.yaw_rate < 0.0);
    }

    #[test]
    fn rc_rounds_and_clamps() {
        let c = VelocityCommand {
            lateral: 250.0,
            longitudinal: -0.6,
            vertical: f64::NAN,
            yaw_rate: -1e9,
        };
        assert_eq!(
            c.to_rc(),
            TelloCommand::Rc {
                lateral: 100,
                longitudinal: -1,
                vertical: 0,
                yaw: -100
            }
        );
    }
}
