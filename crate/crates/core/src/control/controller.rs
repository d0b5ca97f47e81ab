//! The control-loop task: owns the mode, the PID states and the running
//! maneuver, consumes perception messages and emits drone commands.

use serde::{Deserialize, Serialize};

use super::maneuver::RunnerAction;
use super::mode::Arrow;
use super::{
    gesture_to_maneuver, mode_arbiter, ControlMode, FaceInput, FaceTracker, FaceTrackingGains, Key, ManeuverRunner,
    ModeInput, VelocityCommand,
};
use crate::error::Result;
use crate::sim::{DroneState, TelloCommand};
use crate::stability::GestureEvent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub tick_ms: u64,
    pub target_distance_cm: f64,
    /// Arc radius for circle-around when no distance estimate is available.
    pub fallback_distance_cm: f64,
    pub face_gains: FaceTrackingGains,
    /// Speed of arrow-key manual flight, cm/s.
    pub manual_speed: f64,
    /// An arrow key press holds its velocity this long.
    pub manual_hold_ms: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            tick_ms: 50,
            target_distance_cm: 150.0,
            fallback_distance_cm: 150.0,
            face_gains: FaceTrackingGains::default(),
            manual_speed: 40.0,
            manual_hold_ms: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlOutput {
    Command(TelloCommand),
    /// Photo capture requested by the cheese gesture.
    Snapshot,
}

#[derive(Debug, Clone)]
pub struct FlightController {
    cfg: ControllerConfig,
    mode: ControlMode,
    tracker: FaceTracker,
    runner: ManeuverRunner,
    drone: DroneState,
    face: Option<((f64, f64), (u32, u32), u64)>,
    distance: Option<(f64, u64)>,
    pending_gesture: Option<GestureEvent>,
    manual: Option<(VelocityCommand, u64)>,
}

impl FlightController {
    pub fn new(cfg: ControllerConfig) -> Self {
        FlightController {
            tracker: FaceTracker::new(cfg.face_gains),
            cfg,
            mode: ControlMode::default(),
            runner: ManeuverRunner::default(),
            drone: DroneState::default(),
            face: None,
            distance: None,
            pending_gesture: None,
            manual: None,
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    pub fn maneuver_active(&self) -> bool {
        self.runner.is_active()
    }

    /// Applies a key immediately. Emergency output is never delayed to the
    /// next tick.
    pub fn on_key(&mut self, key: Key, now_ms: u64) -> Vec<ControlOutput> {
        let previous = self.mode;
        self.mode = mode_arbiter(previous, ModeInput::Key(key));
        let mut out = Vec::new();
        if self.mode != previous {
            self.tracker.reset();
            self.runner.cancel();
            self.pending_gesture = None;
            self.manual = None;
            if self.mode == ControlMode::Emergency {
                out.push(ControlOutput::Command(TelloCommand::Emergency));
                return out;
            }
            if previous != ControlMode::Emergency {
                out.push(ControlOutput::Command(VelocityCommand::ZERO.to_rc()));
            }
        }
        if self.mode == ControlMode::Emergency {
            return out;
        }
        match key {
            Key::Takeoff | Key::Land => {
                self.runner.cancel();
                let cmd = if key == Key::Takeoff {
                    TelloCommand::Takeoff
                } else {
                    TelloCommand::Land
                };
                out.push(ControlOutput::Command(cmd));
            }
            Key::Arrow(a) if self.mode == ControlMode::Keyboard => {
                let s = self.cfg.manual_speed;
                let mut v = VelocityCommand::ZERO;
                match a {
                    Arrow::Up => v.longitudinal = s,
                    Arrow::Down => v.longitudinal = -s,
                    Arrow::Left => v.lateral = -s,
                    Arrow::Right => v.lateral = s,
                }
                self.manual = Some((v, now_ms + self.cfg.manual_hold_ms));
            }
            _ => {}
        }
        out
    }

    /// Queues a stable gesture. Ignored outside gesture mode or while a
    /// maneuver is still running.
    pub fn on_gesture(&mut self, event: GestureEvent) {
        if mode_arbiter(self.mode, ModeInput::GestureEvent) == ControlMode::GestureControl && !self.runner.is_active() {
            self.pending_gesture = Some(event);
        }
    }

    pub fn on_face(&mut self, center: (f64, f64), frame_dims: (u32, u32), timestamp_ms: u64) {
        self.face = Some((center, frame_dims, timestamp_ms));
    }

    pub fn on_distance(&mut self, distance_cm: f64, timestamp_ms: u64) {
        self.distance = Some((distance_cm, timestamp_ms));
    }

    pub fn on_drone_state(&mut self, state: DroneState) {
        self.drone = state;
    }

    pub fn on_reply(&mut self, reply: &str) {
        self.runner.on_reply(reply);
    }

    /// One control period.
    pub fn tick(&mut self, now_ms: u64) -> Result<Vec<ControlOutput>> {
        let mut out = Vec::new();
        match self.mode {
            ControlMode::Emergency => {}
            ControlMode::Keyboard => {
                if let Some((v, until)) = self.manual {
                    if now_ms < until {
                        out.push(ControlOutput::Command(v.to_rc()));
                    } else {
                        self.manual = None;
                        out.push(ControlOutput::Command(VelocityCommand::ZERO.to_rc()));
                    }
                }
            }
            ControlMode::FaceTracking => {
                let input = self.face.map(|(center, dims, ts)| FaceInput {
                    face_center: center,
                    face_timestamp_ms: ts,
                    frame_dims: dims,
                    distance_cm: self.distance.map(|d| d.0),
                    distance_timestamp_ms: self.distance.map_or(0, |d| d.1),
                });
                let v = self.tracker.update(input.as_ref(), self.cfg.target_distance_cm, now_ms)?;
                out.push(ControlOutput::Command(v.to_rc()));
            }
            ControlMode::GestureControl => {
                if !self.runner.is_active() {
                    if let Some(event) = self.pending_gesture.take() {
                        let d = self.distance.map_or(self.cfg.fallback_distance_cm, |d| d.0);
                        let m = gesture_to_maneuver(&event, &self.drone, d, self.cfg.tick_ms);
                        log::debug!("gesture {} -> {} steps", event.gesture, m.steps.len());
                        self.runner.start(&m);
                    }
                }
                match self.runner.tick(now_ms) {
                    Some(RunnerAction::Send(cmd)) => out.push(ControlOutput::Command(cmd)),
                    Some(RunnerAction::Snapshot) => out.push(ControlOutput::Snapshot),
                    None => {}
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::Gesture;

    fn event(g: Gesture, t: u64) -> GestureEvent {
        GestureEvent {
            gesture: g,
            timestamp_ms: t,
            stable_count: 3,
        }
    }

    fn flying() -> DroneState {
        DroneState {
            flying: true,
            z: 100.0,
            ..DroneState::default()
        }
    }

    #[test]
    fn emergency_is_immediate_and_absorbing() {
        let mut c = FlightController::new(ControllerConfig::default());
        c.on_key(Key::Mode(ControlMode::GestureControl), 0);
        let out = c.on_key(Key::Emergency, 10);
        assert_eq!(out, vec![ControlOutput::Command(TelloCommand::Emergency)]);
        c.on_gesture(event(Gesture::Up, 20));
        assert!(c.tick(50).unwrap().is_empty());
        assert!(c.on_key(Key::Takeoff, 60).is_empty());
        assert_eq!(c.mode(), ControlMode::Emergency);
        c.on_key(Key::Reset, 70);
        assert_eq!(c.mode(), ControlMode::Keyboard);
    }

    #[test]
    fn gestures_need_gesture_mode() {
        let mut c = FlightController::new(ControllerConfig::default());
        c.on_drone_state(flying());
        c.on_gesture(event(Gesture::Up, 0));
        assert!(c.tick(50).unwrap().is_empty());
        c.on_key(Key::Mode(ControlMode::GestureControl), 60);
        c.on_gesture(event(Gesture::Up, 70));
        let out = c.tick(100).unwrap();
        assert_eq!(out, vec![ControlOutput::Command(TelloCommand::Move { direction: crate::sim::Direction::Up, cm: 50 })]);
        // Busy until the reply arrives.
        c.on_gesture(event(Gesture::Down, 120));
        assert!(c.tick(150).unwrap().is_empty());
        c.on_reply("ok");
        assert!(c.tick(200).unwrap().is_empty());
    }

    #[test]
    fn mode_switch_resets_and_hovers() {
        let mut c = FlightController::new(ControllerConfig::default());
        c.on_key(Key::Mode(ControlMode::FaceTracking), 0);
        c.on_face((100.0, 360.0), (960, 720), 10);
        let out = c.tick(50).unwrap();
        assert!(matches!(out[0], ControlOutput::Command(TelloCommand::Rc { yaw, .. }) if yaw < 0));
        let out = c.on_key(Key::Mode(ControlMode::Keyboard), 60);
        assert_eq!(out, vec![ControlOutput::Command(VelocityCommand::ZERO.to_rc())]);
    }

    #[test]
    fn arrows_hold_then_stop() {
        let mut c = FlightController::new(ControllerConfig::default());
        c.on_key(Key::Arrow(Arrow::Right), 0);
        assert!(matches!(c.tick(50).unwrap()[0], ControlOutput::Command(TelloCommand::Rc { lateral: 40, .. })));
        assert_eq!(c.tick(400).unwrap(), vec![ControlOutput::Command(VelocityCommand::ZERO.to_rc())]);
        assert!(c.tick(450).unwrap().is_empty());
    }
}
