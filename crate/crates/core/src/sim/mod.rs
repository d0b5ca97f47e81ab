//! Simulated quadrotor speaking the Tello text protocol.
//!
//! The plant is a per-axis first-order velocity lag (time constant `tau`)
//! in the body frame with no attitude dynamics. Each tick integrates the lag
//! in closed form, so results do not depend on the tick size.
//!
//! World frame: `x` east, `y` north, `z` up, in centimeters. Yaw is in
//! degrees, clockwise seen from above, zero facing `+y`.

mod protocol;
pub mod udp;

pub use protocol::{
    parse_command, telemetry, wrap_degrees, Direction, Rotation, TelloCommand, MOVE_RANGE,
    RC_RANGE, ROTATE_RANGE,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Body axes, in the order used by [`DroneState::velocity`].
const LATERAL: usize = 0;
const LONGITUDINAL: usize = 1;
const VERTICAL: usize = 2;

/// Proportional gain (1/s) of the internal profile used for relative moves.
const PROFILE_GAIN: f64 = 1.2;
const PROFILE_MAX_SPEED: f64 = 100.0;
const DONE_POSITION_CM: f64 = 0.5;
const DONE_SPEED: f64 = 1.0;
/// Moves may not end below this altitude.
const MIN_ALTITUDE_CM: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Unwrapped heading; see [`wrap_degrees`] for the reported value.
    pub yaw: f64,
    /// Body-frame (lateral right, longitudinal forward, vertical up) in cm/s.
    pub velocity: [f64; 3],
    /// deg/s, clockwise positive.
    pub yaw_rate: f64,
    pub battery: f64,
    pub flying: bool,
    pub sim_time_ms: u64,
    pub flight_time_ms: u64,
}

impl Default for DroneState {
    fn default() -> Self {
        DroneState {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            yaw: 0.0,
            velocity: [0.0; 3],
            yaw_rate: 0.0,
            battery: 100.0,
            flying: false,
            sim_time_ms: 0,
            flight_time_ms: 0,
        }
    }
}

impl DroneState {
    /// Unit forward and right vectors in the world plane.
    pub fn heading_vectors(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.yaw.to_radians().sin_cos();
        ([s, c], [c, -s])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tau_ms: f64,
    pub takeoff_height_cm: f64,
    /// Percent per simulated second while flying.
    pub battery_drain: f64,
    /// Standard deviation of additive velocity noise on the command, cm/s.
    pub velocity_jitter: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tau_ms: 300.0,
            takeoff_height_cm: 80.0,
            battery_drain: 0.1,
            velocity_jitter: 0.0,
            seed: 0,
        }
    }
}

/// How a command is answered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Now(String),
    /// "ok" arrives from [`Drone::tick`] once the maneuver completes.
    Deferred,
}

impl Reply {
    fn ok() -> Self {
        Reply::Now("ok".into())
    }

    fn error() -> Self {
        Reply::Now("error".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Task {
    Translate {
        axis: usize,
        sign: f64,
        start: [f64; 3],
        world_dir: [f64; 3],
        target: f64,
    },
    Rotate {
        start_yaw: f64,
        target: f64,
    },
    Climb {
        target_z: f64,
    },
    Land,
}

#[derive(Debug, Clone)]
pub struct Drone {
    state: DroneState,
    cfg: SimConfig,
    sdk_mode: bool,
    /// lateral, longitudinal, vertical (cm/s), yaw (deg/s).
    rc: [f64; 4],
    task: Option<Task>,
    rng: ChaCha8Rng,
}

impl Drone {
    pub fn new(cfg: SimConfig) -> Self {
        Drone {
            state: DroneState::default(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            sdk_mode: false,
            rc: [0.0; 4],
            task: None,
        }
    }

    /// A drone already in SDK mode, hovering at `z` with the given pose.
    pub fn hovering(cfg: SimConfig, x: f64, y: f64, z: f64, yaw: f64) -> Self {
        let mut d = Drone::new(cfg);
        d.sdk_mode = true;
        d.state.x = x;
        d.state.y = y;
        d.state.z = z;
        d.state.yaw = yaw;
        d.state.flying = true;
        d
    }

    pub fn state(&self) -> &DroneState {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn is_busy(&self) -> bool {
        self.task.is_some()
    }

    /// Parses and executes one datagram.
    pub fn handle(&mut self, text: &str) -> Reply {
        match parse_command(text) {
            Ok(cmd) => self.execute(cmd),
            Err(e) => {
                log::debug!("rejected {text:?}: {e}");
                Reply::error()
            }
        }
    }

    pub fn execute(&mut self, cmd: TelloCommand) -> Reply {
        if !self.sdk_mode && cmd != TelloCommand::Command {
            return Reply::error();
        }
        match cmd {
            TelloCommand::Command => {
                self.sdk_mode = true;
                Reply::ok()
            }
            TelloCommand::BatteryQuery => Reply::Now(format!("{}", self.state.battery.floor() as i64)),
            TelloCommand::Emergency => {
                self.task = None;
                self.rc = [0.0; 4];
                self.state.velocity = [0.0; 3];
                self.state.yaw_rate = 0.0;
                self.state.flying = false;
                self.state.z = 0.0;
                Reply::ok()
            }
            _ if self.task.is_some() => Reply::error(),
            TelloCommand::Takeoff => {
                if self.state.flying {
                    return Reply::error();
                }
                self.state.flying = true;
                self.rc = [0.0; 4];
                self.task = Some(Task::Climb {
                    target_z: self.cfg.takeoff_height_cm,
                });
                Reply::Deferred
            }
            _ if !self.state.flying => Reply::error(),
            TelloCommand::Land => {
                self.rc = [0.0; 4];
                self.task = Some(Task::Land);
                Reply::Deferred
            }
            TelloCommand::Move { direction, cm } => {
                let body = direction.body_axis();
                let axis = body.iter().position(|v| *v != 0.0).unwrap_or(VERTICAL);
                let sign = body[axis];
                if axis == VERTICAL && self.state.z + sign * (cm as f64) < MIN_ALTITUDE_CM {
                    return Reply::error();
                }
                let (fwd, right) = self.state.heading_vectors();
                let world_dir = match axis {
                    LATERAL => [sign * right[0], sign * right[1], 0.0],
                    LONGITUDINAL => [sign * fwd[0], sign * fwd[1], 0.0],
                    _ => [0.0, 0.0, sign],
                };
                self.rc = [0.0; 4];
                self.task = Some(Task::Translate {
                    axis,
                    sign,
                    start: [self.state.x, self.state.y, self.state.z],
                    world_dir,
                    target: cm as f64,
                });
                Reply::Deferred
            }
            TelloCommand::Rotate { rotation, degrees } => {
                let sign = if rotation == Rotation::Cw { 1.0 } else { -1.0 };
                self.rc = [0.0; 4];
                self.task = Some(Task::Rotate {
                    start_yaw: self.state.yaw,
                    target: sign * degrees as f64,
                });
                Reply::Deferred
            }
            TelloCommand::Rc {
                lateral,
                longitudinal,
                vertical,
                yaw,
            } => {
                self.rc = [lateral as f64, longitudinal as f64, vertical as f64, yaw as f64];
                Reply::ok()
            }
        }
    }

    /// In-process equivalent of an rc command without the integer
    /// quantization of the wire format. Channels are clamped to ±100.
    /// Returns false (and changes nothing) when the drone would answer
    /// "error" to an rc command.
    pub fn command_velocity(&mut self, lateral: f64, longitudinal: f64, vertical: f64, yaw_rate: f64) -> bool {
        if !self.sdk_mode || !self.state.flying || self.task.is_some() {
            return false;
        }
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-100.0, 100.0) };
        self.rc = [c(lateral), c(longitudinal), c(vertical), c(yaw_rate)];
        true
    }

    /// Commanded body velocities and yaw rate for this tick.
    fn command(&self) -> [f64; 4] {
        let profile = |remaining: f64| (PROFILE_GAIN * remaining).clamp(-PROFILE_MAX_SPEED, PROFILE_MAX_SPEED);
        let s = &self.state;
        match self.task {
            None => self.rc,
            Some(Task::Translate {
                axis,
                sign,
                start,
                world_dir,
                target,
            }) => {
                let mut c = [0.0; 4];
                c[axis] = sign * profile(target - self.progress(start, world_dir));
                c
            }
            Some(Task::Rotate { start_yaw, target }) => [0.0, 0.0, 0.0, profile(target - (s.yaw - start_yaw))],
            Some(Task::Climb { target_z }) => [0.0, 0.0, profile(target_z - s.z), 0.0],
            Some(Task::Land) => [0.0, 0.0, profile(-s.z).min(-20.0), 0.0],
        }
    }

    fn progress(&self, start: [f64; 3], dir: [f64; 3]) -> f64 {
        let s = &self.state;
        (s.x - start[0]) * dir[0] + (s.y - start[1]) * dir[1] + (s.z - start[2]) * dir[2]
    }

    fn task_done(&self) -> bool {
        let s = &self.state;
        let settled = |remaining: f64, speed: f64| remaining.abs() < DONE_POSITION_CM && speed.abs() < DONE_SPEED;
        match self.task {
            None => false,
            Some(Task::Translate {
                axis,
                start,
                world_dir,
                target,
                ..
            }) => settled(target - self.progress(start, world_dir), s.velocity[axis]),
            Some(Task::Rotate { start_yaw, target }) => settled(target - (s.yaw - start_yaw), s.yaw_rate),
            Some(Task::Climb { target_z }) => settled(target_z - s.z, s.velocity[VERTICAL]),
            Some(Task::Land) => s.z <= DONE_POSITION_CM,
        }
    }

    /// Advances the simulation by `dt_ms` (expected in 1..=100). Returns the
    /// deferred reply of a maneuver that completed during this tick.
    pub fn tick(&mut self, dt_ms: u32) -> Option<String> {
        self.state.sim_time_ms += dt_ms as u64;
        if !self.state.flying {
            return None;
        }
        let dt = dt_ms as f64 / 1000.0;
        let tau = self.cfg.tau_ms / 1000.0;
        let mut cmd = self.command();
        if self.cfg.velocity_jitter > 0.0 {
            let noise = Normal::new(0.0, self.cfg.velocity_jitter).expect("jitter is finite");
            for c in cmd.iter_mut() {
                *c += noise.sample(&mut self.rng);
            }
        }

        // Exact first-order response to a command held constant over dt.
        let decay = (-dt / tau).exp();
        let step = |v0: f64, c: f64| (c + (v0 - c) * decay, c * dt + (v0 - c) * tau * (1.0 - decay));
        let mut disp = [0.0; 3];
        for axis in 0..3 {
            let (v, d) = step(self.state.velocity[axis], cmd[axis]);
            self.state.velocity[axis] = v;
            disp[axis] = d;
        }
        let (rate, dyaw) = step(self.state.yaw_rate, cmd[3]);
        self.state.yaw_rate = rate;

        let (s, c) = (self.state.yaw + 0.5 * dyaw).to_radians().sin_cos();
        self.state.x += disp[LATERAL] * c + disp[LONGITUDINAL] * s;
        self.state.y += -disp[LATERAL] * s + disp[LONGITUDINAL] * c;
        self.state.z += disp[VERTICAL];
        self.state.yaw += dyaw;
        if self.state.z < 0.0 {
            self.state.z = 0.0;
            self.state.velocity[VERTICAL] = self.state.velocity[VERTICAL].max(0.0);
        }

        self.state.flight_time_ms += dt_ms as u64;
        self.state.battery = (self.state.battery - self.cfg.battery_drain * dt).max(0.0);

        if !self.task_done() {
            return None;
        }
        if self.task == Some(Task::Land) {
            self.state.z = 0.0;
            self.state.velocity = [0.0; 3];
            self.state.yaw_rate = 0.0;
            self.state.flying = false;
        }
        self.task = None;
        Some("ok".into())
    }

    /// Ticks in steps of at most `max_step_ms` until `duration_ms` elapsed,
    /// collecting deferred replies.
    pub fn advance(&mut self, duration_ms: u64, max_step_ms: u32) -> Vec<String> {
        let mut replies = Vec::new();
        let mut left = duration_ms;
        while left > 0 {
            let dt = left.min(max_step_ms as u64) as u32;
            replies.extend(self.tick(dt));
            left -= dt as u64;
        }
        replies
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ready() -> Drone {
        let mut d = Drone::hovering(SimConfig::default(), 0.0, 0.0, 100.0, 0.0);
        d.cfg.battery_drain = 0.0;
        d
    }

    fn run_until_reply(d: &mut Drone, max_ms: u64) -> u64 {
        let start = d.state.sim_time_ms;
        while d.state.sim_time_ms - start < max_ms {
            if d.tick(10).is_some() {
                return d.state.sim_time_ms - start;
            }
        }
        panic!("maneuver did not finish within {max_ms} ms");
    }

    #[test]
    fn velocity_reaches_command() {
        let mut d = ready();
        d.execute(TelloCommand::Rc {
            lateral: 0,
            longitudinal: 0,
            vertical: 50,
            yaw: 0,
        });
        d.advance(5000, 20);
        assert!((d.state.velocity[VERTICAL] - 50.0).abs() < 1e-3);
    }

    #[test]
    fn step_response_matches_closed_form() {
        for step in [1, 7, 50, 100] {
            let mut d = ready();
            d.handle("rc 0 0 50 0");
            d.advance(2000, step);
            let expected = 50.0 * (2.0 - 0.3 * (1.0 - (-2.0f64 / 0.3).exp()));
            assert!((d.state.z - 100.0 - expected).abs() < 1e-9, "step {step}: {}", d.state.z);
        }
    }

    #[test]
    fn zero_command_is_equilibrium() {
        let mut d = ready();
        let before = d.state;
        d.advance(3000, 10);
        assert_eq!((d.state.x, d.state.y, d.state.z, d.state.yaw), (before.x, before.y, before.z, before.yaw));
        assert_eq!(d.state.velocity, [0.0; 3]);
        assert_eq!(d.state.sim_time_ms, 3000);
    }

    #[test]
    fn relative_up_lands_within_a_centimeter() {
        let mut d = ready();
        assert_eq!(d.handle("up 50"), Reply::Deferred);
        run_until_reply(&mut d, 10_000);
        assert!((d.state.z - 150.0).abs() <= 1.0, "{}", d.state.z);
        d.advance(2000, 10);
        assert!((d.state.z - 150.0).abs() <= 1.0, "{}", d.state.z);
    }

    #[test]
    fn relative_moves_follow_heading() {
        let mut d = Drone::hovering(SimConfig::default(), 0.0, 0.0, 100.0, 90.0);
        d.handle("forward 100");
        run_until_reply(&mut d, 20_000);
        d.advance(2000, 10);
        // Facing east.
        assert!((d.state.x - 100.0).abs() <= 1.0 && d.state.y.abs() < 1e-6);
        d.handle("left 40");
        run_until_reply(&mut d, 20_000);
        d.advance(2000, 10);
        assert!((d.state.y - 40.0).abs() <= 1.0, "{:?}", d.state);
    }

    #[test]
    fn rotation() {
        let mut d = ready();
        d.handle("ccw 90");
        run_until_reply(&mut d, 10_000);
        d.advance(2000, 10);
        assert!((wrap_degrees(d.state.yaw) + 90.0).abs() <= 1.0);
    }

    #[test]
    fn protocol_rules() {
        let mut d = Drone::new(SimConfig::default());
        assert_eq!(d.handle("takeoff"), Reply::error());
        assert_eq!(d.handle("command"), Reply::ok());
        assert_eq!(d.handle("up 50"), Reply::error(), "not flying");
        assert_eq!(d.handle("takeoff"), Reply::Deferred);
        assert_eq!(d.handle("up 50"), Reply::error(), "busy");
        run_until_reply(&mut d, 10_000);
        assert!((d.state.z - 80.0).abs() <= 1.0);
        assert_eq!(d.handle("battery?"), Reply::Now("99".into()));
        assert_eq!(d.handle("down 75"), Reply::error(), "below floor");
        assert_eq!(d.handle("flip f"), Reply::error());
        assert_eq!(d.handle("land"), Reply::Deferred);
        run_until_reply(&mut d, 10_000);
        assert!(!d.state.flying);
        assert_eq!(d.state.z, 0.0);
        assert_eq!(d.handle("land"), Reply::error());
    }

    #[test]
    fn emergency_stops_everything() {
        let mut d = ready();
        d.handle("rc 50 50 50 50");
        d.advance(1000, 10);
        assert_eq!(d.handle("emergency"), Reply::ok());
        assert_eq!(d.state.velocity, [0.0; 3]);
        assert!(!d.state.flying);
        let z = d.state.z;
        d.advance(1000, 10);
        assert_eq!(d.state.z, z);
        assert!(d.state.z >= 0.0);
    }

    #[test]
    fn ground_clamp() {
        let mut d = ready();
        d.handle("rc 0 0 -100 0");
        d.advance(5000, 10);
        assert_eq!(d.state.z, 0.0);
    }

    #[test]
    fn battery_drains_while_flying() {
        let mut d = Drone::hovering(SimConfig::default(), 0.0, 0.0, 100.0, 0.0);
        d.advance(10_000, 100);
        assert!((d.state.battery - 99.0).abs() < 1e-9);
        assert_eq!(d.state.flight_time_ms, 10_000);
    }

    #[test]
    fn telemetry_fields() {
        let mut s = DroneState {
            z: 120.0,
            battery: 87.0,
            yaw: 90.0,
            ..DroneState::default()
        };
        let t = telemetry(&s);
        assert!(t.contains("h:120;") && t.contains("bat:87;") && t.contains("yaw:90;"));
        assert!(t.ends_with(";\r\n"));
        s.yaw = 450.0;
        s.velocity = [1.4, -20.6, 3.0];
        s.flight_time_ms = 12_999;
        assert_eq!(
            telemetry(&s),
            "pitch:0;roll:0;yaw:90;vgx:-21;vgy:1;vgz:3;h:120;bat:87;time:12;\r\n"
        );
    }

    #[test]
    fn replay_is_bit_identical() {
        let script = ["command", "takeoff", "", "up 50", "", "cw 45", "", "rc 10 -20 5 30", "", "land"];
        let run = || {
            let mut d = Drone::new(SimConfig {
                velocity_jitter: 2.0,
                seed: 9,
                ..SimConfig::default()
            });
            let mut trace = Vec::new();
            for cmd in script {
                if !cmd.is_empty() {
                    d.handle(cmd);
                }
                for _ in 0..300 {
                    d.tick(10);
                    trace.push(d.state);
                }
            }
            trace
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.x.to_bits() == y.x.to_bits()
            && x.y.to_bits() == y.y.to_bits()
            && x.z.to_bits() == y.z.to_bits()
            && x.yaw.to_bits() == y.yaw.to_bits()));
    }
}
