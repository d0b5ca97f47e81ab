//! TOML configuration. Every key is optional; see `pose2flight.example.toml`
//! at the repository root for the full list with defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bus::DEFAULT_QUEUE_CAP;
use crate::control::{ControllerConfig, FaceTrackingGains, PidGains};
use crate::error::{Error, Result};
use crate::gesture::GestureConfig;
use crate::sim::udp::{DEFAULT_COMMAND_PORT, DEFAULT_TELEMETRY_PORT};
use crate::sim::SimConfig;
use crate::stability::StabilityConfig;
use crate::view::ViewConfig;

/// Environment variable naming the config file.
pub const CONFIG_ENV: &str = "POSE2FLIGHT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GesturesSection {
    pub gamma: f64,
    pub beta: f64,
    pub n_frames: u32,
    pub cooldown_ms: u64,
}

impl Default for GesturesSection {
    fn default() -> Self {
        GesturesSection {
            gamma: ViewConfig::default().gamma,
            beta: GestureConfig::default().beta,
            n_frames: StabilityConfig::default().n_frames,
            cooldown_ms: StabilityConfig::default().cooldown_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceSection {
    pub model_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidSection {
    pub yaw: PidGains,
    pub vertical: PidGains,
    pub longitudinal: PidGains,
    /// Used by the altitude-hold tuning harness.
    pub altitude: PidGains,
    pub target_distance_cm: f64,
    pub tick_ms: u64,
}

/// Altitude gains found with the trial-and-error recipe on the simulator.
pub const TUNED_ALTITUDE_GAINS: PidGains = PidGains::new(3.0, 0.08, 0.5);

impl Default for PidSection {
    fn default() -> Self {
        let face = FaceTrackingGains::default();
        let ctl = ControllerConfig::default();
        PidSection {
            yaw: face.yaw,
            vertical: face.vertical,
            longitudinal: face.longitudinal,
            altitude: TUNED_ALTITUDE_GAINS,
            target_distance_cm: ctl.target_distance_cm,
            tick_ms: ctl.tick_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub port: u16,
    pub telemetry_port: u16,
    pub tau_ms: f64,
    pub takeoff_height_cm: f64,
    pub battery_drain: f64,
    pub velocity_jitter: f64,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        SimSection {
            port: DEFAULT_COMMAND_PORT,
            telemetry_port: DEFAULT_TELEMETRY_PORT,
            tau_ms: s.tau_ms,
            takeoff_height_cm: s.takeoff_height_cm,
            battery_drain: s.battery_drain,
            velocity_jitter: s.velocity_jitter,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusSection {
    pub queue_cap: usize,
}

impl Default for BusSection {
    fn default() -> Self {
        BusSection {
            queue_cap: DEFAULT_QUEUE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeSection {
    pub port: u16,
    /// Directory served over plain HTTP; the console build goes here.
    pub static_dir: Option<PathBuf>,
    pub snapshot_hz: f64,
}

impl Default for BridgeSection {
    fn default() -> Self {
        BridgeSection {
            port: 8765,
            static_dir: None,
            snapshot_hz: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Registered user in multi-person scenes; unset means the first
    /// person of each frame.
    pub user_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gestures: GesturesSection,
    pub distance: DistanceSection,
    pub pid: PidSection,
    pub sim: SimSection,
    pub bus: BusSection,
    pub bridge: BridgeSection,
    pub pipeline: PipelineSection,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Reads `explicit`, else the file named by `POSE2FLIGHT_CONFIG`, else
    /// returns the defaults. Relative paths inside the file are resolved
    /// against the file's directory.
    pub fn load(explicit: Option<&Path>) -> Result<Config> {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Config::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.distance.model_path, &mut cfg.bridge.static_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ViewConfig::new(self.gestures.gamma)?;
        StabilityConfig::new(self.gestures.n_frames, self.gestures.cooldown_ms)?;
        if !(self.gestures.beta.is_finite() && self.gestures.beta >= 0.0) {
            return Err(Error::Config("gestures.beta must be >= 0".into()));
        }
        for g in [&self.pid.yaw, &self.pid.vertical, &self.pid.longitudinal, &self.pid.altitude] {
            g.validate()?;
        }
        if self.pid.tick_ms == 0 {
            return Err(Error::Config("pid.tick_ms must be > 0".into()));
        }
        if self.bus.queue_cap == 0 {
            return Err(Error::Config("bus.queue_cap must be >= 1".into()));
        }
        if !(self.sim.tau_ms > 0.0) {
            return Err(Error::Config("sim.tau_ms must be > 0".into()));
        }
        if !(self.bridge.snapshot_hz > 0.0) {
            return Err(Error::Config("bridge.snapshot_hz must be > 0".into()));
        }
        Ok(())
    }

    pub fn view(&self) -> ViewConfig {
        ViewConfig {
            gamma: self.gestures.gamma,
        }
    }

    pub fn gesture(&self) -> GestureConfig {
        GestureConfig {
            beta: self.gestures.beta,
        }
    }

    pub fn stability(&self) -> StabilityConfig {
        StabilityConfig {
            n_frames: self.gestures.n_frames,
            cooldown_ms: self.gestures.cooldown_ms,
        }
    }

    pub fn controller(&self) -> ControllerConfig {
        ControllerConfig {
            tick_ms: self.pid.tick_ms,
            target_distance_cm: self.pid.target_distance_cm,
            face_gains: FaceTrackingGains {
                yaw: self.pid.yaw,
                vertical: self.pid.vertical,
                longitudinal: self.pid.longitudinal,
            },
            ..ControllerConfig::default()
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            tau_ms: self.sim.tau_ms,
            takeoff_height_cm: self.sim.takeoff_height_cm,
            battery_drain: self.sim.battery_drain,
            velocity_jitter: self.sim.velocity_jitter,
            seed: self.sim.seed,
        }
    }
}
