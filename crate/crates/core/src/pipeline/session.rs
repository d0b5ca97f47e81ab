//! Deterministic single-threaded run of the whole pipeline on a virtual
//! clock.

use std::io::Write;
use std::sync::Arc;

use super::nodes::{ControlNode, Monitor, PerceptionNode, SimNode, Snapshot};
use super::record::Recorder;
use super::{SIM_TICK_MS, STATUS_PERIOD_MS};
use crate::bus::{Bus, Message, Topic};
use crate::config::Config;
use crate::control::{ControlMode, Key};
use crate::distance::DistanceModel;
use crate::error::Result;
use crate::sim::{Drone, DroneState};
use crate::skeleton::SkeletonFrame;

/// Per step at virtual time `t`: perception drains its inbox, the control
/// node ticks on its period, the simulator executes commands and advances
/// one tick, and telemetry goes out on its period.
pub struct VirtualSession {
    bus: Bus,
    now_ms: u64,
    control_tick_ms: u64,
    perception: PerceptionNode,
    control: ControlNode,
    sim: SimNode,
    monitor: Monitor,
    recorder: Option<Recorder<Box<dyn Write>>>,
}

impl VirtualSession {
    pub fn new(cfg: &Config, model: Option<DistanceModel>) -> Result<Self> {
        VirtualSession::with_drone(cfg, model, Drone::new(cfg.sim()))
    }

    pub fn with_drone(cfg: &Config, model: Option<DistanceModel>, drone: Drone) -> Result<Self> {
        cfg.validate()?;
        let bus = Bus::with_all_topics(cfg.bus.queue_cap);
        let ctl = cfg.controller();
        Ok(VirtualSession {
            perception: PerceptionNode::new(&bus, cfg, model.map(Arc::new))?,
            control: ControlNode::new(&bus, ctl, cfg.bus.queue_cap)?,
            sim: SimNode::new(&bus, drone, cfg.bus.queue_cap)?,
            monitor: Monitor::new(&bus)?,
            control_tick_ms: ctl.tick_ms,
            recorder: None,
            now_ms: 0,
            bus,
        })
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn drone_state(&self) -> &DroneState {
        self.sim.state()
    }

    pub fn mode(&self) -> ControlMode {
        self.control.mode()
    }

    pub fn control(&self) -> &ControlNode {
        &self.control
    }

    pub fn perception(&self) -> &PerceptionNode {
        &self.perception
    }

    pub fn snapshot(&mut self) -> Snapshot {
        let mut s = self.monitor.pump().clone();
        s.mode = self.control.mode();
        s.drone = *self.sim.state();
        s.timestamp_ms = self.now_ms;
        s
    }

    /// Starts writing `topics` to `out` as a session log.
    pub fn record(&mut self, out: Box<dyn Write>, topics: &[Topic]) -> Result<()> {
        self.recorder = Some(Recorder::new(out, &self.bus, topics)?);
        Ok(())
    }

    /// Flushes and detaches the recorder.
    pub fn finish_recording(&mut self) -> Result<()> {
        if let Some(r) = self.recorder.take() {
            r.close()?;
        }
        Ok(())
    }

    pub fn key(&mut self, key: Key) -> Result<()> {
        self.control.pump();
        self.control.key(key, self.now_ms)
    }

    /// Publishes the people of one scene; they must share a timestamp.
    pub fn publish_scene(&mut self, frames: Vec<SkeletonFrame>) -> Result<()> {
        let batch = frames.into_iter().map(|f| (f.timestamp_ms, Message::Skeleton(f))).collect();
        self.bus.publish_all(Topic::Skeleton, batch)?;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        let t = self.now_ms;
        self.perception.step()?;
        if t.is_multiple_of(self.control_tick_ms) {
            self.control.tick(t)?;
        }
        self.sim.step(SIM_TICK_MS);
        self.now_ms += SIM_TICK_MS;
        if self.now_ms.is_multiple_of(STATUS_PERIOD_MS) {
            self.sim.publish_status(self.now_ms)?;
        }
        if let Some(r) = &mut self.recorder {
            r.pump()?;
        }
        Ok(())
    }

    /// Steps until the clock reaches `t_ms`.
    pub fn advance_to(&mut self, t_ms: u64) -> Result<()> {
        while self.now_ms < t_ms {
            self.step()?;
        }
        Ok(())
    }

    pub fn run_for(&mut self, duration_ms: u64) -> Result<()> {
        self.advance_to(self.now_ms + duration_ms)
    }

    /// Feeds a recorded stream at its own timestamps, then steps once more
    /// so the last scene is processed.
    pub fn run_frames(&mut self, frames: impl IntoIterator<Item = SkeletonFrame>) -> Result<()> {
        let mut scene: Vec<SkeletonFrame> = Vec::new();
        for f in frames {
            if scene.first().is_some_and(|s| s.timestamp_ms != f.timestamp_ms) {
                self.feed(std::mem::take(&mut scene))?;
            }
            scene.push(f);
        }
        if !scene.is_empty() {
            self.feed(scene)?;
        }
        self.step()
    }

    fn feed(&mut self, scene: Vec<SkeletonFrame>) -> Result<()> {
        self.advance_to(scene[0].timestamp_ms)?;
        self.publish_scene(scene)
    }

    /// Closed loop with a camera on the drone: every `frame_period_ms` the
    /// scene is rendered from the current drone state and published.
    pub fn drive(
        &mut self,
        duration_ms: u64,
        frame_period_ms: u64,
        mut render: impl FnMut(u64, &DroneState) -> Vec<SkeletonFrame>,
    ) -> Result<()> {
        let end = self.now_ms + duration_ms;
        let mut next_frame = self.now_ms;
        while self.now_ms < end {
            if self.now_ms >= next_frame {
                let frames = render(self.now_ms, self.sim.state());
                if !frames.is_empty() {
                    self.publish_scene(frames)?;
                }
                next_frame += frame_period_ms;
            }
            self.step()?;
        }
        Ok(())
    }
}
