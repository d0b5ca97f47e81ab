//! Pipeline nodes. Each owns a private inbox and talks to the others only
//! through the bus.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bus::{Bus, DroneStatus, Envelope, FaceMsg, Message, Subscription, Topic, ViewMsg};
use crate::config::Config;
use crate::control::{ControlMode, ControlOutput, ControllerConfig, FlightController, Key};
use crate::distance::{build_features, DistanceEstimate, DistanceModel};
use crate::error::Result;
use crate::gesture::{recognize, GestureConfig};
use crate::head::{head_bbox, select_user, Candidate, FirstMatcher, FixedIdMatcher, IdentityMatcher, TrackState};
use crate::sim::{Drone, DroneState, Reply, TelloCommand};
use crate::skeleton::SkeletonFrame;
use crate::stability::{GestureEvent, StabilityFilter};
use crate::view::{classify_view, ViewClass, ViewConfig};

/// Skeleton in; view, gesture, face box and distance out.
pub struct PerceptionNode {
    bus: Bus,
    inbox: Subscription,
    view_cfg: ViewConfig,
    gesture_cfg: GestureConfig,
    stability: StabilityFilter,
    model: Option<Arc<DistanceModel>>,
    user_id: Option<u32>,
    track: TrackState,
    scenes: u64,
}

impl PerceptionNode {
    pub fn new(bus: &Bus, cfg: &Config, model: Option<Arc<DistanceModel>>) -> Result<Self> {
        Ok(PerceptionNode {
            bus: bus.clone(),
            inbox: bus.subscribe_with_cap(&[Topic::Skeleton], cfg.bus.queue_cap)?,
            view_cfg: cfg.view(),
            gesture_cfg: cfg.gesture(),
            stability: StabilityFilter::new(cfg.stability()),
            model,
            user_id: cfg.pipeline.user_id,
            track: TrackState::default(),
            scenes: 0,
        })
    }

    /// Scenes (timestamps) processed so far.
    pub fn scenes(&self) -> u64 {
        self.scenes
    }

    /// Frames dropped from the inbox because this node lagged.
    pub fn dropped(&self) -> u64 {
        self.inbox.evicted()
    }

    pub fn step(&mut self) -> Result<usize> {
        let batch = self.inbox.drain();
        self.process(batch)
    }

    pub fn step_timeout(&mut self, timeout: std::time::Duration) -> Result<usize> {
        let batch = self.inbox.drain_timeout(timeout);
        self.process(batch)
    }

    fn process(&mut self, batch: Vec<Envelope>) -> Result<usize> {
        let frames: Vec<SkeletonFrame> = batch
            .into_iter()
            .filter_map(|e| match e.message {
                Message::Skeleton(f) => Some(f),
                _ => None,
            })
            .collect();
        let mut n = 0;
        // Frames sharing a timestamp are the people of one scene.
        for scene in frames.chunk_by(|a, b| a.timestamp_ms == b.timestamp_ms) {
            self.process_scene(scene)?;
            n += 1;
        }
        Ok(n)
    }

    fn process_scene(&mut self, scene: &[SkeletonFrame]) -> Result<()> {
        self.scenes += 1;
        let t = scene[0].timestamp_ms;
        let user = if scene.len() == 1 && self.user_id.is_none() {
            Some(&scene[0])
        } else {
            let candidates: Vec<Candidate> = scene
                .iter()
                .filter_map(|f| {
                    head_bbox(f).ok().map(|bbox| Candidate {
                        person_id: f.person_id,
                        bbox,
                    })
                })
                .collect();
            let matcher: &dyn IdentityMatcher = match self.user_id {
                Some(id) => &FixedIdMatcher(id),
                None => &FirstMatcher,
            };
            select_user(&candidates, matcher, &mut self.track, t).and_then(|id| scene.iter().find(|f| f.person_id == id))
        };
        let Some(frame) = user else {
            self.stabilize(None, t)?;
            return Ok(());
        };

        let view = classify_view(frame, &self.view_cfg);
        self.bus.publish(
            Topic::View,
            t,
            Message::View(ViewMsg {
                person_id: frame.person_id,
                view,
            }),
        )?;
        self.stabilize(recognize(frame, view, &self.gesture_cfg), t)?;

        let Ok(bbox) = head_bbox(frame) else {
            return Ok(());
        };
        self.bus.publish(
            Topic::FaceBbox,
            t,
            Message::FaceBbox(FaceMsg {
                person_id: frame.person_id,
                bbox,
                image_width: frame.image_width,
                image_height: frame.image_height,
            }),
        )?;
        if let Some(model) = &self.model {
            match build_features(&bbox, frame, view).and_then(|f| model.estimate(&f)) {
                Ok(est) => {
                    self.bus.publish(Topic::Distance, t, Message::Distance(est))?;
                }
                Err(e) => log::debug!("no distance at {t} ms: {e}"),
            }
        }
        Ok(())
    }

    fn stabilize(&mut self, gesture: Option<crate::gesture::Gesture>, t: u64) -> Result<()> {
        match self.stability.step(gesture, t) {
            Ok(Some(ev)) => {
                self.bus.publish(Topic::Gesture, t, Message::Gesture(ev))?;
            }
            Ok(None) => {}
            Err(e) => log::warn!("frame skipped: {e}"),
        }
        Ok(())
    }
}

/// Perception and telemetry in; drone commands out.
pub struct ControlNode {
    bus: Bus,
    inbox: Subscription,
    controller: FlightController,
    snapshots: u64,
}

impl ControlNode {
    pub fn new(bus: &Bus, cfg: ControllerConfig, queue_cap: usize) -> Result<Self> {
        Ok(ControlNode {
            bus: bus.clone(),
            inbox: bus.subscribe_with_cap(&[Topic::Gesture, Topic::FaceBbox, Topic::Distance, Topic::DroneState], queue_cap)?,
            controller: FlightController::new(cfg),
            snapshots: 0,
        })
    }

    pub fn mode(&self) -> ControlMode {
        self.controller.mode()
    }

    pub fn controller(&self) -> &FlightController {
        &self.controller
    }

    /// Photos requested by the cheese gesture so far.
    pub fn snapshots(&self) -> u64 {
        self.snapshots
    }

    pub fn pump(&mut self) {
        for env in self.inbox.drain() {
            let t = env.timestamp_ms;
            match env.message {
                Message::Gesture(ev) => self.controller.on_gesture(ev),
                Message::FaceBbox(m) => self.controller.on_face(m.bbox.center(), (m.image_width, m.image_height), t),
                Message::Distance(d) => self.controller.on_distance(d.continuous_cm, t),
                Message::DroneState(s) => {
                    self.controller.on_drone_state(s.state);
                    for r in &s.replies {
                        self.controller.on_reply(r);
                    }
                }
                _ => {}
            }
        }
    }

    pub fn key(&mut self, key: Key, now_ms: u64) -> Result<()> {
        let out = self.controller.on_key(key, now_ms);
        self.emit(out, now_ms)
    }

    pub fn tick(&mut self, now_ms: u64) -> Result<()> {
        self.pump();
        let out = self.controller.tick(now_ms)?;
        self.emit(out, now_ms)
    }

    fn emit(&mut self, out: Vec<ControlOutput>, now_ms: u64) -> Result<()> {
        for o in out {
            match o {
                ControlOutput::Command(cmd) => {
                    self.bus.publish(Topic::Cmd, now_ms, Message::Cmd(cmd))?;
                }
                ControlOutput::Snapshot => {
                    self.snapshots += 1;
                    log::info!("snapshot #{} at {now_ms} ms", self.snapshots);
                }
            }
        }
        Ok(())
    }
}

/// Commands in; telemetry out. Wraps the simulated drone.
pub struct SimNode {
    bus: Bus,
    inbox: Subscription,
    drone: Drone,
    replies: Vec<String>,
}

impl SimNode {
    /// The link handshake puts the drone in SDK mode.
    pub fn new(bus: &Bus, mut drone: Drone, queue_cap: usize) -> Result<Self> {
        drone.execute(TelloCommand::Command);
        Ok(SimNode {
            bus: bus.clone(),
            inbox: bus.subscribe_with_cap(&[Topic::Cmd], queue_cap)?,
            drone,
            replies: Vec::new(),
        })
    }

    pub fn drone(&self) -> &Drone {
        &self.drone
    }

    pub fn state(&self) -> &DroneState {
        self.drone.state()
    }

    /// Executes pending commands. rc gets no reply, as on the real link.
    pub fn execute_pending(&mut self) {
        for env in self.inbox.drain() {
            if let Message::Cmd(cmd) = env.message {
                let reply = self.drone.execute(cmd);
                if let (Reply::Now(r), false) = (reply, matches!(cmd, TelloCommand::Rc { .. })) {
                    self.replies.push(r);
                }
            }
        }
    }

    /// Executes pending commands, then advances the plant `dt_ms`.
    pub fn step(&mut self, dt_ms: u64) {
        self.execute_pending();
        self.replies.extend(self.drone.advance(dt_ms, 10));
    }

    pub fn publish_status(&mut self, now_ms: u64) -> Result<()> {
        let status = DroneStatus {
            state: *self.drone.state(),
            replies: std::mem::take(&mut self.replies),
        };
        self.bus.publish(Topic::DroneState, now_ms, Message::DroneState(status))?;
        Ok(())
    }
}

/// Latest pipeline outputs, as shown on the operator console.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Snapshot {
    pub timestamp_ms: u64,
    pub drone: DroneState,
    pub view: Option<ViewClass>,
    pub gesture: Option<GestureEvent>,
    pub distance: Option<DistanceEstimate>,
    pub face: Option<FaceMsg>,
    pub mode: ControlMode,
}

/// Folds the output topics into a [`Snapshot`].
pub struct Monitor {
    inbox: Subscription,
    snapshot: Snapshot,
}

impl Monitor {
    pub fn new(bus: &Bus) -> Result<Self> {
        Ok(Monitor {
            inbox: bus.subscribe_with_cap(
                &[Topic::View, Topic::Gesture, Topic::FaceBbox, Topic::Distance, Topic::DroneState],
                crate::pipeline::record::RECORDER_CAP,
            )?,
            snapshot: Snapshot::default(),
        })
    }

    pub fn pump(&mut self) -> &Snapshot {
        for env in self.inbox.drain() {
            self.apply(env);
        }
        &self.snapshot
    }

    pub fn pump_timeout(&mut self, timeout: std::time::Duration) -> &Snapshot {
        for env in self.inbox.drain_timeout(timeout) {
            self.apply(env);
        }
        &self.snapshot
    }

    pub fn snapshot_mut(&mut self) -> &mut Snapshot {
        &mut self.snapshot
    }

    fn apply(&mut self, env: Envelope) {
        let s = &mut self.snapshot;
        s.timestamp_ms = s.timestamp_ms.max(env.timestamp_ms);
        match env.message {
            Message::View(v) => s.view = Some(v.view),
            Message::Gesture(g) => s.gesture = Some(g),
            Message::FaceBbox(f) => s.face = Some(f),
            Message::Distance(d) => s.distance = Some(d),
            Message::DroneState(d) => s.drone = d.state,
            _ => {}
        }
    }
}
