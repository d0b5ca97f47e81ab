//! Wall-clock pipeline: one thread per node, frames restamped on arrival.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::nodes::{ControlNode, Monitor, PerceptionNode, SimNode, Snapshot};
use super::{SIM_TICK_MS, STATUS_PERIOD_MS};
use crate::bus::{Bus, Message, Topic};
use crate::config::Config;
use crate::control::Key;
use crate::distance::DistanceModel;
use crate::error::{Error, Result};
use crate::sim::{Drone, DroneState};
use crate::skeleton::SkeletonFrame;

const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Default)]
pub struct Stats {
    /// Scenes published on /skeleton.
    pub scenes_in: AtomicU64,
    /// Scenes fully processed by perception.
    pub scenes_processed: AtomicU64,
    /// Frames evicted from the perception inbox.
    pub dropped: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayReport {
    pub scenes: u64,
    pub elapsed: Duration,
}

impl ReplayReport {
    pub fn fps(&self) -> f64 {
        self.scenes as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

#[derive(Clone)]
struct Clock(Instant);

impl Clock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

pub struct LivePipeline {
    bus: Bus,
    clock: Clock,
    last_stamp: Mutex<Option<u64>>,
    keys: Option<mpsc::Sender<Key>>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    snapshot: Arc<Mutex<Snapshot>>,
    stats: Arc<Stats>,
}

impl LivePipeline {
    pub fn start(cfg: &Config, model: Option<DistanceModel>) -> Result<Self> {
        LivePipeline::start_with_drone(cfg, model, Drone::new(cfg.sim()))
    }

    pub fn start_with_drone(cfg: &Config, model: Option<DistanceModel>, drone: Drone) -> Result<Self> {
        cfg.validate()?;
        let bus = Bus::with_all_topics(cfg.bus.queue_cap);
        let clock = Clock(Instant::now());
        let stop = Arc::new(AtomicBool::new(false));
        let stats = Arc::new(Stats::default());
        let snapshot = Arc::new(Mutex::new(Snapshot::default()));
        let ctl_cfg = cfg.controller();

        // Subscribe everything before the first publish.
        let mut perception = PerceptionNode::new(&bus, cfg, model.map(Arc::new))?;
        let mut control = ControlNode::new(&bus, ctl_cfg, cfg.bus.queue_cap)?;
        let mut sim = SimNode::new(&bus, drone, cfg.bus.queue_cap)?;
        let mut monitor = Monitor::new(&bus)?;
        let (key_tx, key_rx) = mpsc::channel::<Key>();
        let mut threads = Vec::new();

        threads.push(spawn("perception", &stop, {
            let stats = stats.clone();
            let stop = stop.clone();
            move || {
                while !stop.load(Ordering::Relaxed) {
                    perception.step_timeout(POLL)?;
                    stats.scenes_processed.store(perception.scenes(), Ordering::Release);
                    stats.dropped.store(perception.dropped(), Ordering::Relaxed);
                }
                Ok(())
            }
        })?);

        threads.push(spawn("control", &stop, {
            let (stop, clock, snapshot) = (stop.clone(), clock.clone(), snapshot.clone());
            let tick = Duration::from_millis(ctl_cfg.tick_ms);
            move || {
                let mut next = Instant::now();
                while !stop.load(Ordering::Relaxed) {
                    match key_rx.recv_timeout(next.saturating_duration_since(Instant::now())) {
                        Ok(key) => {
                            control.pump();
                            control.key(key, clock.now_ms())?;
                        }
                        Err(RecvTimeoutError::Timeout) => {
                            control.tick(clock.now_ms())?;
                            next += tick;
                        }
                        Err(RecvTimeoutError::Disconnected) => break,
                    }
                    lock(&snapshot).mode = control.mode();
                }
                Ok(())
            }
        })?);

        threads.push(spawn("sim", &stop, {
            let (stop, clock) = (stop.clone(), clock.clone());
            move || {
                let mut sim_ms = clock.now_ms();
                let mut next_status = sim_ms + STATUS_PERIOD_MS;
                while !stop.load(Ordering::Relaxed) {
                    let now = clock.now_ms();
                    if now > sim_ms {
                        sim.step(now - sim_ms);
                        sim_ms = now;
                    } else {
                        sim.execute_pending();
                    }
                    if sim_ms >= next_status {
                        sim.publish_status(sim_ms)?;
                        next_status += STATUS_PERIOD_MS;
                    }
                    thread::sleep(Duration::from_millis(SIM_TICK_MS));
                }
                Ok(())
            }
        })?);

        threads.push(spawn("monitor", &stop, {
            let (stop, snapshot) = (stop.clone(), snapshot.clone());
            move || {
                while !stop.load(Ordering::Relaxed) {
                    let s = monitor.pump_timeout(POLL * 4).clone();
                    let mut shared = lock(&snapshot);
                    let mode = shared.mode;
                    *shared = s;
                    shared.mode = mode;
                }
                Ok(())
            }
        })?);

        Ok(LivePipeline {
            bus,
            clock,
            last_stamp: Mutex::new(None),
            keys: Some(key_tx),
            stop,
            threads,
            snapshot,
            stats,
        })
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn is_running(&self) -> bool {
        !self.stop.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> Snapshot {
        lock(&self.snapshot).clone()
    }

    pub fn drone_state(&self) -> DroneState {
        self.snapshot().drone
    }

    pub fn send_key(&self, key: Key) -> Result<()> {
        self.keys
            .as_ref()
            .and_then(|k| k.send(key).ok())
            .ok_or_else(|| Error::Io(std::io::Error::other("control node stopped")))
    }

    /// Publishes one scene, restamped with the pipeline clock. Returns the
    /// stamp used; stamps strictly increase.
    pub fn publish_scene(&self, frames: Vec<SkeletonFrame>) -> Result<u64> {
        let stamp = {
            let mut last = lock(&self.last_stamp);
            let now = self.clock.now_ms();
            let s = match *last {
                Some(l) if now <= l => l + 1,
                _ => now,
            };
            *last = Some(s);
            s
        };
        let batch = frames
            .into_iter()
            .map(|mut f| {
                f.timestamp_ms = stamp;
                (stamp, Message::Skeleton(f))
            })
            .collect();
        self.bus.publish_all(Topic::Skeleton, batch)?;
        self.stats.scenes_in.fetch_add(1, Ordering::Relaxed);
        Ok(stamp)
    }

    /// Streams frames paced at `fps`; consecutive frames with equal
    /// timestamps form one scene. Halts at the first bad frame.
    pub fn replay(&self, frames: impl IntoIterator<Item = Result<SkeletonFrame>>, fps: f64) -> Result<ReplayReport> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::OutOfRange(format!("fps must be > 0, got {fps}")));
        }
        let period = Duration::from_secs_f64(1.0 / fps);
        let start = Instant::now();
        let mut scenes = 0u64;
        let mut scene: Vec<SkeletonFrame> = Vec::new();
        let flush = |scene: Vec<SkeletonFrame>, scenes: &mut u64| -> Result<()> {
            let due = start + period * (*scenes as u32);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
            self.publish_scene(scene)?;
            *scenes += 1;
            Ok(())
        };
        for f in frames {
            let f = match f {
                Ok(f) => f,
                Err(e) => {
                    // Everything read before the bad line still goes out.
                    if !scene.is_empty() {
                        flush(scene, &mut scenes)?;
                    }
                    return Err(e);
                }
            };
            if scene.first().is_some_and(|s| s.timestamp_ms != f.timestamp_ms) {
                flush(std::mem::take(&mut scene), &mut scenes)?;
            }
            scene.push(f);
        }
        if !scene.is_empty() {
            flush(scene, &mut scenes)?;
        }
        Ok(ReplayReport {
            scenes,
            elapsed: start.elapsed(),
        })
    }

    /// Waits until perception has caught up with everything published.
    pub fn wait_processed(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        loop {
            let done = self.stats.scenes_processed.load(Ordering::Acquire) + self.stats.dropped.load(Ordering::Relaxed);
            if done >= self.stats.scenes_in.load(Ordering::Relaxed) {
                return true;
            }
            if Instant::now() >= deadline {
                return false;
            }
            thread::sleep(Duration::from_millis(1));
        }
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        self.keys = None;
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for LivePipeline {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn spawn(name: &str, stop: &Arc<AtomicBool>, body: impl FnOnce() -> Result<()> + Send + 'static) -> Result<JoinHandle<()>> {
    let stop = stop.clone();
    let label = name.to_string();
    Ok(thread::Builder::new().name(name.into()).spawn(move || {
        if let Err(e) = body() {
            log::error!("{label} node failed: {e}");
            stop.store(true, Ordering::Relaxed);
        }
    })?)
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}
