//! In-process publish/subscribe bus with fixed, typed topics.
//!
//! Every subscriber owns a bounded inbox. When it is full the oldest
//! message is dropped, so a slow consumer always sees the freshest data and
//! memory stays bounded. Delivery is FIFO per topic and at most once per
//! subscriber.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::distance::DistanceEstimate;
use crate::error::{Error, Result};
use crate::head::BBox;
use crate::sim::{DroneState, TelloCommand};
use crate::skeleton::{parse_skeleton_frame, serialize_skeleton_frame, SkeletonFrame};
use crate::stability::GestureEvent;
use crate::view::ViewClass;

pub const DEFAULT_QUEUE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Topic {
    Skeleton,
    View,
    Gesture,
    FaceBbox,
    Distance,
    Cmd,
    DroneState,
}

impl Topic {
    pub const ALL: [Topic; 7] = [
        Topic::Skeleton,
        Topic::View,
        Topic::Gesture,
        Topic::FaceBbox,
        Topic::Distance,
        Topic::Cmd,
        Topic::DroneState,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Topic::Skeleton => "/skeleton",
            Topic::View => "/view",
            Topic::Gesture => "/gesture",
            Topic::FaceBbox => "/face_bbox",
            Topic::Distance => "/distance",
            Topic::Cmd => "/cmd",
            Topic::DroneState => "/drone_state",
        }
    }

    pub fn from_name(name: &str) -> Result<Topic> {
        Topic::ALL
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| Error::UnknownTopic(name.to_string()))
    }

    /// Schema id of the messages this topic carries.
    pub fn schema(self) -> &'static str {
        match self {
            Topic::Skeleton => "skeleton_frame",
            Topic::View => "view",
            Topic::Gesture => "gesture_event",
            Topic::FaceBbox => "face_bbox",
            Topic::Distance => "distance_estimate",
            Topic::Cmd => "tello_command",
            Topic::DroneState => "drone_status",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewMsg {
    pub person_id: u32,
    pub view: ViewClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceMsg {
    pub person_id: u32,
    pub bbox: BBox,
    pub image_width: u32,
    pub image_height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneStatus {
    pub state: DroneState,
    /// Replies produced since the previous status message, oldest first.
    pub replies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Skeleton(SkeletonFrame),
    View(ViewMsg),
    Gesture(GestureEvent),
    FaceBbox(FaceMsg),
    Distance(DistanceEstimate),
    Cmd(TelloCommand),
    DroneState(DroneStatus),
}

impl Message {
    pub fn schema(&self) -> &'static str {
        self.natural_topic().schema()
    }

    fn natural_topic(&self) -> Topic {
        match self {
            Message::Skeleton(_) => Topic::Skeleton,
            Message::View(_) => Topic::View,
            Message::Gesture(_) => Topic::Gesture,
            Message::FaceBbox(_) => Topic::FaceBbox,
            Message::Distance(_) => Topic::Distance,
            Message::Cmd(_) => Topic::Cmd,
            Message::DroneState(_) => Topic::DroneState,
        }
    }

    pub fn to_json(&self) -> Value {
        let v = match self {
            Message::Skeleton(f) => serde_json::from_str(&serialize_skeleton_frame(f)),
            Message::View(m) => serde_json::to_value(m),
            Message::Gesture(m) => serde_json::to_value(m),
            Message::FaceBbox(m) => serde_json::to_value(m),
            Message::Distance(m) => serde_json::to_value(m),
            Message::Cmd(m) => serde_json::to_value(m),
            Message::DroneState(m) => serde_json::to_value(m),
        };
        v.expect("bus messages always serialize")
    }

    pub fn from_json(topic: Topic, value: Value) -> Result<Message> {
        let bad = |e: serde_json::Error| Error::Schema(format!("{topic}: {e}"));
        Ok(match topic {
            Topic::Skeleton => Message::Skeleton(parse_skeleton_frame(value.to_string().as_bytes())?),
            Topic::View => Message::View(serde_json::from_value(value).map_err(bad)?),
            Topic::Gesture => Message::Gesture(serde_json::from_value(value).map_err(bad)?),
            Topic::FaceBbox => Message::FaceBbox(serde_json::from_value(value).map_err(bad)?),
            Topic::Distance => Message::Distance(serde_json::from_value(value).map_err(bad)?),
            Topic::Cmd => Message::Cmd(serde_json::from_value(value).map_err(bad)?),
            Topic::DroneState => Message::DroneState(serde_json::from_value(value).map_err(bad)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: Topic,
    pub timestamp_ms: u64,
    /// Per-topic sequence number, starting at 0.
    pub seq: u64,
    pub message: Message,
}

impl Envelope {
    /// One session-log line: `{"topic", "timestamp_ms", "message"}`.
    pub fn to_log_line(&self) -> String {
        json!({
            "topic": self.topic.name(),
            "timestamp_ms": self.timestamp_ms,
            "message": self.message.to_json(),
        })
        .to_string()
    }

    pub fn from_log_line(line: &str) -> Result<Envelope> {
        #[derive(Deserialize)]
        struct Raw {
            topic: String,
            timestamp_ms: u64,
            message: Value,
        }
        let raw: Raw = serde_json::from_str(line).map_err(|e| Error::Parse {
            offset: e.column().saturating_sub(1),
            message: e.to_string(),
        })?;
        let topic = Topic::from_name(&raw.topic)?;
        Ok(Envelope {
            topic,
            timestamp_ms: raw.timestamp_ms,
            seq: 0,
            message: Message::from_json(topic, raw.message)?,
        })
    }
}

/// Result of a publish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    pub delivered: usize,
    /// Older messages evicted from full inboxes to make room.
    pub evicted: usize,
}

struct Inbox {
    topics: Vec<Topic>,
    cap: usize,
    queue: VecDeque<Envelope>,
    evicted: u64,
    max_depth: usize,
}

struct Inner {
    subscribers: HashMap<Topic, Vec<usize>>,
    inboxes: Vec<Inbox>,
    seq: HashMap<Topic, u64>,
}

/// Cheap to clone; all clones share the same topics and inboxes.
#[derive(Clone)]
pub struct Bus {
    inner: Arc<(Mutex<Inner>, Condvar)>,
    default_cap: usize,
}

impl Bus {
    /// A bus with no topics registered.
    pub fn new(default_cap: usize) -> Bus {
        Bus {
            inner: Arc::new((
                Mutex::new(Inner {
                    subscribers: HashMap::new(),
                    inboxes: Vec::new(),
                    seq: HashMap::new(),
                }),
                Condvar::new(),
            )),
            default_cap: default_cap.max(1),
        }
    }

    /// A bus with every pipeline topic registered.
    pub fn with_all_topics(default_cap: usize) -> Bus {
        let bus = Bus::new(default_cap);
        for t in Topic::ALL {
            bus.register(t);
        }
        bus
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.0.lock().expect("bus lock poisoned")
    }

    pub fn register(&self, topic: Topic) {
        self.lock().subscribers.entry(topic).or_default();
    }

    pub fn is_registered(&self, topic: Topic) -> bool {
        self.lock().subscribers.contains_key(&topic)
    }

    pub fn subscribe(&self, topics: &[Topic]) -> Result<Subscription> {
        self.subscribe_with_cap(topics, self.default_cap)
    }

    /// One inbox receiving every listed topic, merged in publish order.
    pub fn subscribe_with_cap(&self, topics: &[Topic], cap: usize) -> Result<Subscription> {
        let mut inner = self.lock();
        if let Some(t) = topics.iter().find(|t| !inner.subscribers.contains_key(t)) {
            return Err(Error::UnknownTopic(t.name().to_string()));
        }
        let id = inner.inboxes.len();
        inner.inboxes.push(Inbox {
            topics: topics.to_vec(),
            cap: cap.max(1),
            queue: VecDeque::new(),
            evicted: 0,
            max_depth: 0,
        });
        for t in topics {
            inner.subscribers.get_mut(t).expect("checked above").push(id);
        }
        Ok(Subscription { bus: self.clone(), id })
    }

    pub fn publish(&self, topic: Topic, timestamp_ms: u64, message: Message) -> Result<Receipt> {
        self.publish_all(topic, vec![(timestamp_ms, message)])
    }

    /// Publishes several messages on one topic atomically: no subscriber
    /// can observe a prefix of the batch.
    pub fn publish_all(&self, topic: Topic, batch: Vec<(u64, Message)>) -> Result<Receipt> {
        if let Some((_, m)) = batch.iter().find(|(_, m)| m.schema() != topic.schema()) {
            return Err(Error::SchemaMismatch {
                topic: topic.name().to_string(),
                expected: topic.schema(),
                got: m.schema(),
            });
        }
        let mut inner = self.lock();
        let Some(subs) = inner.subscribers.get(&topic).cloned() else {
            return Err(Error::UnknownTopic(topic.name().to_string()));
        };
        let mut receipt = Receipt {
            delivered: 0,
            evicted: 0,
        };
        for (timestamp_ms, message) in batch {
            let seq = {
                let s = inner.seq.entry(topic).or_insert(0);
                *s += 1;
                *s - 1
            };
            let env = Envelope {
                topic,
                timestamp_ms,
                seq,
                message,
            };
            for &id in &subs {
                let inbox = &mut inner.inboxes[id];
                if inbox.queue.len() >= inbox.cap {
                    inbox.queue.pop_front();
                    inbox.evicted += 1;
                    receipt.evicted += 1;
                }
                inbox.queue.push_back(env.clone());
                inbox.max_depth = inbox.max_depth.max(inbox.queue.len());
                receipt.delivered += 1;
            }
        }
        drop(inner);
        self.inner.1.notify_all();
        Ok(receipt)
    }

    /// Publish by topic name, as used by external inputs.
    pub fn publish_named(&self, name: &str, timestamp_ms: u64, message: Message) -> Result<Receipt> {
        self.publish(Topic::from_name(name)?, timestamp_ms, message)
    }
}

/// A subscriber's inbox handle.
pub struct Subscription {
    bus: Bus,
    id: usize,
}

impl Subscription {
    pub fn topics(&self) -> Vec<Topic> {
        self.bus.lock().inboxes[self.id].topics.clone()
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        self.bus.lock().inboxes[self.id].queue.pop_front()
    }

    pub fn drain(&self) -> Vec<Envelope> {
        self.bus.lock().inboxes[self.id].queue.drain(..).collect()
    }

    /// Waits up to `timeout` for at least one message, then drains.
    pub fn drain_timeout(&self, timeout: Duration) -> Vec<Envelope> {
        let (lock, cv) = &*self.bus.inner;
        let guard = lock.lock().expect("bus lock poisoned");
        let (mut guard, _) = cv
            .wait_timeout_while(guard, timeout, |inner| inner.inboxes[self.id].queue.is_empty())
            .expect("bus lock poisoned");
        guard.inboxes[self.id].queue.drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.bus.lock().inboxes[self.id].queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Messages this inbox lost to backpressure so far.
    pub fn evicted(&self) -> u64 {
        self.bus.lock().inboxes[self.id].evicted
    }

    /// Deepest the inbox has ever been.
    pub fn max_depth(&self) -> usize {
        self.bus.lock().inboxes[self.id].max_depth
    }
}
