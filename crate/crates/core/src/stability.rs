//! Temporal stability filter: a gesture is emitted once it has been seen in
//! `n_frames` consecutive frames, and the same gesture is not re-emitted
//! until `cooldown_ms` has passed since its last emission.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::Gesture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub n_frames: u32,
    pub cooldown_ms: u64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            n_frames: 3,
            cooldown_ms: 625,
        }
    }
}

impl StabilityConfig {
    pub fn new(n_frames: u32, cooldown_ms: u64) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::Config("gestures.n_frames must be >= 1".into()));
        }
        Ok(StabilityConfig {
            n_frames,
            cooldown_ms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub gesture: Gesture,
    pub timestamp_ms: u64,
    pub stable_count: u32,
}

#[derive(Debug, Clone, Default)]
pub struct StabilityFilter {
    cfg: StabilityConfig,
    candidate: Option<Gesture>,
    streak: u32,
    last_emitted: Option<(Gesture, u64)>,
    last_timestamp: Option<u64>,
}

impl StabilityFilter {
    pub fn new(cfg: StabilityConfig) -> Self {
        StabilityFilter {
            cfg,
            ..Default::default()
        }
    }

    pub fn config(&self) -> &StabilityConfig {
        &self.cfg
    }

    pub fn streak(&self) -> u32 {
        self.streak
    }

    pub fn step(&mut self, gesture: Option<Gesture>, timestamp_ms: u64) -> Result<Option<GestureEvent>> {
        if let Some(previous) = self.last_timestamp {
            if timestamp_ms < previous {
                return Err(Error::ClockSkew {
                    previous,
                    now: timestamp_ms,
                });
            }
        }
        self.last_timestamp = Some(timestamp_ms);

        let Some(gesture) = gesture else {
            self.candidate = None;
            self.streak = 0;
            return Ok(None);
        };
        if self.candidate == Some(gesture) {
            self.streak = self.streak.saturating_add(1);
        } else {
            self.candidate = Some(gesture);
            self.streak = 1;
        }
        if self.streak < self.cfg.n_frames {
            return Ok(None);
        }
        let cooled = match self.last_emitted {
            Some((last, at)) if last == gesture => timestamp_ms - at >= self.cfg.cooldown_ms,
            _ => true,
        };
        if !cooled {
            return Ok(None);
        }
        self.last_emitted = Some((gesture, timestamp_ms));
        Ok(Some(GestureEvent {
            gesture,
            timestamp_ms,
            stable_count: self.streak,
        }))
    }
}
