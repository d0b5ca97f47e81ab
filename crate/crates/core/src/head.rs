//! Head bounding boxes from skeleton head joints, and single-user selection
//! through a pluggable identity matcher with nearest-box fallback tracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{JointId, SkeletonFrame};

/// Margin added on each side, as a fraction of the hull box width/height.
pub const HEAD_MARGIN: f64 = 0.25;
/// A track with no identity match for longer than this falls back to cold start.
pub const TRACK_STALE_MS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn center_distance(&self, other: &BBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        (ax - bx).hypot(ay - by)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x > self.x_min && x < self.x_max && y > self.y_min && y < self.y_max
    }
}

/// Head box before clamping to the image.
pub fn head_bbox_unclamped(frame: &SkeletonFrame) -> Result<BBox> {
    let present: Vec<_> = JointId::HEAD
        .iter()
        .map(|&id| frame.joint(id))
        .filter(|j| j.is_present())
        .collect();
    if present.len() < 2 {
        return Err(Error::InsufficientJoints(present.len()));
    }
    let (mut x_min, mut y_min) = (f64::INFINITY, f64::INFINITY);
    let (mut x_max, mut y_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for j in &present {
        x_min = x_min.min(j.x);
        x_max = x_max.max(j.x);
        y_min = y_min.min(j.y);
        y_max = y_max.max(j.y);
    }
    let (w, h) = (x_max - x_min, y_max - y_min);
    // Collinear joints give a zero-area hull, which has no usable margin.
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::InsufficientJoints(present.len()));
    }
    Ok(BBox {
        x_min: x_min - HEAD_MARGIN * w,
        x_max: x_max + HEAD_MARGIN * w,
        y_min: y_min - HEAD_MARGIN * h,
        y_max: y_max + HEAD_MARGIN * h,
    })
}

/// Axis-aligned box over the present head joints, widened by 25% of its
/// size on every side and clamped to the image.
pub fn head_bbox(frame: &SkeletonFrame) -> Result<BBox> {
    let b = head_bbox_unclamped(frame)?;
    let (iw, ih) = (frame.image_width as f64, frame.image_height as f64);
    let clamped = BBox {
        x_min: b.x_min.clamp(0.0, iw),
        x_max: b.x_max.clamp(0.0, iw),
        y_min: b.y_min.clamp(0.0, ih),
        y_max: b.y_max.clamp(0.0, ih),
    };
    if clamped.width() <= 0.0 || clamped.height() <= 0.0 {
        return Err(Error::InsufficientJoints(0));
    }
    Ok(clamped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub person_id: u32,
    pub bbox: BBox,
}

/// Decides which candidate (if any) is the registered user.
pub trait IdentityMatcher {
    fn identify(&self, candidates: &[Candidate]) -> Option<u32>;
}

/// Single-user desk mode: the first candidate is always the user.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstMatcher;

impl IdentityMatcher for FirstMatcher {
    fn identify(&self, candidates: &[Candidate]) -> Option<u32> {
        candidates.first().map(|c| c.person_id)
    }
}

/// Matches exactly one fixed person id, when present.
#[derive(Debug, Clone, Copy)]
pub struct FixedIdMatcher(pub u32);

impl IdentityMatcher for FixedIdMatcher {
    fn identify(&self, candidates: &[Candidate]) -> Option<u32> {
        candidates
            .iter()
            .find(|c| c.person_id == self.0)
            .map(|c| c.person_id)
    }
}

/// Never matches; selection then relies on tracking alone.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoMatcher;

impl IdentityMatcher for NoMatcher {
    fn identify(&self, _: &[Candidate]) -> Option<u32> {
        None
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackState {
    pub last_matched_box: Option<BBox>,
    pub last_match_timestamp: u64,
}

/// Picks the registered user among `candidates` at time `now_ms`.
///
/// An identity match wins. Otherwise the candidate whose box center is
/// closest to the tracked box is taken (ties go to the lowest person id),
/// and the track follows it. Tracks older than [`TRACK_STALE_MS`] without
/// an identity match are dropped.
pub fn select_user(
    candidates: &[Candidate],
    matcher: &dyn IdentityMatcher,
    state: &mut TrackState,
    now_ms: u64,
) -> Option<u32> {
    if let Some(id) = matcher.identify(candidates) {
        if let Some(c) = candidates.iter().find(|c| c.person_id == id) {
            state.last_matched_box = Some(c.bbox);
            state.last_match_timestamp = now_ms;
            return Some(id);
        }
    }
    if now_ms.saturating_sub(state.last_match_timestamp) > TRACK_STALE_MS {
        state.last_matched_box = None;
    }
    let last = state.last_matched_box?;
    let best = candidates.iter().min_by(|a, b| {
        a.bbox
            .center_distance(&last)
            .total_cmp(&b.bbox.center_distance(&last))
            .then(a.person_id.cmp(&b.person_id))
    })?;
    state.last_matched_box = Some(best.bbox);
    Some(best.person_id)
}
