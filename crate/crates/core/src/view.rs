//! Body orientation from shoulder, nose-to-neck and ear geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{joint_distance, JointId, SkeletonFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewClass {
    Front,
    Side,
    Back,
    Ambiguous,
}

impl ViewClass {
    pub const ALL: [ViewClass; 4] = [
        ViewClass::Front,
        ViewClass::Side,
        ViewClass::Back,
        ViewClass::Ambiguous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewClass::Front => "front",
            ViewClass::Side => "side",
            ViewClass::Back => "back",
            ViewClass::Ambiguous => "ambiguous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    /// Weight on the nose-to-neck distance when compared to shoulder width.
    pub gamma: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig { gamma: 0.5 }
    }
}

impl ViewConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(ViewConfig { gamma })
        } else {
            Err(Error::Config(format!("view gamma must be > 0, got {gamma}")))
        }
    }
}

/// Classifies the orientation of the person in `frame`.
///
/// Side when the shoulder width is at most `gamma` times the nose-to-neck
/// distance; otherwise Front or Back depending on whether the right ear lies
/// left of the left ear in the image. Ambiguous whenever a joint needed by
/// the deciding test is missing.
pub fn classify_view(frame: &SkeletonFrame, cfg: &ViewConfig) -> ViewClass {
    let (Ok(shoulders), Ok(nose_neck)) = (
        joint_distance(frame, JointId::RShoulder, JointId::LShoulder),
        joint_distance(frame, JointId::Nose, JointId::Neck),
    ) else {
        return ViewClass::Ambiguous;
    };
    if shoulders <= cfg.gamma * nose_neck {
        return ViewClass::Side;
    }
    let (Ok(r_ear), Ok(l_ear)) = (frame.present(JointId::REar), frame.present(JointId::LEar))
    else {
        return ViewClass::Ambiguous;
    };
    if r_ear.x <= l_ear.x {
        ViewClass::Front
    } else {
        ViewClass::Back
    }
}
