//! Arm-state extraction and the gesture lookup table.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::skeleton::{elbow_angle, joint_distance, JointId, Side, SkeletonFrame};
use crate::view::ViewClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AngleState {
    Perpendicular,
    Straight,
    None,
}

/// Wrist height relative to the shoulder of the same arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositionState {
    Over,
    Under,
    Middle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmState {
    pub angle: AngleState,
    pub position: PositionState,
}

impl ArmState {
    pub const fn new(angle: AngleState, position: PositionState) -> Self {
        ArmState { angle, position }
    }

    pub const NONE: ArmState = ArmState::new(AngleState::None, PositionState::Middle);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gesture {
    Up,
    Down,
    Left,
    Right,
    Forward,
    Backward,
    Cw,
    Ccw,
    Cheese,
    SideLeft,
    SideRight,
}

impl Gesture {
    pub const ALL: [Gesture; 11] = [
        Gesture::Up,
        Gesture::Down,
        Gesture::Left,
        Gesture::Right,
        Gesture::Forward,
        Gesture::Backward,
        Gesture::Cw,
        Gesture::Ccw,
        Gesture::Cheese,
        Gesture::SideLeft,
        Gesture::SideRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Gesture::Up => "up",
            Gesture::Down => "down",
            Gesture::Left => "left",
            Gesture::Right => "right",
            Gesture::Forward => "forward",
            Gesture::Backward => "backward",
            Gesture::Cw => "cw",
            Gesture::Ccw => "ccw",
            Gesture::Cheese => "cheese",
            Gesture::SideLeft => "side_left",
            Gesture::SideRight => "side_right",
        }
    }

    pub fn from_name(name: &str) -> Option<Gesture> {
        Gesture::ALL.into_iter().find(|g| g.as_str() == name)
    }

    /// The gesture performed with the arms swapped.
    pub fn mirrored(self) -> Gesture {
        match self {
            Gesture::Left => Gesture::Right,
            Gesture::Right => Gesture::Left,
            Gesture::Cw => Gesture::Ccw,
            Gesture::Ccw => Gesture::Cw,
            Gesture::SideLeft => Gesture::SideRight,
            Gesture::SideRight => Gesture::SideLeft,
            g => g,
        }
    }

    pub fn is_side(self) -> bool {
        matches!(self, Gesture::SideLeft | Gesture::SideRight)
    }
}

impl fmt::Display for Gesture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureConfig {
    /// Dead-band around shoulder height, as a fraction of the body scale.
    pub beta: f64,
}

impl Default for GestureConfig {
    fn default() -> Self {
        GestureConfig { beta: 0.2 }
    }
}

/// Perpendicular on the open interval (60, 120) degrees, Straight on (140, 180].
pub fn arm_angle_state(alpha: f64) -> AngleState {
    if alpha > 60.0 && alpha < 120.0 {
        AngleState::Perpendicular
    } else if alpha > 140.0 && alpha <= 180.0 {
        AngleState::Straight
    } else {
        AngleState::None
    }
}

/// Length that sets the position dead-band: the shoulder width, unless a
/// side view has collapsed it below the nose-to-neck distance or half the
/// neck-to-hip length, in which case the larger of those is used.
fn body_scale(frame: &SkeletonFrame) -> Result<f64> {
    let shoulders = joint_distance(frame, JointId::RShoulder, JointId::LShoulder)?;
    let nose_neck = joint_distance(frame, JointId::Nose, JointId::Neck).unwrap_or(0.0);
    let half_torso = [JointId::LHip, JointId::RHip]
        .iter()
        .filter_map(|&hip| joint_distance(frame, JointId::Neck, hip).ok())
        .fold(0.0, f64::max)
        / 2.0;
    Ok(shoulders.max(nose_neck).max(half_torso))
}

/// Over if the wrist is more than `beta * scale` above the shoulder, Under
/// if more than that below, Middle otherwise.
pub fn arm_position_state(
    frame: &SkeletonFrame,
    side: Side,
    cfg: &GestureConfig,
) -> Result<PositionState> {
    let wrist = frame.present(side.wrist())?;
    let shoulder = frame.present(side.shoulder())?;
    let band = cfg.beta * body_scale(frame)?;
    // Image y grows downwards.
    Ok(if wrist.y < shoulder.y - band {
        PositionState::Over
    } else if wrist.y > shoulder.y + band {
        PositionState::Under
    } else {
        PositionState::Middle
    })
}

/// Arm state for one side; an arm that cannot be measured has angle `None`.
pub fn arm_state(frame: &SkeletonFrame, side: Side, cfg: &GestureConfig) -> ArmState {
    let angle = elbow_angle(frame, side).map_or(AngleState::None, arm_angle_state);
    match arm_position_state(frame, side, cfg) {
        Ok(position) => ArmState { angle, position },
        Err(_) => ArmState::NONE,
    }
}

/// Looks up the gesture for a (left arm, right arm, view) triple.
///
/// Tuples are in the user's anatomical frame. Side gestures need the Side
/// view and exactly one arm raised straight at shoulder height; all other
/// gestures need the Front view.
pub fn classify_gesture(left: ArmState, right: ArmState, view: ViewClass) -> Option<Gesture> {
    use AngleState::{Perpendicular as P, Straight as S};
    use PositionState::{Middle, Over, Under};

    if left.angle == AngleState::None || right.angle == AngleState::None {
        return None;
    }
    let l = (left.angle, left.position);
    let r = (right.angle, right.position);
    match view {
        ViewClass::Front => match (l, r) {
            ((P, Over), (P, Over)) => Some(Gesture::Up),
            ((P, Under), (P, Under)) => Some(Gesture::Down),
            ((S, Middle), (S, Under)) => Some(Gesture::Left),
            ((S, Under), (S, Middle)) => Some(Gesture::Right),
            ((S, Over), (S, Over)) => Some(Gesture::Forward),
            ((S, Middle), (S, Middle)) => Some(Gesture::Backward),
            ((P, Over), (P, Under)) => Some(Gesture::Cw),
            ((P, Under), (P, Over)) => Some(Gesture::Ccw),
            ((P, Middle), (P, Middle)) => Some(Gesture::Cheese),
            _ => None,
        },
        ViewClass::Side => {
            let raised = (S, Middle);
            match (l == raised, r == raised) {
                (true, false) => Some(Gesture::SideLeft),
                (false, true) => Some(Gesture::SideRight),
                _ => None,
            }
        }
        ViewClass::Back | ViewClass::Ambiguous => None,
    }
}

/// Full per-frame recognition: arm states, table lookup, and the side-view
/// tie-break when both arms are raised (the arm reaching farther from the
/// neck decides).
pub fn recognize(frame: &SkeletonFrame, view: ViewClass, cfg: &GestureConfig) -> Option<Gesture> {
    let left = arm_state(frame, Side::Left, cfg);
    let right = arm_state(frame, Side::Right, cfg);
    if let Some(g) = classify_gesture(left, right, view) {
        return Some(g);
    }
    let raised = ArmState::new(AngleState::Straight, PositionState::Middle);
    if view != ViewClass::Side || left != raised || right != raised {
        return None;
    }
    let neck = frame.present(JointId::Neck).ok()?;
    let reach = |side: Side| {
        frame
            .present(side.wrist())
            .ok()
            .map(|w| (w.x - neck.x).abs())
    };
    let (l, r) = (reach(Side::Left)?, reach(Side::Right)?);
    if l > r {
        Some(Gesture::SideLeft)
    } else if r > l {
        Some(Gesture::SideRight)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use AngleState::{Perpendicular as P, Straight as S};
    use PositionState::{Middle, Over, Under};

    #[test]
    fn angle_state_intervals() {
        assert_eq!(arm_angle_state(90.0), P);
        assert_eq!(arm_angle_state(180.0), S);
        assert_eq!(arm_angle_state(130.0), AngleState::None);
        assert_eq!(arm_angle_state(60.0), AngleState::None);
        assert_eq!(arm_angle_state(120.0), AngleState::None);
        assert_eq!(arm_angle_state(140.0), AngleState::None);
        assert_eq!(arm_angle_state(140.0001), S);
        assert_eq!(arm_angle_state(30.0), AngleState::None);
    }

    // Shoulders 60 px apart, no nose so the dead-band is 0.2 * 60 = 12 px.
    fn shoulders() -> SkeletonFrame {
        SkeletonFrame::new(0, 400, 400)
            .with_joint(JointId::RShoulder, 170.0, 200.0)
            .with_joint(JointId::LShoulder, 230.0, 200.0)
    }

    #[test]
    fn position_state_examples() {
        let cfg = GestureConfig::default();
        let f = shoulders().with_joint(JointId::LWrist, 280.0, 160.0);
        assert_eq!(arm_position_state(&f, Side::Left, &cfg).unwrap(), Over);
        let f = shoulders().with_joint(JointId::LWrist, 280.0, 200.0);
        assert_eq!(arm_position_state(&f, Side::Left, &cfg).unwrap(), Middle);
        let f = shoulders().with_joint(JointId::LWrist, 280.0, 240.0);
        assert_eq!(arm_position_state(&f, Side::Left, &cfg).unwrap(), Under);
        // 11 px is inside the 12 px band.
        let f = shoulders().with_joint(JointId::LWrist, 280.0, 189.0);
        assert_eq!(arm_position_state(&f, Side::Left, &cfg).unwrap(), Middle);
    }

    #[test]
    fn position_state_missing_wrist() {
        let cfg = GestureConfig::default();
        assert!(matches!(
            arm_position_state(&shoulders(), Side::Right, &cfg),
            Err(Error::MissingJoint(JointId::RWrist))
        ));
    }

    #[test]
    fn position_band_uses_neck_in_side_view() {
        // Shoulders 4 px apart, nose-to-neck 50 px: band is 10 px.
        let f = SkeletonFrame::new(0, 400, 400)
            .with_joint(JointId::Nose, 200.0, 150.0)
            .with_joint(JointId::Neck, 200.0, 200.0)
            .with_joint(JointId::RShoulder, 198.0, 205.0)
            .with_joint(JointId::LShoulder, 202.0, 205.0)
            .with_joint(JointId::LWrist, 280.0, 198.0);
        let cfg = GestureConfig::default();
        assert_eq!(arm_position_state(&f, Side::Left, &cfg).unwrap(), Middle);
    }

    #[test]
    fn position_band_uses_torso_in_side_view() {
        // Shoulders 4 px apart, nose-to-neck 10 px, neck-to-hip 120 px:
        // band is 0.2 * 60 = 12 px.
        let f = SkeletonFrame::new(0, 400, 400)
            .with_joint(JointId::Nose, 200.0, 190.0)
            .with_joint(JointId::Neck, 200.0, 200.0)
            .with_joint(JointId::RShoulder, 198.0, 205.0)
            .with_joint(JointId::LShoulder, 202.0, 205.0)
            .with_joint(JointId::LHip, 200.0, 320.0)
            .with_joint(JointId::LWrist, 280.0, 194.0);
        let cfg = GestureConfig::default();
        assert_eq!(arm_position_state(&f, Side::Left, &cfg).unwrap(), Middle);
        let f = f.with_joint(JointId::LWrist, 280.0, 192.0);
        assert_eq!(arm_position_state(&f, Side::Left, &cfg).unwrap(), Over);
    }

    #[test]
    fn front_band_ignores_torso() {
        // Frontal shoulders (60 px) dominate half the torso (50 px).
        let f = shoulders()
            .with_joint(JointId::Neck, 200.0, 200.0)
            .with_joint(JointId::LHip, 215.0, 300.0)
            .with_joint(JointId::LWrist, 260.0, 187.0);
        let cfg = GestureConfig::default();
        assert_eq!(arm_position_state(&f, Side::Left, &cfg).unwrap(), Over);
    }

    #[test]
    fn table_examples() {
        let up = ArmState::new(P, Over);
        assert_eq!(classify_gesture(up, up, ViewClass::Front), Some(Gesture::Up));
        let s = ArmState::new(S, Middle);
        assert_eq!(classify_gesture(s, s, ViewClass::Side), None);
        assert_eq!(
            classify_gesture(up, ArmState::new(S, Over), ViewClass::Front),
            None
        );
        assert_eq!(classify_gesture(up, up, ViewClass::Back), None);
        assert_eq!(classify_gesture(up, ArmState::NONE, ViewClass::Front), None);
        assert_eq!(
            classify_gesture(s, ArmState::new(S, Under), ViewClass::Side),
            Some(Gesture::SideLeft)
        );
    }

    #[test]
    fn names_round_trip() {
        for g in Gesture::ALL {
            assert_eq!(Gesture::from_name(g.as_str()), Some(g));
        }
    }
}
