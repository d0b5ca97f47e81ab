//! Control modes and the keyboard map.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    #[default]
    Keyboard,
    FaceTracking,
    GestureControl,
    /// Motors stopped. Only an explicit reset leaves this mode.
    Emergency,
}

impl ControlMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::Keyboard => "keyboard",
            ControlMode::FaceTracking => "face_tracking",
            ControlMode::GestureControl => "gesture_control",
            ControlMode::Emergency => "emergency",
        }
    }

    pub fn from_name(name: &str) -> Option<ControlMode> {
        [
            ControlMode::Keyboard,
            ControlMode::FaceTracking,
            ControlMode::GestureControl,
            ControlMode::Emergency,
        ]
        .into_iter()
        .find(|m| m.as_str() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrow {
    Up,
    Down,
    Left,
    Right,
}

/// Keyboard map: `t` takeoff, `l` land, space emergency, `1`/`2`/`3`
/// keyboard / face tracking / gesture mode, `r` reset after an emergency,
/// arrows for manual velocity (up/down fly forward/back, left/right strafe).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Key {
    Takeoff,
    Land,
    Emergency,
    Mode(ControlMode),
    Reset,
    Arrow(Arrow),
}

impl Key {
    pub fn from_name(name: &str) -> Option<Key> {
        Some(match name {
            "t" => Key::Takeoff,
            "l" => Key::Land,
            " " | "space" => Key::Emergency,
            "1" => Key::Mode(ControlMode::Keyboard),
            "2" => Key::Mode(ControlMode::FaceTracking),
            "3" => Key::Mode(ControlMode::GestureControl),
            "r" => Key::Reset,
            "up" | "ArrowUp" => Key::Arrow(Arrow::Up),
            "down" | "ArrowDown" => Key::Arrow(Arrow::Down),
            "left" | "ArrowLeft" => Key::Arrow(Arrow::Left),
            "right" | "ArrowRight" => Key::Arrow(Arrow::Right),
            _ => return None,
        })
    }
}

/// Anything that may change the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeInput {
    Key(Key),
    GestureEvent,
    FaceUpdate,
}

pub fn mode_arbiter(current: ControlMode, input: ModeInput) -> ControlMode {
    match (current, input) {
        (_, ModeInput::Key(Key::Emergency)) => ControlMode::Emergency,
        (ControlMode::Emergency, ModeInput::Key(Key::Reset)) => ControlMode::Keyboard,
        (ControlMode::Emergency, _) => ControlMode::Emergency,
        (_, ModeInput::Key(Key::Mode(m))) if m != ControlMode::Emergency => m,
        (m, _) => m,
    }
}
