//! Tello-style ASCII command grammar and the telemetry line.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::DroneState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    Forward,
    Back,
}

impl Direction {
    pub fn verb(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Forward => "forward",
            Direction::Back => "back",
        }
    }

    /// Unit vector in the body frame as (lateral, longitudinal, vertical).
    pub fn body_axis(self) -> [f64; 3] {
        match self {
            Direction::Up => [0.0, 0.0, 1.0],
            Direction::Down => [0.0, 0.0, -1.0],
            Direction::Left => [-1.0, 0.0, 0.0],
            Direction::Right => [1.0, 0.0, 0.0],
            Direction::Forward => [0.0, 1.0, 0.0],
            Direction::Back => [0.0, -1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    Cw,
    Ccw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TelloCommand {
    /// Enter SDK mode.
    Command,
    Takeoff,
    Land,
    /// Stop the motors immediately.
    Emergency,
    Move { direction: Direction, cm: u32 },
    Rotate { rotation: Rotation, degrees: u32 },
    /// lateral, longitudinal, vertical, yaw; each in -100..=100.
    Rc { lateral: i32, longitudinal: i32, vertical: i32, yaw: i32 },
    BatteryQuery,
}

pub const MOVE_RANGE: std::ops::RangeInclusive<u32> = 20..=500;
pub const ROTATE_RANGE: std::ops::RangeInclusive<u32> = 1..=360;
pub const RC_RANGE: std::ops::RangeInclusive<i32> = -100..=100;

impl fmt::Display for TelloCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TelloCommand::Command => f.write_str("command"),
            TelloCommand::Takeoff => f.write_str("takeoff"),
            TelloCommand::Land => f.write_str("land"),
            TelloCommand::Emergency => f.write_str("emergency"),
            TelloCommand::Move { direction, cm } => write!(f, "{} {cm}", direction.verb()),
            TelloCommand::Rotate { rotation, degrees } => {
                let verb = match rotation {
                    Rotation::Cw => "cw",
                    Rotation::Ccw => "ccw",
                };
                write!(f, "{verb} {degrees}")
            }
            TelloCommand::Rc {
                lateral,
                longitudinal,
                vertical,
                yaw,
            } => write!(f, "rc {lateral} {longitudinal} {vertical} {yaw}"),
            TelloCommand::BatteryQuery => f.write_str("battery?"),
        }
    }
}

// Serialized as its wire text.
impl Serialize for TelloCommand {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TelloCommand {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_command(&text).map_err(serde::de::Error::custom)
    }
}

fn unknown(text: &str) -> Error {
    Error::UnknownCommand(text.to_string())
}

fn int<T: std::str::FromStr>(text: &str, arg: &str) -> Result<T> {
    arg.parse().map_err(|_| unknown(text))
}

/// Parses one command datagram. Surrounding whitespace (including a
/// trailing CR/LF) is ignored.
pub fn parse_command(text: &str) -> Result<TelloCommand> {
    let trimmed = text.trim();
    let mut parts = trimmed.split_ascii_whitespace();
    let verb = parts.next().ok_or_else(|| unknown(text))?;
    let args: Vec<&str> = parts.collect();
    let arity = |n: usize| if args.len() == n { Ok(()) } else { Err(unknown(trimmed)) };

    let direction = match verb {
        "up" => Some(Direction::Up),
        "down" => Some(Direction::Down),
        "left" => Some(Direction::Left),
        "right" => Some(Direction::Right),
        "forward" => Some(Direction::Forward),
        "back" => Some(Direction::Back),
        _ => None,
    };
    if let Some(direction) = direction {
        arity(1)?;
        let cm: u32 = int(trimmed, args[0])?;
        if !MOVE_RANGE.contains(&cm) {
            return Err(Error::OutOfRange(format!("{verb} {cm}: distance must be 20..=500 cm")));
        }
        return Ok(TelloCommand::Move { direction, cm });
    }

    match verb {
        "command" | "takeoff" | "land" | "emergency" | "battery?" => {
            arity(0)?;
            Ok(match verb {
                "command" => TelloCommand::Command,
                "takeoff" => TelloCommand::Takeoff,
                "land" => TelloCommand::Land,
                "emergency" => TelloCommand::Emergency,
                _ => TelloCommand::BatteryQuery,
            })
        }
        "cw" | "ccw" => {
            arity(1)?;
            let degrees: u32 = int(trimmed, args[0])?;
            if !ROTATE_RANGE.contains(&degrees) {
                return Err(Error::OutOfRange(format!("{verb} {degrees}: angle must be 1..=360")));
            }
            let rotation = if verb == "cw" { Rotation::Cw } else { Rotation::Ccw };
            Ok(TelloCommand::Rotate { rotation, degrees })
        }
        "rc" => {
            arity(4)?;
            let mut ch = [0i32; 4];
            for (slot, arg) in ch.iter_mut().zip(&args) {
                *slot = int(trimmed, arg)?;
                if !RC_RANGE.contains(slot) {
                    return Err(Error::OutOfRange(format!("rc channel {slot} outside -100..=100")));
                }
            }
            Ok(TelloCommand::Rc {
                lateral: ch[0],
                longitudinal: ch[1],
                vertical: ch[2],
                yaw: ch[3],
            })
        }
        _ => Err(unknown(trimmed)),
    }
}

/// Yaw wrapped into (-180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// The telemetry line pushed to the registered client:
/// `pitch:%d;roll:%d;yaw:%d;vgx:%d;vgy:%d;vgz:%d;h:%d;bat:%d;time:%d;\r\n`.
///
/// `vgx`/`vgy`/`vgz` are body-frame forward, right and up speeds in cm/s,
/// `h` the altitude in cm, `bat` the whole battery percent and `time` the
/// whole seconds of motor-on time. The plant has no attitude, so pitch and
/// roll are always zero.
pub fn telemetry(state: &DroneState) -> String {
    let [lat, lon, vert] = state.velocity;
    format!(
        "pitch:{};roll:{};yaw:{};vgx:{};vgy:{};vgz:{};h:{};bat:{};time:{};\r\n",
        0,
        0,
        wrap_degrees(state.yaw).round() as i64,
        lon.round() as i64,
        lat.round() as i64,
        vert.round() as i64,
        state.z.round() as i64,
        state.battery.floor() as i64,
        state.flight_time_ms / 1000,
    )
}
