//! Skeleton data model (18-joint COCO layout) and the 2D geometry shared by
//! every classifier.
//!
//! Coordinates are image pixels with the origin at the top-left corner, `+x`
//! to the right and `+y` down. A joint whose confidence is zero is missing and
//! its coordinates carry no meaning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOINT_COUNT: usize = 18;

/// Segments shorter than this are treated as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum JointId {
    Nose = 0,
    Neck = 1,
    RShoulder = 2,
    RElbow = 3,
    RWrist = 4,
    LShoulder = 5,
    LElbow = 6,
    LWrist = 7,
    RHip = 8,
    RKnee = 9,
    RAnkle = 10,
    LHip = 11,
    LKnee = 12,
    LAnkle = 13,
    REye = 14,
    LEye = 15,
    REar = 16,
    LEar = 17,
}

impl JointId {
    pub const ALL: [JointId; JOINT_COUNT] = [
        JointId::Nose,
        JointId::Neck,
        JointId::RShoulder,
        JointId::RElbow,
        JointId::RWrist,
        JointId::LShoulder,
        JointId::LElbow,
        JointId::LWrist,
        JointId::RHip,
        JointId::RKnee,
        JointId::RAnkle,
        JointId::LHip,
        JointId::LKnee,
        JointId::LAnkle,
        JointId::REye,
        JointId::LEye,
        JointId::REar,
        JointId::LEar,
    ];

    /// Joints used to build the head box.
    pub const HEAD: [JointId; 6] = [
        JointId::Nose,
        JointId::Neck,
        JointId::REye,
        JointId::LEye,
        JointId::REar,
        JointId::LEar,
    ];

    pub fn from_index(index: usize) -> Option<JointId> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Body side in the user's anatomical frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn shoulder(self) -> JointId {
        match self {
            Side::Left => JointId::LShoulder,
            Side::Right => JointId::RShoulder,
        }
    }

    pub fn elbow(self) -> JointId {
        match self {
            Side::Left => JointId::LElbow,
            Side::Right => JointId::RElbow,
        }
    }

    pub fn wrist(self) -> JointId {
        match self {
            Side::Left => JointId::LWrist,
            Side::Right => JointId::RWrist,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Joint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Joint {
    pub const MISSING: Joint = Joint {
        x: 0.0,
        y: 0.0,
        confidence: 0.0,
    };

    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Joint { x, y, confidence }
    }

    /// A fully confident joint.
    pub fn at(x: f64, y: f64) -> Self {
        Joint::new(x, y, 1.0)
    }

    pub fn is_present(&self) -> bool {
        self.confidence > 0.0
    }
}

/// One person's keypoints at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub timestamp_ms: u64,
    /// Identifies the person within a multi-person scene; 0 for single-person streams.
    pub person_id: u32,
    pub image_width: u32,
    pub image_height: u32,
    pub joints: [Joint; JOINT_COUNT],
}

impl SkeletonFrame {
    /// An empty frame (all joints missing).
    pub fn new(timestamp_ms: u64, image_width: u32, image_height: u32) -> Self {
        SkeletonFrame {
            timestamp_ms,
            person_id: 0,
            image_width,
            image_height,
            joints: [Joint::MISSING; JOINT_COUNT],
        }
    }

    pub fn with_joint(mut self, id: JointId, x: f64, y: f64) -> Self {
        self.joints[id.index()] = Joint::at(x, y);
        self
    }

    pub fn joint(&self, id: JointId) -> &Joint {
        &self.joints[id.index()]
    }

    pub fn set(&mut self, id: JointId, joint: Joint) {
        self.joints[id.index()] = joint;
    }

    pub fn is_present(&self, id: JointId) -> bool {
        self.joint(id).is_present()
    }

    /// The joint if present, else `MissingJoint`.
    pub fn present(&self, id: JointId) -> Result<&Joint> {
        let j = self.joint(id);
        if j.is_present() {
            Ok(j)
        } else {
            Err(Error::MissingJoint(id))
        }
    }

    /// Applies `f` to the coordinates of every joint, keeping confidences.
    pub fn map_coords(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> SkeletonFrame {
        let mut out = self.clone();
        for j in out.joints.iter_mut() {
            let (x, y) = f(j.x, j.y);
            j.x = x;
            j.y = y;
        }
        out
    }
}

/// Euclidean pixel distance between two present joints.
pub fn joint_distance(frame: &SkeletonFrame, i: JointId, k: JointId) -> Result<f64> {
    let a = frame.present(i)?;
    let b = frame.present(k)?;
    Ok((a.x - b.x).hypot(a.y - b.y))
}

/// Inner angle at the elbow, in degrees within `[0, 180]`.
pub fn elbow_angle(frame: &SkeletonFrame, side: Side) -> Result<f64> {
    let s = frame.present(side.shoulder())?;
    let e = frame.present(side.elbow())?;
    let w = frame.present(side.wrist())?;
    let (ux, uy) = (s.x - e.x, s.y - e.y);
    let (fx, fy) = (w.x - e.x, w.y - e.y);
    let upper = ux.hypot(uy);
    let fore = fx.hypot(fy);
    if upper <= DEGENERATE_EPS {
        return Err(Error::DegenerateLimb(upper));
    }
    if fore <= DEGENERATE_EPS {
        return Err(Error::DegenerateLimb(fore));
    }
    // atan2 of |cross| and dot stays accurate near 0 and 180 degrees.
    let cross = ux * fy - uy * fx;
    let dot = ux * fx + uy * fy;
    Ok(cross.abs().atan2(dot).to_degrees())
}

#[derive(Debug, Serialize, Deserialize)]
struct RawKeypoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<usize>,
    x: f64,
    y: f64,
    c: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    timestamp_ms: u64,
    image_width: u32,
    image_height: u32,
    #[serde(default, skip_serializing_if = "is_zero")]
    person: u32,
    keypoints: Vec<RawKeypoint>,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

/// Parses one line of the skeleton stream format.
///
/// Keypoints are either all tagged with an `id` (absent ids are missing
/// joints) or all untagged, in which case the list is positional and must
/// hold exactly 18 entries.
pub fn parse_skeleton_frame(record: &[u8]) -> Result<SkeletonFrame> {
    let raw: RawRecord = serde_json::from_slice(trim_ascii(record)).map_err(|e| {
        let offset = if e.line() <= 1 {
            e.column().saturating_sub(1)
        } else {
            // Multi-line input: report the byte offset of the line start.
            record
                .split(|b| *b == b'\n')
                .take(e.line() - 1)
                .map(|l| l.len() + 1)
                .sum::<usize>()
                + e.column().saturating_sub(1)
        };
        Error::Parse {
            offset,
            message: e.to_string(),
        }
    })?;

    if raw.image_width == 0 || raw.image_height == 0 {
        return Err(Error::Schema("image dimensions must be positive".into()));
    }

    let tagged = raw.keypoints.iter().filter(|k| k.id.is_some()).count();
    let mut joints = [Joint::MISSING; JOINT_COUNT];
    if tagged == 0 {
        if raw.keypoints.len() != JOINT_COUNT {
            return Err(Error::Schema(format!(
                "positional keypoint list has {} entries, expected {JOINT_COUNT}",
                raw.keypoints.len()
            )));
        }
        for (slot, kp) in joints.iter_mut().zip(&raw.keypoints) {
            *slot = checked_joint(kp)?;
        }
    } else if tagged == raw.keypoints.len() {
        let mut seen = [false; JOINT_COUNT];
        for kp in &raw.keypoints {
            let id = kp.id.unwrap_or_default();
            if id >= JOINT_COUNT {
                return Err(Error::Schema(format!("keypoint id {id} out of range 0..18")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::Schema(format!("keypoint id {id} listed twice")));
            }
            joints[id] = checked_joint(kp)?;
        }
    } else {
        return Err(Error::Schema(
            "keypoints must be either all tagged with ids or all positional".into(),
        ));
    }

    Ok(SkeletonFrame {
        timestamp_ms: raw.timestamp_ms,
        person_id: raw.person,
        image_width: raw.image_width,
        image_height: raw.image_height,
        joints,
    })
}

fn checked_joint(kp: &RawKeypoint) -> Result<Joint> {
    if !(0.0..=1.0).contains(&kp.c) {
        return Err(Error::Schema(format!("confidence {} outside [0, 1]", kp.c)));
    }
    if !kp.x.is_finite() || !kp.y.is_finite() {
        return Err(Error::Schema("non-finite keypoint coordinate".into()));
    }
    Ok(Joint::new(kp.x, kp.y, kp.c))
}

fn trim_ascii(bytes: &[u8]) -> &[u8] {
    let start = bytes
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .unwrap_or(bytes.len());
    let end = bytes
        .iter()
        .rposition(|b| !b.is_ascii_whitespace())
        .map_or(start, |p| p + 1);
    &bytes[start..end]
}

/// Serializes a frame as one line (without the trailing newline). All 18
/// joints are written with explicit ids so that parsing is lossless.
pub fn serialize_skeleton_frame(frame: &SkeletonFrame) -> String {
    let raw = RawRecord {
        timestamp_ms: frame.timestamp_ms,
        image_width: frame.image_width,
        image_height: frame.image_height,
        person: frame.person_id,
        keypoints: frame
            .joints
            .iter()
            .enumerate()
            .map(|(id, j)| RawKeypoint {
                id: Some(id),
                x: j.x,
                y: j.y,
                c: j.confidence,
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("skeleton record is always serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with(points: &[(JointId, f64, f64)]) -> SkeletonFrame {
        points
            .iter()
            .fold(SkeletonFrame::new(0, 640, 480), |f, &(id, x, y)| {
                f.with_joint(id, x, y)
            })
    }

    #[test]
    fn distance_examples() {
        let f = frame_with(&[(JointId::Nose, 0.0, 0.0), (JointId::Neck, 3.0, 4.0)]);
        assert_eq!(joint_distance(&f, JointId::Nose, JointId::Neck).unwrap(), 5.0);
        let f = frame_with(&[(JointId::Nose, 10.0, 10.0), (JointId::Neck, 10.0, 10.0)]);
        assert_eq!(joint_distance(&f, JointId::Nose, JointId::Neck).unwrap(), 0.0);
        let f = frame_with(&[(JointId::Nose, 100.0, 50.0), (JointId::Neck, 130.0, 90.0)]);
        assert_eq!(joint_distance(&f, JointId::Nose, JointId::Neck).unwrap(), 50.0);
    }

    #[test]
    fn distance_missing_joint() {
        let f = frame_with(&[(JointId::Nose, 0.0, 0.0)]);
        assert!(matches!(
            joint_distance(&f, JointId::Nose, JointId::LHip),
            Err(Error::MissingJoint(JointId::LHip))
        ));
    }

    fn arm(s: (f64, f64), e: (f64, f64), w: (f64, f64)) -> SkeletonFrame {
        frame_with(&[
            (JointId::RShoulder, s.0, s.1),
            (JointId::RElbow, e.0, e.1),
            (JointId::RWrist, w.0, w.1),
        ])
    }

    #[test]
    fn elbow_angle_examples() {
        let a = elbow_angle(&arm((0.0, 0.0), (0.0, 50.0), (50.0, 50.0)), Side::Right).unwrap();
        assert!((a - 90.0).abs() < 1e-12);
        let a = elbow_angle(&arm((0.0, 0.0), (0.0, 50.0), (0.0, 100.0)), Side::Right).unwrap();
        assert!((a - 180.0).abs() < 1e-12);
        // cos = -1600 / (40 * 50) = -0.8
        let a = elbow_angle(&arm((0.0, 0.0), (40.0, 0.0), (80.0, 30.0)), Side::Right).unwrap();
        assert!((a - 143.130_102_354_155_98).abs() < 1e-9, "{a}");
    }

    #[test]
    fn elbow_angle_degenerate() {
        let f = arm((0.0, 0.0), (0.0, 0.0), (5.0, 5.0));
        assert!(matches!(elbow_angle(&f, Side::Right), Err(Error::DegenerateLimb(_))));
        let f = arm((0.0, 0.0), (0.0, 50.0), (0.0, 50.0 + 1e-7));
        assert!(matches!(elbow_angle(&f, Side::Right), Err(Error::DegenerateLimb(_))));
        assert!(matches!(
            elbow_angle(&f, Side::Left),
            Err(Error::MissingJoint(JointId::LShoulder))
        ));
    }

    fn full_line(skip: Option<usize>) -> String {
        let kps: Vec<String> = (0..JOINT_COUNT)
            .filter(|i| Some(*i) != skip)
            .map(|i| format!(r#"{{"id":{i},"x":{}.5,"y":{},"c":0.9}}"#, i * 10, i * 5))
            .collect();
        format!(
            r#"{{"timestamp_ms":1234,"image_width":960,"image_height":720,"keypoints":[{}]}}"#,
            kps.join(",")
        )
    }

    #[test]
    fn parse_full_record() {
        let f = parse_skeleton_frame(full_line(None).as_bytes()).unwrap();
        assert_eq!(f.timestamp_ms, 1234);
        assert_eq!((f.image_width, f.image_height), (960, 720));
        assert!(f.joints.iter().all(Joint::is_present));
        assert_eq!(f.joint(JointId::LEar).x, 170.5);
    }

    #[test]
    fn parse_omitted_joint_is_missing() {
        let f = parse_skeleton_frame(full_line(Some(16)).as_bytes()).unwrap();
        assert_eq!(f.joint(JointId::REar).confidence, 0.0);
        assert!(f.is_present(JointId::LEar));
    }

    #[test]
    fn parse_positional_requires_eighteen() {
        let kps: Vec<String> = (0..17).map(|_| r#"{"x":1,"y":2,"c":1}"#.to_string()).collect();
        let line = format!(
            r#"{{"timestamp_ms":1,"image_width":10,"image_height":10,"keypoints":[{}]}}"#,
            kps.join(",")
        );
        assert!(matches!(parse_skeleton_frame(line.as_bytes()), Err(Error::Schema(_))));

        let mut kps = kps;
        kps.push(r#"{"x":0,"y":0,"c":0}"#.to_string());
        let line = format!(
            r#"{{"timestamp_ms":1,"image_width":10,"image_height":10,"keypoints":[{}]}}"#,
            kps.join(",")
        );
        let f = parse_skeleton_frame(line.as_bytes()).unwrap();
        assert!(!f.is_present(JointId::LEar));
    }

    #[test]
    fn parse_errors() {
        match parse_skeleton_frame(br#"{"timestamp_ms": x}"#) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 17),
            other => panic!("unexpected {other:?}"),
        }
        let dup = r#"{"timestamp_ms":1,"image_width":10,"image_height":10,"keypoints":[{"id":3,"x":1,"y":2,"c":1},{"id":3,"x":1,"y":2,"c":1}]}"#;
        assert!(matches!(parse_skeleton_frame(dup.as_bytes()), Err(Error::Schema(_))));
        let bad_id = r#"{"timestamp_ms":1,"image_width":10,"image_height":10,"keypoints":[{"id":18,"x":1,"y":2,"c":1}]}"#;
        assert!(matches!(parse_skeleton_frame(bad_id.as_bytes()), Err(Error::Schema(_))));
        let bad_c = r#"{"timestamp_ms":1,"image_width":10,"image_height":10,"keypoints":[{"id":1,"x":1,"y":2,"c":1.5}]}"#;
        assert!(matches!(parse_skeleton_frame(bad_c.as_bytes()), Err(Error::Schema(_))));
        let zero_dims = r#"{"timestamp_ms":1,"image_width":0,"image_height":10,"keypoints":[]}"#;
        assert!(matches!(parse_skeleton_frame(zero_dims.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let mut f = SkeletonFrame::new(99, 960, 720);
        f.person_id = 3;
        f.set(JointId::Nose, Joint::new(0.1 + 0.2, 1.0 / 3.0, 0.75));
        f.set(JointId::LEar, Joint::new(-2.5e-8, 719.999, 0.0));
        let line = serialize_skeleton_frame(&f);
        assert_eq!(parse_skeleton_frame(line.as_bytes()).unwrap(), f);
    }
}
