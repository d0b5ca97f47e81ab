//! A posable 3D stick figure and a pinhole camera that renders it into
//! skeleton frames. Used for generated gesture corpora, console presets and
//! closed-loop scenarios with the simulated drone.
//!
//! World frame as in [`crate::sim`]: `x` east, `y` north, `z` up, cm; yaw
//! and facing are degrees clockwise from `+y`. The head proportions match
//! the synthetic distance data, so head boxes of rendered frames have the
//! nominal face size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::distance::FOCAL_PX;
use crate::gesture::{recognize, Gesture, GestureConfig};
use crate::sim::DroneState;
use crate::skeleton::{Joint, JointId, Side, SkeletonFrame, JOINT_COUNT};
use crate::view::{classify_view, ViewConfig};

pub const IMAGE_WIDTH: u32 = 960;
pub const IMAGE_HEIGHT: u32 = 720;
/// Frontal shoulder width of the figure, cm.
pub const SHOULDER_WIDTH_CM: f64 = 40.0;
const UPPER_ARM_CM: f64 = 30.0;
const FOREARM_CM: f64 = 28.0;
const SHOULDER_HEIGHT_CM: f64 = 148.0;

/// Fixed joints in the body frame (right, forward, up), cm. Arm joints are
/// filled in from the arm poses.
fn body_joint(id: JointId) -> Option<[f64; 3]> {
    Some(match id {
        JointId::Nose => [0.0, 6.4, 160.0],
        JointId::Neck => [0.0, 0.0, 150.0],
        JointId::RShoulder => [SHOULDER_WIDTH_CM / 2.0, 0.0, SHOULDER_HEIGHT_CM],
        JointId::LShoulder => [-SHOULDER_WIDTH_CM / 2.0, 0.0, SHOULDER_HEIGHT_CM],
        // Neck to hip is 48 cm.
        JointId::RHip => [10.0, 0.0, 103.05],
        JointId::LHip => [-10.0, 0.0, 103.05],
        JointId::RKnee => [10.0, 0.0, 55.0],
        JointId::LKnee => [-10.0, 0.0, 55.0],
        JointId::RAnkle => [10.0, 0.0, 10.0],
        JointId::LAnkle => [-10.0, 0.0, 10.0],
        JointId::REye => [3.0, 5.0, 166.0],
        JointId::LEye => [-3.0, 5.0, 166.0],
        JointId::REar => [16.0 / 3.0, 0.0, 163.0],
        JointId::LEar => [-16.0 / 3.0, 0.0, 163.0],
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmPose {
    /// Hanging, slightly away from the body; straight and under.
    Rest,
    /// Upper arm out to the side, forearm up.
    PerpendicularOver,
    /// Upper arm out to the side, forearm down.
    PerpendicularUnder,
    /// Elbow bent 90 degrees with the hand back at shoulder height.
    PerpendicularMiddle,
    /// Straight out to the side.
    StraightMiddle,
    /// Straight, raised 45 degrees above horizontal.
    StraightOver,
    /// Straight out in front of the body.
    ForwardRaise,
}

impl ArmPose {
    /// Upper-arm direction, bend direction and elbow angle, from the
    /// arm's outward, forward and up unit vectors.
    fn geometry(self, out: V3, fwd: V3, up: V3) -> (V3, V3, f64) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (c30, s30) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        match self {
            ArmPose::Rest => (add(scale(out, s30), scale(up, -c30)), add(scale(out, c30), scale(up, s30)), 180.0),
            ArmPose::PerpendicularOver => (out, up, 90.0),
            ArmPose::PerpendicularUnder => (out, scale(up, -1.0), 90.0),
            ArmPose::PerpendicularMiddle => (scale(sub(out, up), s), scale(add(out, up), s), 90.0),
            ArmPose::StraightMiddle => (out, up, 180.0),
            ArmPose::StraightOver => (scale(add(out, up), s), scale(sub(up, out), s), 180.0),
            ArmPose::ForwardRaise => (fwd, scale(out, -1.0), 180.0),
        }
    }
}

/// Arm poses (left, right) that perform `gesture`; `None` is the idle pose.
pub fn gesture_arms(gesture: Option<Gesture>) -> (ArmPose, ArmPose) {
    use ArmPose::*;
    match gesture {
        None => (Rest, Rest),
        Some(g) => match g {
            Gesture::Up => (PerpendicularOver, PerpendicularOver),
            Gesture::Down => (PerpendicularUnder, PerpendicularUnder),
            Gesture::Left => (StraightMiddle, Rest),
            Gesture::Right => (Rest, StraightMiddle),
            Gesture::Forward => (StraightOver, StraightOver),
            Gesture::Backward => (StraightMiddle, StraightMiddle),
            Gesture::Cw => (PerpendicularOver, PerpendicularUnder),
            Gesture::Ccw => (PerpendicularUnder, PerpendicularOver),
            Gesture::Cheese => (PerpendicularMiddle, PerpendicularMiddle),
            Gesture::SideLeft => (ForwardRaise, Rest),
            Gesture::SideRight => (Rest, ForwardRaise),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Person {
    pub id: u32,
    /// Ground position, cm.
    pub position: [f64; 2],
    pub facing_deg: f64,
    pub left: ArmPose,
    pub right: ArmPose,
    /// Extra elbow flexion in degrees, per arm (left, right).
    pub bend_offset_deg: (f64, f64),
}

impl Person {
    pub fn new(id: u32, position: [f64; 2], facing_deg: f64) -> Self {
        Person {
            id,
            position,
            facing_deg,
            left: ArmPose::Rest,
            right: ArmPose::Rest,
            bend_offset_deg: (0.0, 0.0),
        }
    }

    pub fn with_gesture(mut self, gesture: Option<Gesture>) -> Self {
        (self.left, self.right) = gesture_arms(gesture);
        self
    }

    /// Faces a point. Side gestures are shown in profile instead: the
    /// gesturing arm's shoulder points at the viewer.
    pub fn facing_viewer(mut self, viewer: [f64; 2], gesture: Option<Gesture>) -> Self {
        let toward = bearing_deg(self.position, viewer);
        self.facing_deg = match gesture {
            Some(Gesture::SideLeft) => toward + 90.0,
            Some(Gesture::SideRight) => toward - 90.0,
            _ => toward,
        };
        self.with_gesture(gesture)
    }

    /// Unit forward, right and up vectors of the body in world coordinates.
    fn axes(&self) -> (V3, V3, V3) {
        let (s, c) = self.facing_deg.to_radians().sin_cos();
        ([s, c, 0.0], [c, -s, 0.0], [0.0, 0.0, 1.0])
    }

    pub fn joints_world(&self) -> [[f64; 3]; JOINT_COUNT] {
        let (fwd, right, up) = self.axes();
        let origin = [self.position[0], self.position[1], 0.0];
        let place = |b: [f64; 3]| add(origin, add(add(scale(right, b[0]), scale(fwd, b[1])), scale(up, b[2])));
        let mut out = [[0.0; 3]; JOINT_COUNT];
        for id in JointId::ALL {
            if let Some(b) = body_joint(id) {
                out[id.index()] = place(b);
            }
        }
        for (side, pose, extra) in [
            (Side::Left, self.left, self.bend_offset_deg.0),
            (Side::Right, self.right, self.bend_offset_deg.1),
        ] {
            let outward = if side == Side::Right { right } else { scale(right, -1.0) };
            let (a, k, alpha) = pose.geometry(outward, fwd, up);
            let theta = ((180.0 - alpha) + extra).abs().to_radians();
            let b = add(scale(a, theta.cos()), scale(k, theta.sin()));
            let shoulder = out[side.shoulder().index()];
            let elbow = add(shoulder, scale(a, UPPER_ARM_CM));
            out[side.elbow().index()] = elbow;
            out[side.wrist().index()] = add(elbow, scale(b, FOREARM_CM));
        }
        out
    }

    /// Projects the figure. Joints behind the camera or outside the image
    /// are reported missing.
    pub fn render(&self, camera: &Camera, timestamp_ms: u64) -> SkeletonFrame {
        let mut frame = SkeletonFrame::new(timestamp_ms, camera.width, camera.height);
        frame.person_id = self.id;
        for (i, p) in self.joints_world().iter().enumerate() {
            if let (Some(id), Some((u, v))) = (JointId::from_index(i), camera.project(*p)) {
                frame.set(id, Joint::at(u, v));
            }
        }
        frame
    }
}

/// Heading from `from` toward `to`, degrees clockwise from `+y`.
pub fn bearing_deg(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[0] - from[0]).atan2(to[1] - from[1]).to_degrees()
}

/// Forward-looking pinhole camera with no roll or pitch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: [f64; 3],
    pub yaw_deg: f64,
    pub focal_px: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(position: [f64; 3], yaw_deg: f64) -> Self {
        Camera {
            position,
            yaw_deg,
            focal_px: FOCAL_PX,
            width: IMAGE_WIDTH,
            height: IMAGE_HEIGHT,
        }
    }

    /// The drone's front camera.
    pub fn from_drone(state: &DroneState) -> Self {
        Camera::new([state.x, state.y, state.z], state.yaw)
    }

    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64)> {
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        let d = sub(p, self.position);
        let depth = d[0] * s + d[1] * c;
        if depth <= 1.0 {
            return None;
        }
        let lateral = d[0] * c - d[1] * s;
        let u = self.width as f64 / 2.0 + self.focal_px * lateral / depth;
        let v = self.height as f64 / 2.0 - self.focal_px * d[2] / depth;
        let inside = (0.0..=self.width as f64).contains(&u) && (0.0..=self.height as f64).contains(&v);
        inside.then_some((u, v))
    }
}

/// Noise model for generated gesture corpora.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    /// Joint jitter standard deviation as a fraction of the frontal
    /// shoulder width at the sampled distance.
    pub jitter_frac: f64,
    /// Elbow flexion perturbation, uniform in ±this many degrees.
    pub angle_perturb_deg: f64,
    pub distance_cm: (f64, f64),
    /// Uniform turn of the body away from facing the camera, ±degrees.
    pub front_yaw_spread_deg: f64,
    pub side_yaw_spread_deg: f64,
    pub camera_height_cm: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            jitter_frac: 0.03,
            angle_perturb_deg: 10.0,
            distance_cm: (150.0, 300.0),
            front_yaw_spread_deg: 15.0,
            side_yaw_spread_deg: 3.0,
            camera_height_cm: 140.0,
        }
    }
}

/// Adds isotropic Gaussian noise of `sigma_px` to every present joint.
pub fn jitter_frame(frame: &SkeletonFrame, sigma_px: f64, rng: &mut impl Rng) -> SkeletonFrame {
    let mut out = frame.clone();
    if sigma_px <= 0.0 {
        return out;
    }
    let noise = Normal::new(0.0, sigma_px).expect("finite sigma");
    for j in out.joints.iter_mut().filter(|j| j.is_present()) {
        j.x += noise.sample(rng);
        j.y += noise.sample(rng);
    }
    out
}

/// `per_gesture` labeled frames for each of the 11 gestures, rendered from
/// a camera at the origin facing `+y` with the person at a random distance.
pub fn gesture_corpus(per_gesture: usize, seed: u64, cfg: &CorpusConfig) -> Vec<(Gesture, SkeletonFrame)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let camera = Camera::new([0.0, 0.0, cfg.camera_height_cm], 0.0);
    let mut out = Vec::with_capacity(per_gesture * Gesture::ALL.len());
    let mut t = 0;
    for g in Gesture::ALL {
        for _ in 0..per_gesture {
            let d = rng.random_range(cfg.distance_cm.0..=cfg.distance_cm.1);
            let spread = if g.is_side() {
                cfg.side_yaw_spread_deg
            } else {
                cfg.front_yaw_spread_deg
            };
            let mut p = Person::new(0, [0.0, d], 0.0).facing_viewer([0.0, 0.0], Some(g));
            p.facing_deg += rng.random_range(-spread..=spread);
            let a = cfg.angle_perturb_deg;
            p.bend_offset_deg = (rng.random_range(-a..=a), rng.random_range(-a..=a));
            let sigma = cfg.jitter_frac * FOCAL_PX * SHOULDER_WIDTH_CM / d;
            out.push((g, jitter_frame(&p.render(&camera, t), sigma, &mut rng)));
            t += 33;
        }
    }
    out
}

/// Single-frame recognition accuracy per gesture, in `Gesture::ALL` order.
pub fn corpus_accuracy(corpus: &[(Gesture, SkeletonFrame)], view: &ViewConfig, gesture: &GestureConfig) -> Vec<(Gesture, f64)> {
    Gesture::ALL
        .iter()
        .map(|&g| {
            let frames: Vec<_> = corpus.iter().filter(|(l, _)| *l == g).map(|(_, f)| f).collect();
            let hits = frames
                .iter()
                .filter(|f| recognize(f, classify_view(f, view), gesture) == Some(g))
                .count();
            (g, hits as f64 / frames.len().max(1) as f64)
        })
        .collect()
}

/// Noiseless reference pose for `gesture` (or idle) two meters in front of
/// the camera.
pub fn preset_frame(gesture: Option<Gesture>, timestamp_ms: u64) -> SkeletonFrame {
    let camera = Camera::new([0.0, 0.0, 140.0], 0.0);
    Person::new(0, [0.0, 200.0], 0.0)
        .facing_viewer([0.0, 0.0], gesture)
        .render(&camera, timestamp_ms)
}

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: V3, k: f64) -> V3 {
    [a[0] * k, a[1] * k, a[2] * k]
}
