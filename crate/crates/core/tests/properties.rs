use ndarray::Array2;
use proptest::prelude::*;

use pose2flight::bus::{Bus, Envelope, Message, Topic, ViewMsg};
use pose2flight::control::{pid_step, FaceInput, FaceTracker, FaceTrackingGains, PidGains, PidState, VelocityCommand};
use pose2flight::distance::{continuous_distance, softmax, Architecture, DistanceModel, CLASS_CM};
use pose2flight::gesture::{classify_gesture, AngleState, ArmState, Gesture, PositionState};
use pose2flight::head::{head_bbox_unclamped, select_user, BBox, Candidate, FirstMatcher, NoMatcher, TrackState};
use pose2flight::sim::{Drone, SimConfig};
use pose2flight::skeleton::{
    elbow_angle, joint_distance, parse_skeleton_frame, serialize_skeleton_frame, Joint, JointId, Side,
    SkeletonFrame, JOINT_COUNT,
};
use pose2flight::stability::{StabilityConfig, StabilityFilter};
use pose2flight::view::{classify_view, ViewClass, ViewConfig};

fn joint() -> impl Strategy<Value = Joint> {
    prop_oneof![
        1 => Just(Joint::MISSING),
        6 => (0.0..960.0f64, 0.0..720.0f64, 0.01..1.0f64).prop_map(|(x, y, c)| Joint::new(x, y, c)),
    ]
}

fn frame() -> impl Strategy<Value = SkeletonFrame> {
    (
        0u64..10_000_000,
        0u32..4,
        proptest::collection::vec(joint(), JOINT_COUNT),
    )
        .prop_map(|(t, person, joints)| {
            let mut f = SkeletonFrame::new(t, 960, 720);
            f.person_id = person;
            f.joints.copy_from_slice(&joints);
            f
        })
}

fn full_frame() -> impl Strategy<Value = SkeletonFrame> {
    proptest::collection::vec((0.0..960.0f64, 0.0..720.0f64), JOINT_COUNT).prop_map(|pts| {
        let mut f = SkeletonFrame::new(0, 960, 720);
        for (j, (x, y)) in f.joints.iter_mut().zip(pts) {
            *j = Joint::at(x, y);
        }
        f
    })
}

fn arm_state() -> impl Strategy<Value = ArmState> {
    let a = prop_oneof![
        Just(AngleState::Perpendicular),
        Just(AngleState::Straight),
        Just(AngleState::None)
    ];
    let p = prop_oneof![
        Just(PositionState::Over),
        Just(PositionState::Under),
        Just(PositionState::Middle)
    ];
    (a, p).prop_map(|(a, p)| ArmState::new(a, p))
}

fn view() -> impl Strategy<Value = ViewClass> {
    prop::sample::select(ViewClass::ALL.to_vec())
}

fn gesture() -> impl Strategy<Value = Option<Gesture>> {
    prop_oneof![1 => Just(None), 4 => prop::sample::select(Gesture::ALL.to_vec()).prop_map(Some)]
}

fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn distance_is_symmetric_and_triangular(f in full_frame(), i in 0usize..18, j in 0usize..18, k in 0usize..18) {
        let id = |n| JointId::from_index(n).unwrap();
        let d = |a, b| joint_distance(&f, id(a), id(b)).unwrap();
        prop_assert_eq!(d(i, k), d(k, i));
        prop_assert!(d(i, k) <= d(i, j) + d(j, k) + 1e-9);
    }

    #[test]
    fn elbow_angle_survives_scale_and_rotation(
        f in full_frame(),
        s in 0.05..20.0f64,
        theta in -std::f64::consts::PI..std::f64::consts::PI,
    ) {
        let (sin, cos) = theta.sin_cos();
        let g = f.map_coords(|x, y| (s * (x * cos - y * sin), s * (x * sin + y * cos)));
        for side in [Side::Left, Side::Right] {
            if let (Ok(a), Ok(b)) = (elbow_angle(&f, side), elbow_angle(&g, side)) {
                prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn serialize_then_parse(f in frame()) {
        let g = parse_skeleton_frame(serialize_skeleton_frame(&f).as_bytes()).unwrap();
        prop_assert_eq!(g.timestamp_ms, f.timestamp_ms);
        prop_assert_eq!(g.person_id, f.person_id);
        prop_assert_eq!((g.image_width, g.image_height), (f.image_width, f.image_height));
        for (a, b) in f.joints.iter().zip(&g.joints) {
            prop_assert_eq!(a.is_present(), b.is_present());
            if a.is_present() {
                prop_assert!(rel_eq(a.x, b.x, 1e-9) && rel_eq(a.y, b.y, 1e-9) && rel_eq(a.confidence, b.confidence, 1e-9));
            }
        }
    }

    #[test]
    fn view_is_scale_invariant(f in frame(), s in prop::sample::select(vec![0.1, 1.0, 10.0])) {
        let cfg = ViewConfig::default();
        prop_assert_eq!(classify_view(&f, &cfg), classify_view(&f.map_coords(|x, y| (x * s, y * s)), &cfg));
    }

    #[test]
    fn mirroring_swaps_front_and_back(f in frame()) {
        let cfg = ViewConfig::default();
        prop_assume!(f.joint(JointId::REar).x != f.joint(JointId::LEar).x);
        let w = f.image_width as f64;
        let m = f.map_coords(|x, y| (w - x, y));
        let want = match classify_view(&f, &cfg) {
            ViewClass::Front => ViewClass::Back,
            ViewClass::Back => ViewClass::Front,
            v => v,
        };
        prop_assert_eq!(classify_view(&m, &cfg), want);
    }

    #[test]
    fn gesture_mirror_symmetry(l in arm_state(), r in arm_state(), v in view()) {
        prop_assert_eq!(classify_gesture(r, l, v), classify_gesture(l, r, v).map(Gesture::mirrored));
    }

    #[test]
    fn stability_events_come_from_recent_inputs(
        inputs in proptest::collection::vec((gesture(), 0u64..200), 1..120),
        n in 1u32..5,
        cooldown in 0u64..1000,
    ) {
        let mut f = StabilityFilter::new(StabilityConfig::new(n, cooldown).unwrap());
        let mut t = 0;
        let mut seen: Vec<Option<Gesture>> = Vec::new();
        for (g, dt) in inputs {
            t += dt;
            seen.push(g);
            if let Some(ev) = f.step(g, t).unwrap() {
                let recent = &seen[seen.len().saturating_sub(n as usize)..];
                prop_assert!(recent.len() == n as usize && recent.iter().all(|r| *r == Some(ev.gesture)));
                prop_assert_eq!(ev.timestamp_ms, t);
            }
        }
    }

    #[test]
    fn stability_passthrough_emits_every_change(inputs in proptest::collection::vec(gesture(), 1..100)) {
        let mut f = StabilityFilter::new(StabilityConfig::new(1, 0).unwrap());
        let mut prev = None;
        for (t, g) in inputs.into_iter().enumerate() {
            let ev = f.step(g, t as u64).unwrap();
            if g.is_some() && g != prev {
                prop_assert_eq!(ev.map(|e| e.gesture), g);
            }
            prev = g;
        }
    }

    #[test]
    fn head_box_contains_joints_and_scales(f in frame(), s in 0.1..10.0f64) {
        if let Ok(b) = head_bbox_unclamped(&f) {
            for id in JointId::HEAD {
                let j = f.joint(id);
                if j.is_present() {
                    prop_assert!(b.contains(j.x, j.y));
                }
            }
            let bs = head_bbox_unclamped(&f.map_coords(|x, y| (x * s, y * s))).unwrap();
            prop_assert!(rel_eq(bs.width(), s * b.width(), 1e-6));
            prop_assert!(rel_eq(bs.height(), s * b.height(), 1e-6));
        }
    }

    #[test]
    fn user_selection_is_deterministic(
        boxes in proptest::collection::vec((0.0..900.0f64, 0.0..600.0f64, 10.0..60.0f64), 1..6),
        last in (0.0..900.0f64, 0.0..600.0f64),
        first in any::<bool>(),
    ) {
        let candidates: Vec<Candidate> = boxes
            .iter()
            .enumerate()
            .map(|(i, &(x, y, s))| Candidate {
                person_id: i as u32,
                bbox: BBox { x_min: x, x_max: x + s, y_min: y, y_max: y + s },
            })
            .collect();
        let state = TrackState {
            last_matched_box: Some(BBox { x_min: last.0, x_max: last.0 + 20.0, y_min: last.1, y_max: last.1 + 20.0 }),
            last_match_timestamp: 0,
        };
        let pick = |state: &TrackState| {
            let mut s = state.clone();
            let id = if first {
                select_user(&candidates, &FirstMatcher, &mut s, 100)
            } else {
                select_user(&candidates, &NoMatcher, &mut s, 100)
            };
            (id, s)
        };
        prop_assert_eq!(pick(&state), pick(&state));
        if first {
            prop_assert_eq!(pick(&state).0, Some(0));
        }
    }

    #[test]
    fn readout_is_bounded_by_surviving_classes(raw in proptest::array::uniform5(0.0..1.0f64)) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let p = raw.map(|v| v / total);
        let top = p.iter().copied().fold(f64::MIN, f64::max);
        let surviving: Vec<f64> = (0..5).filter(|&i| top - p[i] < 0.1).map(|i| CLASS_CM[i]).collect();
        let d = continuous_distance(&p);
        let lo = surviving.iter().copied().fold(f64::MAX, f64::min);
        let hi = surviving.iter().copied().fold(f64::MIN, f64::max);
        prop_assert!(d >= lo - 1e-9 && d <= hi + 1e-9);
        if surviving.len() == 1 {
            prop_assert_eq!(d, surviving[0]);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(seed in 0u64..1000, rows in proptest::collection::vec(proptest::array::uniform7(-50.0..50.0f64), 1..8)) {
        let model = DistanceModel::initialize(Architecture::with_hidden(vec![8, 8]), seed).unwrap();
        for p in model.predict_batch(&rows).unwrap() {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let logits = Array2::from_shape_fn((rows.len(), 5), |(i, j)| rows[i][j] * 20.0);
        for row in softmax(&logits).outer_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pid_is_linear_in_gains(
        kp in 0.0..5.0f64, ki in 0.0..2.0f64, kd in 0.0..2.0f64, a in 0.01..10.0f64,
        errors in proptest::collection::vec(-80.0..80.0f64, 1..30),
    ) {
        let g = PidGains::new(kp, ki, kd);
        let (mut s1, mut s2) = (PidState::default(), PidState::default());
        for (i, e) in errors.iter().enumerate() {
            let t = 50 * i as u64;
            let u = pid_step(&g, &mut s1, *e, 0.0, t).unwrap();
            let ua = pid_step(&g.scaled(a), &mut s2, *e, 0.0, t).unwrap();
            prop_assert!((ua - a * u).abs() <= 1e-9 * ua.abs().max(1.0), "{} vs {}", ua, a * u);
        }
    }

    #[test]
    fn velocity_channels_stay_clamped(
        inputs in proptest::collection::vec((-5000.0..5000.0f64, -5000.0..5000.0f64, 0.0..2000.0f64), 1..40),
        gain in 0.1..50.0f64,
    ) {
        let mut gains = FaceTrackingGains::default();
        gains.yaw = gains.yaw.scaled(gain);
        gains.vertical = gains.vertical.scaled(gain);
        let mut t = FaceTracker::new(gains);
        for (i, (x, y, d)) in inputs.into_iter().enumerate() {
            let now = 50 * i as u64;
            let cmd = t.update(Some(&FaceInput {
                face_center: (x, y),
                face_timestamp_ms: now,
                frame_dims: (960, 720),
                distance_cm: Some(d),
                distance_timestamp_ms: now,
            }), 150.0, now).unwrap();
            prop_assert!(cmd.channels().iter().all(|c| c.abs() <= 100.0));
        }
        let wild = VelocityCommand { lateral: f64::NAN, longitudinal: 1e9, vertical: -1e9, yaw_rate: 3.0 }.clamped();
        prop_assert_eq!(wild.channels(), [0.0, 100.0, -100.0, 3.0]);
    }

    #[test]
    fn sim_hover_is_still_and_never_underground(
        z in 20.0..300.0f64, yaw in -180.0..180.0f64,
        steps in proptest::collection::vec((-100i32..=100, -100i32..=100, -100i32..=100, 1u32..=100), 1..40),
    ) {
        let mut d = Drone::hovering(SimConfig::default(), 10.0, -5.0, z, yaw);
        d.advance(5000, 10);
        let s = d.state();
        prop_assert_eq!((s.x, s.y, s.z, s.yaw), (10.0, -5.0, z, yaw));
        for (lat, lon, vert, dt) in steps {
            d.handle(&format!("rc {lat} {lon} {vert} 0"));
            d.tick(dt);
            prop_assert!(d.state().z >= 0.0);
        }
    }

    #[test]
    fn sim_replay_is_bit_identical(
        cmds in proptest::collection::vec(prop::sample::select(vec![
            "up 30", "down 20", "cw 45", "ccw 30", "forward 40", "left 25", "rc 10 -20 30 15", "rc 0 0 0 0", "battery?",
        ]), 1..10),
        jitter in 0.0..5.0f64,
        seed in any::<u64>(),
    ) {
        let run = || {
            let cfg = SimConfig { velocity_jitter: jitter, seed, ..SimConfig::default() };
            let mut d = Drone::hovering(cfg, 0.0, 0.0, 120.0, 0.0);
            let mut trace = Vec::new();
            for c in &cmds {
                d.handle(c);
                for _ in 0..60 {
                    d.tick(10);
                    trace.push(*d.state());
                }
            }
            trace
        };
        let (a, b) = (run(), run());
        let bits = |t: &[pose2flight::sim::DroneState]| -> Vec<u64> {
            t.iter()
                .flat_map(|s| [s.x, s.y, s.z, s.yaw, s.velocity[0], s.velocity[1], s.velocity[2], s.yaw_rate, s.battery])
                .map(f64::to_bits)
                .collect()
        };
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn bus_is_fifo_and_bounded(
        ops in proptest::collection::vec((0usize..3, 0u32..100), 1..300),
        cap in 1usize..16,
    ) {
        let topics = [Topic::View, Topic::Gesture, Topic::Cmd];
        let bus = Bus::with_all_topics(cap);
        let all = bus.subscribe(&topics).unwrap();
        let views = bus.subscribe_with_cap(&[Topic::View], cap).unwrap();
        let mut last_seq = [None::<u64>; 3];
        for (i, (k, id)) in ops.into_iter().enumerate() {
            let msg = match k {
                0 => Message::View(ViewMsg { person_id: id, view: ViewClass::Front }),
                1 => Message::Gesture(pose2flight::stability::GestureEvent {
                    gesture: Gesture::Up, timestamp_ms: i as u64, stable_count: 3,
                }),
                _ => Message::Cmd(pose2flight::sim::TelloCommand::Land),
            };
            bus.publish(topics[k], i as u64, msg).unwrap();
            prop_assert!(all.len() <= cap && views.len() <= cap);
            if id % 7 == 0 {
                for env in all.drain() {
                    let slot = topics.iter().position(|t| *t == env.topic).unwrap();
                    prop_assert!(last_seq[slot].is_none_or(|s| env.seq > s));
                    last_seq[slot] = Some(env.seq);
                }
            }
        }
        prop_assert!(all.max_depth() <= cap && views.max_depth() <= cap);
    }

    #[test]
    fn envelopes_round_trip_through_log_lines(ts in any::<u64>(), seq in 0u64..1_000_000, id in any::<u32>(), f in frame()) {
        for (topic, message) in [
            (Topic::View, Message::View(ViewMsg { person_id: id, view: ViewClass::Side })),
            (Topic::Skeleton, Message::Skeleton(f.clone())),
        ] {
            let env = Envelope { topic, timestamp_ms: ts, seq, message };
            let back = Envelope::from_log_line(&env.to_log_line()).unwrap();
            prop_assert_eq!(back.topic, env.topic);
            prop_assert_eq!(back.timestamp_ms, env.timestamp_ms);
            prop_assert_eq!(back.message.to_json(), env.message.to_json());
        }
    }
}

#[test]
fn gesture_table_is_injective_on_front_view() {
    let angles = [AngleState::Perpendicular, AngleState::Straight];
    let positions = [PositionState::Over, PositionState::Under, PositionState::Middle];
    let arms: Vec<ArmState> = angles
        .iter()
        .flat_map(|&a| positions.iter().map(move |&p| ArmState::new(a, p)))
        .collect();
    for g in Gesture::ALL {
        let hits = arms
            .iter()
            .flat_map(|&l| arms.iter().map(move |&r| (l, r)))
            .filter(|&(l, r)| classify_gesture(l, r, ViewClass::Front) == Some(g))
            .count();
        assert_eq!(hits, usize::from(!g.is_side()), "{g}");
    }
}
