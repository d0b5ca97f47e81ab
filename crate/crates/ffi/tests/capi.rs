use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pose2flight::distance::{generate_synthetic_dataset, DistanceModel, TrainConfig};
use pose2flight::gesture::Gesture;
use pose2flight::scene::preset_frame;
use pose2flight::skeleton::serialize_skeleton_frame;
use pose2flight_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    let n = unsafe { p2f_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n >= 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn parse(line: &str) -> *mut P2fFrame {
    let c = CString::new(line).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { p2f_frame_parse(c.as_ptr(), &mut f) }, P2fStatus::Ok);
    f
}

#[test]
fn perception_through_the_c_abi() {
    let f = parse(&serialize_skeleton_frame(&preset_frame(Some(Gesture::Up), 0)));
    let mut view = -9;
    assert_eq!(unsafe { p2f_classify_view(f, 0.5, &mut view) }, P2fStatus::Ok);
    assert_eq!(view, P2F_VIEW_FRONT);
    let mut g = -9;
    assert_eq!(unsafe { p2f_recognize(f, view, 0.2, &mut g) }, P2fStatus::Ok);
    assert_eq!(g, P2F_GESTURE_UP);
    let name = unsafe { CStr::from_ptr(p2f_gesture_name(g)) };
    assert_eq!(name.to_str().unwrap(), "up");
    assert!(p2f_gesture_name(42).is_null());

    let mut b = P2fBBox::default();
    assert_eq!(unsafe { p2f_head_bbox(f, &mut b) }, P2fStatus::Ok);
    assert!(b.x_max > b.x_min && b.y_max > b.y_min);

    let (mut x, mut y, mut c) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { p2f_frame_joint(f, 1, &mut x, &mut y, &mut c) }, P2fStatus::Ok);
    assert!(c > 0.0);
    assert_eq!(unsafe { p2f_frame_joint(f, 18, &mut x, &mut y, &mut c) }, P2fStatus::OutOfRange);
    unsafe { p2f_frame_free(f) };
}

#[test]
fn errors_and_nulls() {
    let mut f = ptr::null_mut();
    let bad = CString::new("{oops").unwrap();
    assert_eq!(unsafe { p2f_frame_parse(bad.as_ptr(), &mut f) }, P2fStatus::Parse);
    assert!(f.is_null());
    assert!(last_error().contains("parse error"));
    assert_eq!(unsafe { p2f_frame_parse(ptr::null(), &mut f) }, P2fStatus::NullPointer);
    let mut v = 0;
    assert_eq!(unsafe { p2f_classify_view(ptr::null(), 0.5, &mut v) }, P2fStatus::NullPointer);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { p2f_stability_new(0, 625, &mut s) }, P2fStatus::OutOfRange);
    unsafe {
        p2f_frame_free(ptr::null_mut());
        p2f_stability_free(ptr::null_mut());
        p2f_drone_free(ptr::null_mut());
        p2f_distance_model_free(ptr::null_mut());
    }
}

#[test]
fn stability_filter_handle() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { p2f_stability_new(3, 625, &mut s) }, P2fStatus::Ok);
    let mut events = Vec::new();
    for (i, t) in [0u64, 33, 66, 99].iter().enumerate() {
        let mut ev = 0;
        assert_eq!(unsafe { p2f_stability_step(s, P2F_GESTURE_CW, *t, &mut ev) }, P2fStatus::Ok);
        events.push((i, ev));
    }
    assert_eq!(events, vec![(0, -1), (1, -1), (2, P2F_GESTURE_CW), (3, -1)]);
    let mut ev = 0;
    assert_eq!(unsafe { p2f_stability_step(s, P2F_GESTURE_CW, 10, &mut ev) }, P2fStatus::OutOfRange);
    unsafe { p2f_stability_free(s) };
}

#[test]
fn distance_readout_and_model() {
    let p = [0.5, 0.45, 0.05, 0.0, 0.0];
    let mut cm = 0.0;
    assert_eq!(unsafe { p2f_continuous_distance(p.as_ptr(), &mut cm) }, P2fStatus::Ok);
    assert!((cm - 123.684_210_526_315_8).abs() < 1e-9);

    let data = generate_synthetic_dataset(60, 0.05, 3);
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let (model, _) = DistanceModel::train(&data, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    model.save(&path).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { p2f_distance_model_load(cpath.as_ptr(), &mut m) }, P2fStatus::Ok);
    let f = parse(&serialize_skeleton_frame(&preset_frame(None, 0)));
    let mut post = [0.0; P2F_NUM_CLASSES];
    assert_eq!(unsafe { p2f_distance_estimate(m, f, P2F_VIEW_FRONT, &mut cm, post.as_mut_ptr()) }, P2fStatus::Ok);
    assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!((100.0..=300.0).contains(&cm));
    unsafe {
        p2f_frame_free(f);
        p2f_distance_model_free(m);
    }

    let missing = CString::new(dir.path().join("none.bin").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { p2f_distance_model_load(missing.as_ptr(), &mut m) }, P2fStatus::Io);
}

fn send(d: *mut P2fDrone, cmd: &str) -> (String, bool) {
    let c = CString::new(cmd).unwrap();
    let mut buf = [0 as c_char; 64];
    let mut deferred = false;
    assert_eq!(unsafe { p2f_drone_command(d, c.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut deferred) }, P2fStatus::Ok);
    (unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned(), deferred)
}

#[test]
fn drone_session() {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { p2f_drone_new(0, &mut d) }, P2fStatus::Ok);
    assert_eq!(send(d, "takeoff"), ("error".into(), false));
    assert_eq!(send(d, "command"), ("ok".into(), false));
    assert_eq!(send(d, "takeoff"), (String::new(), true));
    let mut done = 0;
    assert_eq!(unsafe { p2f_drone_advance(d, 10_000, &mut done) }, P2fStatus::Ok);
    assert_eq!(done, 1);
    let mut st = P2fDroneState::default();
    assert_eq!(unsafe { p2f_drone_state(d, &mut st) }, P2fStatus::Ok);
    assert!(st.flying && (st.z - 80.0).abs() < 1.0);
    assert_eq!(send(d, "battery?").0, "98");

    let mut small = [0 as c_char; 4];
    assert_eq!(unsafe { p2f_drone_telemetry(d, small.as_mut_ptr(), small.len()) }, P2fStatus::BufferTooSmall);
    let mut buf = [0 as c_char; 256];
    assert_eq!(unsafe { p2f_drone_telemetry(d, buf.as_mut_ptr(), buf.len()) }, P2fStatus::Ok);
    let t = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    assert!(t.starts_with("pitch:0;roll:0;yaw:0;") && t.ends_with(";\r\n"), "{t:?}");
    unsafe { p2f_drone_free(d) };
}

/// Builds and runs a C program against the generated header and the
/// static library, when a C compiler is available.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("pose2flight.h").is_file(), "header not generated");
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libpose2flight_ffi.a");
    if !lib.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("capi_smoke.c");
    let bin = tmp.join("capi_smoke");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "pose2flight.h"
int main(void) {
    P2fDrone *d = NULL;
    char reply[64];
    bool deferred = false;
    if (p2f_drone_new(1, &d) != P2F_STATUS_OK) return 1;
    if (p2f_drone_command(d, "command", reply, sizeof reply, &deferred) != P2F_STATUS_OK) return 2;
    if (strcmp(reply, "ok") != 0) return 3;
    double post[P2F_NUM_CLASSES] = {0.2, 0.2, 0.2, 0.2, 0.2};
    double cm = 0;
    if (p2f_continuous_distance(post, &cm) != P2F_STATUS_OK || cm != 200.0) return 4;
    P2fFrame *f = NULL;
    if (p2f_frame_parse("{bad", &f) != P2F_STATUS_PARSE) return 5;
    char msg[256];
    if (p2f_last_error(msg, sizeof msg) <= 0) return 6;
    p2f_drone_free(d);
    printf("%s\n", p2f_version());
    return 0;
}
"#,
    )
    .unwrap();
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
