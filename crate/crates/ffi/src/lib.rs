//! C ABI over the pose2flight core.
//!
//! Every fallible call returns a `P2fStatus`; on failure the message is
//! available from `p2f_last_error` on the same thread. Objects are opaque
//! handles created by `*_new`/`*_parse`/`*_load` and released with the
//! matching `*_free`, which accepts NULL.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pose2flight::distance::{build_features, continuous_distance, DistanceModel, NUM_CLASSES};
use pose2flight::gesture::{recognize, Gesture, GestureConfig};
use pose2flight::head::head_bbox;
use pose2flight::sim::{telemetry, Drone, Reply, SimConfig};
use pose2flight::skeleton::{parse_skeleton_frame, JointId, SkeletonFrame, JOINT_COUNT};
use pose2flight::stability::{StabilityConfig, StabilityFilter};
use pose2flight::view::{classify_view, ViewClass, ViewConfig};
use pose2flight::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P2fStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Schema = 4,
    MissingJoint = 5,
    OutOfRange = 6,
    Model = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
    Other = 99,
}

/// View codes: 0 front, 1 side, 2 back, 3 ambiguous.
pub const P2F_VIEW_FRONT: i32 = 0;
pub const P2F_VIEW_SIDE: i32 = 1;
pub const P2F_VIEW_BACK: i32 = 2;
pub const P2F_VIEW_AMBIGUOUS: i32 = 3;
/// Gesture code meaning "no gesture".
pub const P2F_GESTURE_NONE: i32 = -1;
pub const P2F_GESTURE_UP: i32 = 0;
pub const P2F_GESTURE_DOWN: i32 = 1;
pub const P2F_GESTURE_LEFT: i32 = 2;
pub const P2F_GESTURE_RIGHT: i32 = 3;
pub const P2F_GESTURE_FORWARD: i32 = 4;
pub const P2F_GESTURE_BACKWARD: i32 = 5;
pub const P2F_GESTURE_CW: i32 = 6;
pub const P2F_GESTURE_CCW: i32 = 7;
pub const P2F_GESTURE_CHEESE: i32 = 8;
pub const P2F_GESTURE_SIDE_LEFT: i32 = 9;
pub const P2F_GESTURE_SIDE_RIGHT: i32 = 10;
/// Length of a distance posterior.
pub const P2F_NUM_CLASSES: usize = 5;
const _: () = assert!(P2F_NUM_CLASSES == NUM_CLASSES);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct P2fBBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct P2fDroneState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub battery: f64,
    pub flying: bool,
    pub sim_time_ms: u64,
}

/// Opaque skeleton frame.
pub struct P2fFrame(SkeletonFrame);
/// Opaque temporal stability filter.
pub struct P2fStability(StabilityFilter);
/// Opaque distance model.
pub struct P2fDistanceModel(DistanceModel);
/// Opaque simulated drone.
pub struct P2fDrone(Drone);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> P2fStatus {
    match e {
        Error::Parse { .. } | Error::ParseLine { .. } | Error::UnknownCommand(_) => P2fStatus::Parse,
        Error::Schema(_) | Error::SchemaMismatch { .. } | Error::UnknownTopic(_) => P2fStatus::Schema,
        Error::MissingJoint(_) | Error::InsufficientJoints(_) | Error::DegenerateLimb(_) => P2fStatus::MissingJoint,
        Error::OutOfRange(_) | Error::Config(_) | Error::ClockSkew { .. } => P2fStatus::OutOfRange,
        Error::UninitializedModel | Error::ModelFormat(_) | Error::DegenerateDataset(_) => P2fStatus::Model,
        Error::Io(_) => P2fStatus::Io,
        #[allow(unreachable_patterns)]
        _ => P2fStatus::Other,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (P2fStatus, String)>) -> P2fStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => P2fStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            P2fStatus::Panic
        }
    }
}

fn core(e: Error) -> (P2fStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (P2fStatus, String) {
    (P2fStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (P2fStatus, String)> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (P2fStatus, String)> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (P2fStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| (P2fStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn write_cstr(s: &str, buf: *mut c_char, len: usize) -> Result<(), (P2fStatus, String)> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if s.len() + 1 > len {
        return Err((P2fStatus::BufferTooSmall, format!("need {} bytes", s.len() + 1)));
    }
    unsafe {
        ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
        *buf.add(s.len()) = 0;
    }
    Ok(())
}

fn view_code(v: ViewClass) -> i32 {
    match v {
        ViewClass::Front => P2F_VIEW_FRONT,
        ViewClass::Side => P2F_VIEW_SIDE,
        ViewClass::Back => P2F_VIEW_BACK,
        ViewClass::Ambiguous => P2F_VIEW_AMBIGUOUS,
    }
}

fn view_from_code(code: i32) -> Result<ViewClass, (P2fStatus, String)> {
    ViewClass::ALL
        .get(usize::try_from(code).unwrap_or(usize::MAX))
        .copied()
        .ok_or_else(|| (P2fStatus::OutOfRange, format!("bad view code {code}")))
}

fn gesture_code(g: Option<Gesture>) -> i32 {
    g.and_then(|g| Gesture::ALL.iter().position(|x| *x == g))
        .map_or(P2F_GESTURE_NONE, |i| i as i32)
}

fn gesture_from_code(code: i32) -> Result<Option<Gesture>, (P2fStatus, String)> {
    if code == P2F_GESTURE_NONE {
        return Ok(None);
    }
    Gesture::ALL
        .get(usize::try_from(code).unwrap_or(usize::MAX))
        .map(|g| Some(*g))
        .ok_or_else(|| (P2fStatus::OutOfRange, format!("bad gesture code {code}")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn p2f_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf`. Returns the
/// message length, 0 when there is none, or -1 if `buf` is too small.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn p2f_last_error(buf: *mut c_char, len: usize) -> i64 {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let s = msg.to_str().unwrap_or("");
            match write_cstr(s, buf, len) {
                Ok(()) => s.len() as i64,
                Err(_) => -1,
            }
        }
    })
}

/// NUL-terminated names in gesture-code order.
const GESTURE_NAMES: [&str; 11] = [
    "up\0",
    "down\0",
    "left\0",
    "right\0",
    "forward\0",
    "backward\0",
    "cw\0",
    "ccw\0",
    "cheese\0",
    "side_left\0",
    "side_right\0",
];

/// Name of gesture code `code`, or NULL for an unknown code.
#[no_mangle]
pub extern "C" fn p2f_gesture_name(code: i32) -> *const c_char {
    match gesture_from_code(code) {
        Ok(Some(_)) => GESTURE_NAMES[code as usize].as_ptr().cast(),
        _ => ptr::null(),
    }
}

/// Parses one skeleton stream line.
///
/// # Safety
/// `line` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_frame_parse(line: *const c_char, out: *mut *mut P2fFrame) -> P2fStatus {
    guard(|| {
        let out = unsafe { as_mut(out, "out") }?;
        let line = unsafe { as_str(line, "line") }?;
        let frame = parse_skeleton_frame(line.as_bytes()).map_err(core)?;
        *out = Box::into_raw(Box::new(P2fFrame(frame)));
        Ok(())
    })
}

/// # Safety
/// `frame` must come from `p2f_frame_parse` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn p2f_frame_free(frame: *mut P2fFrame) {
    if !frame.is_null() {
        drop(unsafe { Box::from_raw(frame) });
    }
}

/// Reads joint `id` (0..18). Missing joints have confidence 0.
///
/// # Safety
/// `frame` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_frame_joint(frame: *const P2fFrame, id: u32, x: *mut f64, y: *mut f64, c: *mut f64) -> P2fStatus {
    guard(|| {
        let f = unsafe { as_ref(frame, "frame") }?;
        let id = JointId::from_index(id as usize).ok_or_else(|| (P2fStatus::OutOfRange, format!("joint id {id} >= {JOINT_COUNT}")))?;
        let j = f.0.joint(id);
        unsafe {
            *as_mut(x, "x")? = j.x;
            *as_mut(y, "y")? = j.y;
            *as_mut(c, "c")? = j.confidence;
        }
        Ok(())
    })
}

/// # Safety
/// `frame` must be a live handle; `out_view` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_classify_view(frame: *const P2fFrame, gamma: f64, out_view: *mut i32) -> P2fStatus {
    guard(|| {
        let f = unsafe { as_ref(frame, "frame") }?;
        let out = unsafe { as_mut(out_view, "out_view") }?;
        let cfg = ViewConfig::new(gamma).map_err(core)?;
        *out = view_code(classify_view(&f.0, &cfg));
        Ok(())
    })
}

/// Single-frame gesture; writes `P2F_GESTURE_NONE` when nothing matches.
///
/// # Safety
/// `frame` must be a live handle; `out_gesture` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_recognize(frame: *const P2fFrame, view: i32, beta: f64, out_gesture: *mut i32) -> P2fStatus {
    guard(|| {
        let f = unsafe { as_ref(frame, "frame") }?;
        let out = unsafe { as_mut(out_gesture, "out_gesture") }?;
        if !(beta.is_finite() && beta >= 0.0) {
            return Err((P2fStatus::OutOfRange, format!("beta {beta}")));
        }
        *out = gesture_code(recognize(&f.0, view_from_code(view)?, &GestureConfig { beta }));
        Ok(())
    })
}

/// # Safety
/// `frame` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_head_bbox(frame: *const P2fFrame, out: *mut P2fBBox) -> P2fStatus {
    guard(|| {
        let f = unsafe { as_ref(frame, "frame") }?;
        let out = unsafe { as_mut(out, "out") }?;
        let b = head_bbox(&f.0).map_err(core)?;
        *out = P2fBBox {
            x_min: b.x_min,
            y_min: b.y_min,
            x_max: b.x_max,
            y_max: b.y_max,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_stability_new(n_frames: u32, cooldown_ms: u64, out: *mut *mut P2fStability) -> P2fStatus {
    guard(|| {
        let out = unsafe { as_mut(out, "out") }?;
        let cfg = StabilityConfig::new(n_frames, cooldown_ms).map_err(core)?;
        *out = Box::into_raw(Box::new(P2fStability(StabilityFilter::new(cfg))));
        Ok(())
    })
}

/// Feeds one classification; `out_event` receives the emitted gesture or
/// `P2F_GESTURE_NONE`.
///
/// # Safety
/// `filter` must be a live handle; `out_event` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_stability_step(filter: *mut P2fStability, gesture: i32, timestamp_ms: u64, out_event: *mut i32) -> P2fStatus {
    guard(|| {
        let f = unsafe { as_mut(filter, "filter") }?;
        let out = unsafe { as_mut(out_event, "out_event") }?;
        let ev = f.0.step(gesture_from_code(gesture)?, timestamp_ms).map_err(core)?;
        *out = gesture_code(ev.map(|e| e.gesture));
        Ok(())
    })
}

/// # Safety
/// `filter` must come from `p2f_stability_new` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn p2f_stability_free(filter: *mut P2fStability) {
    if !filter.is_null() {
        drop(unsafe { Box::from_raw(filter) });
    }
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_distance_model_load(path: *const c_char, out: *mut *mut P2fDistanceModel) -> P2fStatus {
    guard(|| {
        let out = unsafe { as_mut(out, "out") }?;
        let path = unsafe { as_str(path, "path") }?;
        let m = DistanceModel::load(path).map_err(core)?;
        *out = Box::into_raw(Box::new(P2fDistanceModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `p2f_distance_model_load` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn p2f_distance_model_free(model: *mut P2fDistanceModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Distance of the person in `frame`. `posterior` may be NULL; otherwise
/// it receives `P2F_NUM_CLASSES` values.
///
/// # Safety
/// Handles must be live; `out_cm` writable; `posterior` NULL or writable
/// for `P2F_NUM_CLASSES` doubles.
#[no_mangle]
pub unsafe extern "C" fn p2f_distance_estimate(
    model: *const P2fDistanceModel,
    frame: *const P2fFrame,
    view: i32,
    out_cm: *mut f64,
    posterior: *mut f64,
) -> P2fStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model") }?;
        let f = unsafe { as_ref(frame, "frame") }?;
        let out_cm = unsafe { as_mut(out_cm, "out_cm") }?;
        let view = view_from_code(view)?;
        let bbox = head_bbox(&f.0).map_err(core)?;
        let est = build_features(&bbox, &f.0, view).and_then(|x| m.0.estimate(&x)).map_err(core)?;
        *out_cm = est.continuous_cm;
        if !posterior.is_null() {
            unsafe { ptr::copy_nonoverlapping(est.posterior.as_ptr(), posterior, NUM_CLASSES) };
        }
        Ok(())
    })
}

/// Continuous readout of a class posterior.
///
/// # Safety
/// `posterior` must hold `P2F_NUM_CLASSES` doubles; `out_cm` writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_continuous_distance(posterior: *const f64, out_cm: *mut f64) -> P2fStatus {
    guard(|| {
        if posterior.is_null() {
            return Err(null("posterior"));
        }
        let out = unsafe { as_mut(out_cm, "out_cm") }?;
        let mut p = [0.0; NUM_CLASSES];
        unsafe { ptr::copy_nonoverlapping(posterior, p.as_mut_ptr(), NUM_CLASSES) };
        *out = continuous_distance(&p);
        Ok(())
    })
}

/// A grounded drone with default parameters and the given seed.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_drone_new(seed: u64, out: *mut *mut P2fDrone) -> P2fStatus {
    guard(|| {
        let out = unsafe { as_mut(out, "out") }?;
        let cfg = SimConfig {
            seed,
            ..SimConfig::default()
        };
        *out = Box::into_raw(Box::new(P2fDrone(Drone::new(cfg))));
        Ok(())
    })
}

/// # Safety
/// `drone` must come from `p2f_drone_new` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn p2f_drone_free(drone: *mut P2fDrone) {
    if !drone.is_null() {
        drop(unsafe { Box::from_raw(drone) });
    }
}

/// Sends one SDK text command. An immediate reply is copied to `reply`;
/// a deferred one writes an empty string and sets `*deferred`.
///
/// # Safety
/// `drone` live; `text` NUL-terminated; `reply` writable for `len` bytes;
/// `deferred` writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_drone_command(
    drone: *mut P2fDrone,
    text: *const c_char,
    reply: *mut c_char,
    len: usize,
    deferred: *mut bool,
) -> P2fStatus {
    guard(|| {
        let d = unsafe { as_mut(drone, "drone") }?;
        let text = unsafe { as_str(text, "text") }?;
        let deferred = unsafe { as_mut(deferred, "deferred") }?;
        match d.0.handle(text) {
            Reply::Now(r) => {
                *deferred = false;
                write_cstr(&r, reply, len)
            }
            Reply::Deferred => {
                *deferred = true;
                write_cstr("", reply, len)
            }
        }
    })
}

/// Advances simulated time; `*completed` receives the number of deferred
/// replies that became due.
///
/// # Safety
/// `drone` live; `completed` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_drone_advance(drone: *mut P2fDrone, duration_ms: u64, completed: *mut u32) -> P2fStatus {
    guard(|| {
        let d = unsafe { as_mut(drone, "drone") }?;
        let n = d.0.advance(duration_ms, 10).len() as u32;
        if let Some(c) = unsafe { completed.as_mut() } {
            *c = n;
        }
        Ok(())
    })
}

/// # Safety
/// `drone` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn p2f_drone_state(drone: *const P2fDrone, out: *mut P2fDroneState) -> P2fStatus {
    guard(|| {
        let d = unsafe { as_ref(drone, "drone") }?;
        let out = unsafe { as_mut(out, "out") }?;
        let s = d.0.state();
        *out = P2fDroneState {
            x: s.x,
            y: s.y,
            z: s.z,
            yaw: s.yaw,
            battery: s.battery,
            flying: s.flying,
            sim_time_ms: s.sim_time_ms,
        };
        Ok(())
    })
}

/// Telemetry line in the SDK push format.
///
/// # Safety
/// `drone` live; `buf` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn p2f_drone_telemetry(drone: *const P2fDrone, buf: *mut c_char, len: usize) -> P2fStatus {
    guard(|| {
        let d = unsafe { as_ref(drone, "drone") }?;
        write_cstr(&telemetry(d.0.state()), buf, len)
    })
}
