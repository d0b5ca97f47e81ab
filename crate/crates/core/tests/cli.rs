use std::path::Path;
use std::process::{Command, Output};

use pose2flight::pipeline::load_session;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pose2flight"));
    c.env_remove("POSE2FLIGHT_CONFIG");
    c
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn gen_up_stream(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("up.jsonl");
    ok(bin()
        .args(["gen-data", "stream", "--gesture", "up", "--frames", "60", "--out"])
        .arg(&path)
        .output()
        .unwrap());
    path
}

#[test]
fn replay_reports_the_gesture() {
    let dir = tempfile::tempdir().unwrap();
    let stream = gen_up_stream(dir.path());
    let out = ok(bin().args(["replay", "--input"]).arg(&stream).output().unwrap());
    assert!(out.contains("replayed 60 frames"), "{out}");
    assert!(out.contains("gesture=up"), "{out}");
}

#[test]
fn record_writes_a_session_log() {
    let dir = tempfile::tempdir().unwrap();
    let stream = gen_up_stream(dir.path());
    let log = dir.path().join("session.jsonl");
    ok(bin()
        .args(["record", "--topics", "/gesture,/cmd", "--mode", "gesture-control", "--input"])
        .arg(&stream)
        .arg("--out")
        .arg(&log)
        .output()
        .unwrap());
    let (header, envs) = load_session(&log).unwrap();
    assert_eq!(header.topics, ["/gesture", "/cmd"]);
    let cmds: Vec<String> = envs
        .iter()
        .filter(|e| e.topic.name() == "/cmd")
        .map(|e| e.message.to_json().as_str().unwrap_or_default().to_string())
        .collect();
    assert!(cmds.contains(&"takeoff".to_string()), "{cmds:?}");
    assert!(cmds.contains(&"up 50".to_string()), "{cmds:?}");
}

#[test]
fn config_file_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let stream = gen_up_stream(dir.path());
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[gestures]\nn_frames = 0\n").unwrap();
    let out = bin()
        .env("POSE2FLIGHT_CONFIG", &bad)
        .args(["replay", "--input"])
        .arg(&stream)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_frames"));

    // An explicit --config wins over the environment.
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "[gestures]\nn_frames = 100\n").unwrap();
    let out = ok(bin()
        .env("POSE2FLIGHT_CONFIG", &bad)
        .arg("--config")
        .arg(&good)
        .args(["replay", "--input"])
        .arg(&stream)
        .output()
        .unwrap());
    // Sixty frames never reach a hundred in a row.
    assert!(out.contains("gesture=-"), "{out}");

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[gestures]\nbogus = 1\n").unwrap();
    let out = bin().arg("--config").arg(&unknown).args(["eval-gesture", "--per-gesture", "5"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn distance_training_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.bin");
    let out = ok(bin()
        .args(["train-distance", "--per-class", "60", "--epochs", "2", "--out"])
        .arg(&model)
        .output()
        .unwrap());
    assert!(out.contains("class accuracy"), "{out}");
    let out = ok(bin()
        .args(["eval-distance", "--per-class", "20", "--model"])
        .arg(&model)
        .output()
        .unwrap());
    assert!(out.contains("samples 100"), "{out}");

    let missing = bin()
        .args(["eval-distance", "--model"])
        .arg(dir.path().join("nope.bin"))
        .output()
        .unwrap();
    assert!(!missing.status.success());
}

#[test]
fn gesture_evaluation_prints_every_gesture() {
    let out = ok(bin().args(["eval-gesture", "--per-gesture", "20"]).output().unwrap());
    for name in ["up", "down", "left", "right", "forward", "backward", "cw", "ccw", "cheese", "side_left", "side_right", "average"] {
        assert!(out.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing:\n{out}");
    }
}

#[test]
fn malformed_input_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let stream = gen_up_stream(dir.path());
    let mut text = std::fs::read_to_string(&stream).unwrap();
    text.push_str("{broken\n");
    std::fs::write(&stream, text).unwrap();
    let out = bin().args(["replay", "--input"]).arg(&stream).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 61"), "{}", String::from_utf8_lossy(&out.stderr));
}
