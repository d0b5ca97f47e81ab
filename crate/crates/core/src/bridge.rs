//! Operator-console bridge. One TCP port carries both the WebSocket link
//! and plain HTTP for the console's static files.
//!
//! Inbound text messages are either a skeleton record in the stream line
//! format, a JSON array of such records (one multi-person scene), or a
//! control message `{"type":"control","action":...}` with action one of
//! `emergency`, `takeoff`, `land`, `reset`, `mode` (plus `"mode": name`)
//! or `key` (plus `"key": name`). Outbound, a `{"type":"snapshot",...}`
//! record is pushed at the configured rate; bad input is answered with
//! `{"type":"error","message":...}`.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};
use tungstenite::{Message as WsMessage, WebSocket};

use crate::control::{ControlMode, Key};
use crate::error::{Error, Result};
use crate::pipeline::{LivePipeline, Snapshot};
use crate::skeleton::{parse_skeleton_frame, SkeletonFrame};

pub const DEFAULT_BRIDGE_PORT: u16 = 8765;

const MAX_HEADER: usize = 16 * 1024;
const READ_SLICE: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub bind: SocketAddr,
    pub static_dir: Option<PathBuf>,
    pub snapshot_hz: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], DEFAULT_BRIDGE_PORT)),
            static_dir: None,
            snapshot_hz: 10.0,
        }
    }
}

/// What the console can ask for besides streaming skeletons.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ControlRequest {
    Emergency,
    Takeoff,
    Land,
    Reset,
    Mode { mode: String },
    Key { key: String },
}

impl ControlRequest {
    pub fn to_key(&self) -> Result<Key> {
        let bad = |what: &str, v: &str| Error::Schema(format!("unknown {what} {v:?}"));
        Ok(match self {
            ControlRequest::Emergency => Key::Emergency,
            ControlRequest::Takeoff => Key::Takeoff,
            ControlRequest::Land => Key::Land,
            ControlRequest::Reset => Key::Reset,
            ControlRequest::Mode { mode } => match ControlMode::from_name(mode) {
                Some(ControlMode::Emergency) => Key::Emergency,
                Some(m) => Key::Mode(m),
                None => return Err(bad("mode", mode)),
            },
            ControlRequest::Key { key } => Key::from_name(key).ok_or_else(|| bad("key", key))?,
        })
    }
}

/// A decoded inbound message.
#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Scene(Vec<SkeletonFrame>),
    Control(ControlRequest),
}

pub fn parse_inbound(text: &str) -> Result<Inbound> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: e.column().saturating_sub(1),
        message: e.to_string(),
    })?;
    match &value {
        Value::Object(m) if m.get("type").and_then(Value::as_str) == Some("control") => {
            let req = ControlRequest::deserialize(&value).map_err(|e| Error::Schema(format!("control message: {e}")))?;
            Ok(Inbound::Control(req))
        }
        Value::Array(items) => {
            let frames = items
                .iter()
                .map(|v| parse_skeleton_frame(v.to_string().as_bytes()))
                .collect::<Result<Vec<_>>>()?;
            if frames.is_empty() {
                return Err(Error::Schema("empty scene".into()));
            }
            Ok(Inbound::Scene(frames))
        }
        _ => Ok(Inbound::Scene(vec![parse_skeleton_frame(text.as_bytes())?])),
    }
}

/// The outbound snapshot record.
pub fn snapshot_message(s: &Snapshot) -> String {
    let mut v = serde_json::to_value(s).expect("snapshot serializes");
    v["type"] = json!("snapshot");
    v.to_string()
}

pub struct Bridge {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Bridge {
    pub fn spawn(cfg: BridgeConfig, pipeline: Arc<LivePipeline>) -> Result<Bridge> {
        if !(cfg.snapshot_hz > 0.0) {
            return Err(Error::Config("snapshot rate must be > 0".into()));
        }
        let listener = TcpListener::bind(cfg.bind)?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let cfg = Arc::new(cfg);
        let accept = thread::Builder::new().name("bridge".into()).spawn({
            let stop = stop.clone();
            move || {
                let mut workers: Vec<JoinHandle<()>> = Vec::new();
                while !stop.load(Ordering::Relaxed) {
                    match listener.accept() {
                        Ok((stream, peer)) => {
                            let (cfg, pipeline, stop) = (cfg.clone(), pipeline.clone(), stop.clone());
                            workers.retain(|w| !w.is_finished());
                            workers.push(thread::spawn(move || {
                                if let Err(e) = serve_connection(stream, &cfg, &pipeline, &stop) {
                                    log::debug!("bridge connection {peer}: {e}");
                                }
                            }));
                        }
                        Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(READ_SLICE),
                        Err(e) => log::warn!("bridge accept: {e}"),
                    }
                }
                for w in workers {
                    let _ = w.join();
                }
            }
        })?;
        log::info!("bridge listening on {local_addr}");
        Ok(Bridge {
            local_addr,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn shutdown(mut self) {
        self.stop_all();
    }

    fn stop_all(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.accept.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Bridge {
    fn drop(&mut self) {
        self.stop_all();
    }
}

fn serve_connection(stream: TcpStream, cfg: &BridgeConfig, pipeline: &LivePipeline, stop: &AtomicBool) -> Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let header = peek_header(&stream)?;
    let lower = header.to_ascii_lowercase();
    if lower.contains("upgrade: websocket") {
        stream.set_read_timeout(Some(READ_SLICE))?;
        let ws = tungstenite::accept(stream).map_err(|e| Error::Io(io::Error::other(e.to_string())))?;
        websocket_session(ws, cfg, pipeline, stop)
    } else {
        serve_static(stream, &header, cfg.static_dir.as_deref())
    }
}

/// Returns the request head without consuming it from the socket.
fn peek_header(stream: &TcpStream) -> Result<String> {
    let mut buf = vec![0u8; MAX_HEADER];
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let n = stream.peek(&mut buf)?;
        if let Some(end) = buf[..n].windows(4).position(|w| w == b"\r\n\r\n") {
            return Ok(String::from_utf8_lossy(&buf[..end]).into_owned());
        }
        if n == 0 || n == MAX_HEADER || Instant::now() > deadline {
            return Err(Error::Io(io::Error::new(ErrorKind::InvalidData, "incomplete request head")));
        }
        thread::sleep(Duration::from_millis(2));
    }
}

fn websocket_session(mut ws: WebSocket<TcpStream>, cfg: &BridgeConfig, pipeline: &LivePipeline, stop: &AtomicBool) -> Result<()> {
    let period = Duration::from_secs_f64(1.0 / cfg.snapshot_hz);
    let mut next = Instant::now();
    let io_err = |e: tungstenite::Error| Error::Io(io::Error::other(e.to_string()));
    while !stop.load(Ordering::Relaxed) && pipeline.is_running() {
        if Instant::now() >= next {
            ws.send(WsMessage::text(snapshot_message(&pipeline.snapshot()))).map_err(io_err)?;
            next += period;
        }
        match ws.read() {
            Ok(WsMessage::Text(text)) => {
                if let Err(e) = handle_inbound(text.as_str(), pipeline) {
                    let reply = json!({"type": "error", "message": e.to_string()}).to_string();
                    ws.send(WsMessage::text(reply)).map_err(io_err)?;
                }
            }
            Ok(WsMessage::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => return Err(io_err(e)),
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}

fn handle_inbound(text: &str, pipeline: &LivePipeline) -> Result<()> {
    match parse_inbound(text)? {
        Inbound::Scene(frames) => {
            pipeline.publish_scene(frames)?;
        }
        Inbound::Control(req) => pipeline.send_key(req.to_key()?)?,
    }
    Ok(())
}

fn serve_static(mut stream: TcpStream, header: &str, root: Option<&Path>) -> Result<()> {
    // Consume the request head we peeked.
    let mut sink = vec![0u8; header.len() + 4];
    stream.read_exact(&mut sink)?;
    let mut parts = header.lines().next().unwrap_or("").split_whitespace();
    let (method, target) = (parts.next().unwrap_or(""), parts.next().unwrap_or("/"));
    let response = match (method, root) {
        ("GET" | "HEAD", Some(root)) => match resolve(root, target).and_then(|p| std::fs::read(&p).ok().map(|b| (p, b))) {
            Some((path, body)) => http_response(200, "OK", content_type(&path), body, method == "HEAD"),
            None => http_response(404, "Not Found", "text/plain", b"not found\n".to_vec(), false),
        },
        ("GET" | "HEAD", None) => http_response(404, "Not Found", "text/plain", b"no static directory configured\n".to_vec(), false),
        _ => http_response(405, "Method Not Allowed", "text/plain", Vec::new(), false),
    };
    stream.write_all(&response)?;
    stream.flush()?;
    Ok(())
}

/// Maps a request target to a file under `root`; rejects escapes.
fn resolve(root: &Path, target: &str) -> Option<PathBuf> {
    let path = target.split(['?', '#']).next().unwrap_or("/");
    let rel = Path::new(path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut full = root.join(rel);
    if full.is_dir() {
        full.push("index.html");
    }
    full.is_file().then_some(full)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "wasm" => "application/wasm",
        _ => "application/octet-stream",
    }
}

fn http_response(code: u16, reason: &str, ctype: &str, body: Vec<u8>, head_only: bool) -> Vec<u8> {
    let mut out = format!(
        "HTTP/1.1 {code} {reason}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )
    .into_bytes();
    if !head_only {
        out.extend(body);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_messages() {
        let k = |s: &str| match parse_inbound(s).unwrap() {
            Inbound::Control(r) => r.to_key().unwrap(),
            other => panic!("{other:?}"),
        };
        assert_eq!(k(r#"{"type":"control","action":"emergency"}"#), Key::Emergency);
        assert_eq!(k(r#"{"type":"control","action":"mode","mode":"face_tracking"}"#), Key::Mode(ControlMode::FaceTracking));
        assert_eq!(k(r#"{"type":"control","action":"mode","mode":"emergency"}"#), Key::Emergency);
        assert_eq!(k(r#"{"type":"control","action":"takeoff"}"#), Key::Takeoff);
        let bad = parse_inbound(r#"{"type":"control","action":"mode","mode":"warp"}"#).unwrap();
        assert!(matches!(bad, Inbound::Control(r) if r.to_key().is_err()));
        assert!(parse_inbound(r#"{"type":"control","action":"fly"}"#).is_err());
    }

    #[test]
    fn skeleton_messages() {
        let line = r#"{"timestamp_ms":5,"image_width":640,"image_height":480,"keypoints":[{"id":1,"x":3,"y":4,"c":1}]}"#;
        match parse_inbound(line).unwrap() {
            Inbound::Scene(f) => assert_eq!(f.len(), 1),
            other => panic!("{other:?}"),
        }
        match parse_inbound(&format!("[{line},{line}]")).unwrap() {
            Inbound::Scene(f) => assert_eq!(f.len(), 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_inbound("[]").is_err());
        assert!(parse_inbound("nope").is_err());
    }

    #[test]
    fn path_resolution_stays_in_root() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("index.html"), "hi").unwrap();
        assert_eq!(resolve(dir.path(), "/"), Some(dir.path().join("index.html")));
        assert_eq!(resolve(dir.path(), "/index.html?x=1"), Some(dir.path().join("index.html")));
        assert_eq!(resolve(dir.path(), "/../etc/passwd"), None);
        assert_eq!(resolve(dir.path(), "/missing.js"), None);
    }

    #[test]
    fn snapshot_is_tagged() {
        let v: Value = serde_json::from_str(&snapshot_message(&Snapshot::default())).unwrap();
        assert_eq!(v["type"], "snapshot");
        assert_eq!(v["mode"], "keyboard");
        assert!(v["drone"]["battery"].is_number());
    }
}
