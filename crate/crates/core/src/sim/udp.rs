//! UDP endpoint for the simulator: ASCII commands in, "ok"/"error"/value
//! replies back to the sender, and a telemetry line pushed at 10 Hz to the
//! client that last sent "command".

use std::net::{IpAddr, Ipv4Addr, SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::{telemetry, Drone, DroneState, Reply, SimConfig};
use crate::error::Result;

pub const DEFAULT_COMMAND_PORT: u16 = 8889;
pub const DEFAULT_TELEMETRY_PORT: u16 = 8890;
const TICK_MS: u32 = 10;
const TELEMETRY_PERIOD_MS: u64 = 100;

#[derive(Debug, Clone, Copy)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    /// Port on the client host that receives telemetry.
    pub telemetry_port: u16,
    /// Simulated milliseconds per wall-clock millisecond.
    pub time_scale: f64,
    pub sim: SimConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), DEFAULT_COMMAND_PORT),
            telemetry_port: DEFAULT_TELEMETRY_PORT,
            time_scale: 1.0,
            sim: SimConfig::default(),
        }
    }
}

/// Running simulator. Dropping the handle stops the thread.
pub struct SimServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    snapshot: Arc<Mutex<DroneState>>,
    thread: Option<JoinHandle<()>>,
}

impl SimServer {
    pub fn spawn(cfg: ServerConfig) -> Result<SimServer> {
        let socket = UdpSocket::bind(cfg.bind)?;
        socket.set_read_timeout(Some(Duration::from_millis(TICK_MS as u64 / 2)))?;
        let addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let snapshot = Arc::new(Mutex::new(DroneState::default()));
        let thread = {
            let stop = Arc::clone(&stop);
            let snapshot = Arc::clone(&snapshot);
            std::thread::Builder::new()
                .name("drone-sim".into())
                .spawn(move || serve(socket, cfg, &stop, &snapshot))?
        };
        log::info!("simulator listening on {addr}");
        Ok(SimServer {
            addr,
            stop,
            snapshot,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> DroneState {
        *self.snapshot.lock().expect("snapshot lock")
    }

    pub fn shutdown(mut self) {
        self.stop_thread();
    }

    fn stop_thread(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for SimServer {
    fn drop(&mut self) {
        self.stop_thread();
    }
}

fn serve(socket: UdpSocket, cfg: ServerConfig, stop: &AtomicBool, snapshot: &Mutex<DroneState>) {
    let mut drone = Drone::new(cfg.sim);
    let mut pending: Option<SocketAddr> = None;
    let mut telemetry_to: Option<SocketAddr> = None;
    let mut buf = [0u8; 1024];
    let start = Instant::now();
    let mut next_telemetry = 0u64;

    while !stop.load(Ordering::Relaxed) {
        match socket.recv_from(&mut buf) {
            Ok((n, from)) => {
                let text = String::from_utf8_lossy(&buf[..n]);
                let reply = drone.handle(&text);
                if text.trim() == "command" && reply == Reply::Now("ok".into()) {
                    telemetry_to = Some(SocketAddr::new(from.ip(), cfg.telemetry_port));
                }
                match reply {
                    Reply::Now(r) => send(&socket, &r, from),
                    Reply::Deferred => pending = Some(from),
                }
            }
            Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(e) => log::warn!("simulator socket: {e}"),
        }

        let target_ms = (start.elapsed().as_secs_f64() * 1000.0 * cfg.time_scale) as u64;
        while drone.state().sim_time_ms + TICK_MS as u64 <= target_ms {
            if let Some(r) = drone.tick(TICK_MS) {
                if let Some(to) = pending.take() {
                    send(&socket, &r, to);
                }
            }
            let now = drone.state().sim_time_ms;
            if now >= next_telemetry {
                next_telemetry = now + TELEMETRY_PERIOD_MS;
                if let Some(to) = telemetry_to {
                    send(&socket, &telemetry(drone.state()), to);
                }
            }
        }
        *snapshot.lock().expect("snapshot lock") = *drone.state();
    }
}

fn send(socket: &UdpSocket, text: &str, to: SocketAddr) {
    if let Err(e) = socket.send_to(text.as_bytes(), to) {
        log::warn!("send to {to}: {e}");
    }
}
