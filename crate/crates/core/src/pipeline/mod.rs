//! Wiring of the nodes over the bus, on a virtual or a wall clock, plus
//! stream files and session logs.

mod live;
mod nodes;
pub mod record;
mod session;
pub mod stream;

pub use live::{LivePipeline, ReplayReport, Stats};
pub use nodes::{ControlNode, Monitor, PerceptionNode, SimNode, Snapshot};
pub use record::{load_session, read_session, Recorder, SessionHeader};
pub use session::VirtualSession;
pub use stream::{load_stream, write_stream, Origin, StreamReader, StreamSource};

/// Simulator integration step.
pub const SIM_TICK_MS: u64 = 10;
/// Telemetry period on /drone_state.
pub const STATUS_PERIOD_MS: u64 = 50;
