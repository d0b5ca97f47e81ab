//! Session logs: a header line followed by one envelope per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bus::{Bus, Envelope, Subscription, Topic};
use crate::error::{Error, Result};

/// Inbox depth of a recorder; it is pumped every pipeline step.
pub const RECORDER_CAP: usize = 4096;

pub const SESSION_FORMAT: &str = "pose2flight-session";
pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub format: String,
    pub version: u32,
    pub topics: Vec<String>,
}

pub struct Recorder<W: Write> {
    out: W,
    inbox: Subscription,
    written: u64,
}

impl Recorder<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, bus: &Bus, topics: &[Topic]) -> Result<Self> {
        Recorder::new(BufWriter::new(File::create(path)?), bus, topics)
    }
}

impl<W: Write> Recorder<W> {
    /// Subscribes to `topics` and writes the header immediately.
    pub fn new(mut out: W, bus: &Bus, topics: &[Topic]) -> Result<Self> {
        let inbox = bus.subscribe_with_cap(topics, RECORDER_CAP)?;
        let header = SessionHeader {
            format: SESSION_FORMAT.into(),
            version: SESSION_VERSION,
            topics: topics.iter().map(|t| t.name().to_string()).collect(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        Ok(Recorder { out, inbox, written: 0 })
    }

    /// Writes everything received so far.
    pub fn pump(&mut self) -> Result<usize> {
        let batch = self.inbox.drain();
        for env in &batch {
            writeln!(self.out, "{}", env.to_log_line())?;
        }
        self.written += batch.len() as u64;
        if self.inbox.evicted() > 0 {
            log::warn!("recorder fell behind; {} messages lost", self.inbox.evicted());
        }
        Ok(batch.len())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    /// Pumps the remaining messages, flushes and returns the writer.
    pub fn close(mut self) -> Result<W> {
        self.pump()?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Parses a session log. Line numbers in errors are 1-based and count the
/// header.
pub fn read_session(input: impl BufRead) -> Result<(SessionHeader, Vec<Envelope>)> {
    let mut lines = input.lines().enumerate();
    let wrap = |line: usize, e: Error| Error::ParseLine {
        line,
        source: Box::new(e),
    };
    let header = match lines.next() {
        None => return Err(wrap(1, Error::Schema("missing session header".into()))),
        Some((_, l)) => {
            let l = l?;
            serde_json::from_str::<SessionHeader>(&l)
                .ok()
                .filter(|h| h.format == SESSION_FORMAT)
                .ok_or_else(|| wrap(1, Error::Schema("not a session header".into())))?
        }
    };
    let mut out = Vec::new();
    for (i, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        out.push(Envelope::from_log_line(&l).map_err(|e| wrap(i + 1, e))?);
    }
    Ok((header, out))
}

pub fn load_session(path: impl AsRef<Path>) -> Result<(SessionHeader, Vec<Envelope>)> {
    read_session(BufReader::new(File::open(path)?))
}
