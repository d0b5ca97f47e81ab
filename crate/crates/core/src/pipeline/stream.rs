//! Skeleton stream files and stream sources.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::skeleton::{parse_skeleton_frame, serialize_skeleton_frame, SkeletonFrame};

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    File(PathBuf),
    /// Frames pushed by the console bridge.
    Socket,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSource {
    pub origin: Origin,
    pub target_fps: f64,
}

impl StreamSource {
    pub fn new(origin: Origin, target_fps: f64) -> Result<Self> {
        if !(target_fps.is_finite() && target_fps > 0.0) {
            return Err(Error::OutOfRange(format!("target_fps must be > 0, got {target_fps}")));
        }
        Ok(StreamSource { origin, target_fps })
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.target_fps
    }
}

/// Iterates the frames of a newline-delimited stream. Blank lines are
/// skipped; a bad line yields `ParseLine` with its 1-based number.
pub struct StreamReader<R> {
    input: R,
    line_no: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(input: R) -> Self {
        StreamReader {
            input,
            line_no: 0,
            buf: Vec::new(),
        }
    }
}

impl StreamReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(StreamReader::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<SkeletonFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            if self.buf.trim_ascii().is_empty() {
                continue;
            }
            return Some(parse_skeleton_frame(&self.buf).map_err(|e| Error::ParseLine {
                line: self.line_no,
                source: Box::new(e),
            }));
        }
    }
}

/// Reads a whole stream file, stopping at the first bad line.
pub fn load_stream(path: impl AsRef<Path>) -> Result<Vec<SkeletonFrame>> {
    StreamReader::open(path)?.collect()
}

pub fn write_stream<'a>(frames: impl IntoIterator<Item = &'a SkeletonFrame>, out: &mut impl Write) -> Result<()> {
    for f in frames {
        writeln!(out, "{}", serialize_skeleton_frame(f))?;
    }
    out.flush()?;
    Ok(())
}
