//! Text format for per-video signature streams.
//!
//! ```text
//! sig <dim> <fps>
//! <v_0> <v_1> ... <v_dim-1>      # frame 0
//! <v_0> <v_1> ... <v_dim-1>      # frame 1
//! ```
//!
//! Values are whitespace separated. Files live next to the manifest as
//! `<dir>/<video_id>.sig`.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::segment::FrameSignature;

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureStream {
    pub dim: usize,
    pub fps: f64,
    pub frames: Vec<FrameSignature>,
}

pub fn signature_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.sig"))
}

fn parse_err(line: usize, reason: impl Into<String>) -> SignatureError {
    SignatureError::Parse { line, reason: reason.into() }
}

impl SignatureStream {
    pub fn read_from<R: BufRead>(reader: R) -> Result<SignatureStream, SignatureError> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "missing header"))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "sig" {
            return Err(parse_err(1, "expected `sig <dim> <fps>`"));
        }
        let dim: usize = parts[1].parse().map_err(|_| parse_err(1, "bad dim"))?;
        let fps: f64 = parts[2].parse().map_err(|_| parse_err(1, "bad fps"))?;
        let mut frames = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| parse_err(i + 2, e.to_string()))?;
            if values.len() != dim {
                return Err(parse_err(i + 2, format!("expected {dim} values, got {}", values.len())));
            }
            frames.push(FrameSignature::new(frames.len() as u64, values));
        }
        Ok(SignatureStream { dim, fps, frames })
    }

    pub fn load(path: &Path) -> Result<SignatureStream, SignatureError> {
        SignatureStream::read_from(io::BufReader::new(fs::File::open(path)?))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "sig {} {}", self.dim, self.fps)?;
        for f in &self.frames {
            let row: Vec<String> = f.values.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}
