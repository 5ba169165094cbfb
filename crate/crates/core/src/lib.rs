//! Deterministic building blocks for curating video-text corpora.
//!
//! Records flow through the stages in this order:
//!
//! 1. [`segment`] turns per-frame signature streams into clip intervals.
//! 2. Captioning happens out of process (see the `vidcurate-caption` crate).
//! 3. [`score`] computes aesthetic and video-text similarity features.
//! 4. [`sample`] draws training subsets (uniform, diversity-weighted, filtered).
//! 5. [`interleave`] emits interleaved video/text sequences.
//! 6. [`stats`] summarizes a manifest.
//!
//! Every stage reads and writes the line-oriented manifest defined in
//! [`manifest`], using the record types in [`corpus`].

pub mod corpus;
pub mod interleave;
pub mod keyed;
pub mod manifest;
pub mod sample;
pub mod score;
pub mod segment;
pub mod signature;
pub mod stats;
pub mod tagger;

pub use corpus::{
    AsrSegment, ClipRecord, Millis, MultiscaleCaption, Record, Resolution, ScoreSet,
    ValidationPolicy, VideoRecord, Violation,
};
pub use manifest::{parse_manifest_line, serialize_record, Manifest, ManifestError};
