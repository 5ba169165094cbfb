//! Interleaved video/text sequences for in-context learning.
//!
//! * Format A: the clips of one video in temporal order, each as a video
//!   reference followed by its caption. Video references are dropped at
//!   random (probability 0.3 by default); captions never are.
//! * Format B: format A plus each clip's transcript right after its caption.
//! * Format C: two format-A sequences from different videos, concatenated.
//!
//! The drop decision for a clip is a keyed draw on `(seed, clip_id)`, so
//! formats A and B agree for equal seeds and editing the clip list does not
//! reshuffle other clips' decisions.
//!
//! Serialized form, one sequence per line:
//!
//! ```text
//! {"format":"b","seed":7,"source_video_ids":["v1"],"elements":[{"video":"v1.000000000"},{"caption":"a dog runs"},{"asr":"♪ la ♪"}]}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ClipRecord;
use crate::keyed::keyed_unit;

pub const DEFAULT_DROP_PROB: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum InterleaveError {
    #[error("no clips")]
    EmptyClipList,
    #[error("clips come from more than one video")]
    MixedVideos,
    #[error("clip {0} has no caption")]
    MissingCaption(String),
    #[error("both items come from video {0}")]
    SameVideo(String),
    #[error("expected format A inputs")]
    WrongInputFormat,
    #[error("drop probability must be in [0, 1], got {0}")]
    BadDropProb(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    A,
    B,
    C,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Video(String),
    Caption(String),
    Asr(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterleavedSequence {
    pub format: Format,
    pub seed: u64,
    pub source_video_ids: Vec<String>,
    pub elements: Vec<Element>,
}

impl InterleavedSequence {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("sequence serializes")
    }

    pub fn from_line(line: &str) -> Result<InterleavedSequence, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn video_refs(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, Element::Video(_))).count()
    }
}

/// True when the clip's video reference is dropped.
pub fn drops_video(seed: u64, clip_id: &str, drop_prob: f64) -> bool {
    keyed_unit(seed, "interleave-drop", clip_id) < drop_prob
}

fn build(clips: &[ClipRecord], drop_prob: f64, seed: u64, with_asr: bool) -> Result<InterleavedSequence, InterleaveError> {
    if !(0.0..=1.0).contains(&drop_prob) {
        return Err(InterleaveError::BadDropProb(drop_prob));
    }
    let first = clips.first().ok_or(InterleaveError::EmptyClipList)?;
    if clips.iter().any(|c| c.video_id != first.video_id) {
        return Err(InterleaveError::MixedVideos);
    }
    let mut ordered: Vec<&ClipRecord> = clips.iter().collect();
    ordered.sort_by_key(|c| (c.start, c.end));
    let mut elements = Vec::with_capacity(clips.len() * 3);
    for c in ordered {
        let caption = c.caption.clone().ok_or_else(|| InterleaveError::MissingCaption(c.clip_id.clone()))?;
        if !drops_video(seed, &c.clip_id, drop_prob) {
            elements.push(Element::Video(c.clip_id.clone()));
        }
        elements.push(Element::Caption(caption));
        if with_asr {
            if let Some(asr) = c.asr_text.as_deref().filter(|a| !a.is_empty()) {
                elements.push(Element::Asr(asr.to_string()));
            }
        }
    }
    Ok(InterleavedSequence {
        format: if with_asr { Format::B } else { Format::A },
        seed,
        source_video_ids: vec![first.video_id.clone()],
        elements,
    })
}

pub fn build_format_a(clips: &[ClipRecord], drop_prob: f64, seed: u64) -> Result<InterleavedSequence, InterleaveError> {
    build(clips, drop_prob, seed, false)
}

pub fn build_format_b(clips: &[ClipRecord], drop_prob: f64, seed: u64) -> Result<InterleavedSequence, InterleaveError> {
    let mut seq = build(clips, drop_prob, seed, true)?;
    // Without any transcript the sequence is exactly format A.
    if !seq.elements.iter().any(|e| matches!(e, Element::Asr(_))) {
        seq.format = Format::A;
    }
    Ok(seq)
}

/// Concatenates two format-A items from different videos. Chain calls (on
/// format-A inputs) to combine more videos.
pub fn build_format_c(
    first: &InterleavedSequence,
    second: &InterleavedSequence,
) -> Result<InterleavedSequence, InterleaveError> {
    if first.format != Format::A || second.format != Format::A {
        return Err(InterleaveError::WrongInputFormat);
    }
    if let Some(v) = first.source_video_ids.iter().find(|v| second.source_video_ids.contains(v)) {
        return Err(InterleaveError::SameVideo(v.clone()));
    }
    let mut elements = first.elements.clone();
    elements.extend(second.elements.iter().cloned());
    let mut source_video_ids = first.source_video_ids.clone();
    source_video_ids.extend(second.source_video_ids.iter().cloned());
    Ok(InterleavedSequence { format: Format::C, seed: first.seed, source_video_ids, elements })
}
