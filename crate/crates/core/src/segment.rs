//! Scene-cut detection over per-frame signatures, followed by duration and
//! dynamics filtering of the resulting intervals.
//!
//! A signature is any fixed-length vector with components in `[0, 255]`
//! (typically downsampled colour statistics from an external extractor). The
//! change between consecutive frames is the mean absolute componentwise
//! difference, so it also lies in `[0, 255]` and a single threshold (27 by
//! default) decides where scenes change.

use thiserror::Error;

use crate::corpus::Millis;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("signature lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty clip has no interior deltas")]
    EmptyClip,
    #[error("empty signature stream")]
    EmptyStream,
    #[error("frame {index}: {reason}")]
    BadFrame { index: usize, reason: String },
    #[error("fps must be positive and finite, got {0}")]
    BadFps(f64),
    #[error("invalid segmenter config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSignature {
    pub frame_index: u64,
    pub values: Vec<f64>,
}

impl FrameSignature {
    pub fn new(frame_index: u64, values: Vec<f64>) -> FrameSignature {
        FrameSignature { frame_index, values }
    }

    fn check(&self) -> Result<(), String> {
        match self.values.iter().find(|v| !(v.is_finite() && (0.0..=255.0).contains(*v))) {
            Some(v) => Err(format!("value {v} outside [0, 255]")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    pub cut_threshold: f64,
    pub min_scene_frames: usize,
    pub min_clip: Millis,
    pub still_threshold: f64,
    pub extreme_threshold: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            cut_threshold: 27.0,
            min_scene_frames: 15,
            min_clip: Millis::from_secs(2),
            still_threshold: 1.0,
            extreme_threshold: 80.0,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        let ordered = 0.0 <= self.still_threshold
            && self.still_threshold < self.cut_threshold
            && self.cut_threshold < self.extreme_threshold
            && self.extreme_threshold <= 255.0;
        if !ordered {
            return Err(SegmentError::BadConfig(
                "need 0 <= still_threshold < cut_threshold < extreme_threshold <= 255".into(),
            ));
        }
        if self.min_scene_frames == 0 {
            return Err(SegmentError::BadConfig("min_scene_frames must be >= 1".into()));
        }
        if self.min_clip.0 < 0 {
            return Err(SegmentError::BadConfig("min_clip must be >= 0".into()));
        }
        Ok(())
    }
}

/// Mean absolute componentwise difference of two signatures.
pub fn content_delta(a: &FrameSignature, b: &FrameSignature) -> Result<f64, SegmentError> {
    if a.values.len() != b.values.len() {
        return Err(SegmentError::LengthMismatch(a.values.len(), b.values.len()));
    }
    if a.values.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.values.len() as f64)
}

/// Returns the first frame index of every new scene.
///
/// `deltas[i]` is the change between frames `i` and `i + 1`; a delta above
/// the threshold proposes a cut at `i + 1`. Scanning left to right, a
/// proposal closer than `min_scene_frames` to the last accepted cut is
/// dropped, so the earlier cut wins.
pub fn detect_cuts(deltas: &[f64], config: &SegmenterConfig) -> Vec<usize> {
    let mut cuts: Vec<usize> = Vec::new();
    for (i, &d) in deltas.iter().enumerate() {
        if d > config.cut_threshold {
            let cut = i + 1;
            if cuts.last().is_none_or(|&prev| cut - prev >= config.min_scene_frames) {
                cuts.push(cut);
            }
        }
    }
    cuts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Keep,
    RejectStill,
    RejectExtreme,
    RejectShort,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Keep => "keep",
            Verdict::RejectStill => "reject_still",
            Verdict::RejectExtreme => "reject_extreme",
            Verdict::RejectShort => "reject_short",
        }
    }
}

/// Classifies a clip by the mean of its interior deltas.
pub fn classify_dynamics(clip_deltas: &[f64], config: &SegmenterConfig) -> Result<Verdict, SegmentError> {
    if clip_deltas.is_empty() {
        return Err(SegmentError::EmptyClip);
    }
    let mean = clip_deltas.iter().sum::<f64>() / clip_deltas.len() as f64;
    Ok(if mean < config.still_threshold {
        Verdict::RejectStill
    } else if mean > config.extreme_threshold {
        Verdict::RejectExtreme
    } else {
        Verdict::Keep
    })
}

/// One emitted interval; frames `[start_frame, end_frame)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start_frame: usize,
    pub end_frame: usize,
    pub start: Millis,
    pub end: Millis,
    pub verdict: Verdict,
}

impl Interval {
    pub fn duration(&self) -> Millis {
        Millis(self.end.0 - self.start.0)
    }
}

/// Timestamp of a frame boundary, rounded to the millisecond. Adjacent
/// intervals share the same boundary value, so the output tiles exactly.
pub fn frame_time(frame: usize, fps: f64) -> Millis {
    Millis((frame as f64 * 1000.0 / fps).round() as i64)
}

/// Splits a signature stream into intervals tiling `[0, n / fps)`.
///
/// Intervals shorter than `min_clip` are `RejectShort`; the rest get the
/// [`classify_dynamics`] verdict of their interior deltas. A single-frame
/// interval has no interior motion and counts as still.
pub fn segment_video<I>(signatures: I, fps: f64, config: &SegmenterConfig) -> Result<Vec<Interval>, SegmentError>
where
    I: IntoIterator<Item = FrameSignature>,
{
    config.validate()?;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(SegmentError::BadFps(fps));
    }
    let mut deltas = Vec::new();
    let mut prev: Option<FrameSignature> = None;
    let mut n = 0usize;
    for (i, sig) in signatures.into_iter().enumerate() {
        if sig.frame_index != i as u64 {
            return Err(SegmentError::BadFrame {
                index: i,
                reason: format!("frame_index {} out of order", sig.frame_index),
            });
        }
        sig.check().map_err(|reason| SegmentError::BadFrame { index: i, reason })?;
        if let Some(p) = &prev {
            deltas.push(content_delta(p, &sig)?);
        }
        prev = Some(sig);
        n += 1;
    }
    if n == 0 {
        return Err(SegmentError::EmptyStream);
    }
    let cuts = detect_cuts(&deltas, config);
    let bounds: Vec<usize> = std::iter::once(0).chain(cuts).chain(std::iter::once(n)).collect();
    let mut out = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let (s, e) = (w[0], w[1]);
        let start = frame_time(s, fps);
        let end = frame_time(e, fps);
        let verdict = if end.0 - start.0 < config.min_clip.0 {
            Verdict::RejectShort
        } else if e - s < 2 {
            Verdict::RejectStill
        } else {
            classify_dynamics(&deltas[s..e - 1], config)?
        };
        out.push(Interval { start_frame: s, end_frame: e, start, end, verdict });
    }
    Ok(out)
}
