//! Record types shared by every stage, and their validation rules.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde_json::value::RawValue;

/// A time offset or duration with millisecond precision.
///
/// Stored as a signed count so that invalid input (negative starts) can be
/// represented and reported instead of failing to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Millis(pub i64);

impl Millis {
    pub const ZERO: Millis = Millis(0);

    /// Rounds a value in seconds to the nearest millisecond.
    pub fn from_secs_f64(secs: f64) -> Millis {
        Millis((secs * 1000.0).round() as i64)
    }

    pub fn from_secs(secs: i64) -> Millis {
        Millis(secs * 1000)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Shortest decimal rendering with at least one fractional digit:
    /// `3000 -> "3.0"`, `3250 -> "3.25"`, `-1500 -> "-1.5"`.
    pub fn to_decimal(self) -> String {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / 1000;
        let frac = abs % 1000;
        if frac == 0 {
            return format!("{sign}{whole}.0");
        }
        let digits = format!("{frac:03}");
        format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl fmt::Display for Millis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.to_decimal())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

impl Resolution {
    /// The "P" number of a video (720 for 1280x720, also for 720x1280).
    pub fn short_side(self) -> u32 {
        self.width.min(self.height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsrSegment {
    pub start: Millis,
    pub end: Millis,
    pub text: String,
}

/// Fields a stage did not recognize, kept as raw JSON in their original order.
#[derive(Debug, Clone, Default)]
pub struct Extra(pub IndexMap<String, Box<RawValue>>);

impl PartialEq for Extra {
    fn eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(other.0.iter())
                .all(|((ka, va), (kb, vb))| ka == kb && va.get() == vb.get())
    }
}

impl Extra {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub duration: Millis,
    pub fps: f64,
    pub resolution: Resolution,
    pub category: String,
    pub language: String,
    pub title: String,
    pub asr_segments: Vec<AsrSegment>,
    pub extra: Extra,
}

/// Captions at two scales: per-frame captions plus their summary, and a
/// single caption of the middle frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiscaleCaption {
    pub fine_frame_captions: Vec<(u64, String)>,
    pub fine_summary: String,
    pub coarse_caption: String,
}

impl MultiscaleCaption {
    pub fn has_fine(&self) -> bool {
        !self.fine_frame_captions.is_empty()
    }

    pub fn has_coarse(&self) -> bool {
        !self.coarse_caption.is_empty()
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self
            .fine_frame_captions
            .windows(2)
            .any(|w| w[0].0 >= w[1].0)
        {
            out.push(Violation::FrameIndexOrder);
        }
        if self.fine_frame_captions.is_empty() != self.fine_summary.is_empty() {
            out.push(Violation::SummaryConsistency);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSet {
    pub aesthetic: f64,
    pub umt_sim: f64,
}

impl ScoreSet {
    pub const UMT_SIM_TOLERANCE: f64 = 1e-9;

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.aesthetic.is_finite() {
            out.push(Violation::AestheticNotFinite);
        }
        // NaN fails the range test too.
        if self.umt_sim.is_nan() || self.umt_sim.abs() > 1.0 + Self::UMT_SIM_TOLERANCE {
            out.push(Violation::SimilarityRange);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub start: Millis,
    pub end: Millis,
    pub asr_text: Option<String>,
    pub caption: Option<String>,
    pub multiscale: Option<MultiscaleCaption>,
    pub scores: Option<ScoreSet>,
    pub extra: Extra,
}

/// Derives the clip id from its parent video and start offset.
///
/// The start is zero-padded so ids of one video sort in temporal order.
pub fn clip_id(video_id: &str, start: Millis) -> String {
    format!("{video_id}.{:09}", start.0)
}

impl ClipRecord {
    /// A bare clip as produced by segmentation.
    pub fn new(video_id: &str, start: Millis, end: Millis) -> ClipRecord {
        ClipRecord {
            clip_id: clip_id(video_id, start),
            video_id: video_id.to_string(),
            start,
            end,
            asr_text: None,
            caption: None,
            multiscale: None,
            scores: None,
            extra: Extra::default(),
        }
    }

    pub fn duration(&self) -> Millis {
        Millis(self.end.0 - self.start.0)
    }

    pub fn violations(&self, policy: &ValidationPolicy) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.video_id.is_empty() {
            out.push(Violation::EmptyId);
        }
        if self.start.0 < 0 {
            out.push(Violation::NegativeStart);
        }
        if self.end <= self.start {
            out.push(Violation::IntervalOrdering);
        } else if self.duration() < policy.min_clip {
            out.push(Violation::ClipTooShort);
        }
        if self.clip_id != clip_id(&self.video_id, self.start) {
            out.push(Violation::ClipIdMismatch);
        }
        if let Some(m) = &self.multiscale {
            out.extend(m.violations());
        }
        if let Some(s) = &self.scores {
            out.extend(s.violations());
        }
        out
    }
}

impl VideoRecord {
    pub fn violations(&self, policy: &ValidationPolicy) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.video_id.is_empty() {
            out.push(Violation::EmptyId);
        }
        if self.duration.0 <= 0 {
            out.push(Violation::NonpositiveDuration);
        } else if policy.collection_gating
            && (self.duration < policy.min_video || self.duration > policy.max_video)
        {
            out.push(Violation::DurationWindow);
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            out.push(Violation::NonpositiveFps);
        }
        if policy.collection_gating {
            let p = self.resolution.short_side();
            if p < policy.min_short_side || p > policy.max_short_side {
                out.push(Violation::ResolutionWindow);
            }
        }
        if self.asr_segments.iter().any(|s| s.start.0 < 0 || s.end <= s.start) {
            out.push(Violation::AsrInterval);
        }
        if self.asr_segments.windows(2).any(|w| w[0].start > w[1].start) {
            out.push(Violation::AsrOrdering);
        }
        if self.asr_segments.iter().any(|s| s.end > self.duration) {
            out.push(Violation::AsrBeyondDuration);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Video(VideoRecord),
    Clip(ClipRecord),
}

impl Record {
    pub fn violations(&self, policy: &ValidationPolicy) -> Vec<Violation> {
        match self {
            Record::Video(v) => v.violations(policy),
            Record::Clip(c) => c.violations(policy),
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Record::Video(v) => &v.video_id,
            Record::Clip(c) => &c.clip_id,
        }
    }
}

/// Every invariant a record or a manifest can violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Violation {
    EmptyId,
    NonpositiveDuration,
    DurationWindow,
    NonpositiveFps,
    ResolutionWindow,
    AsrInterval,
    AsrOrdering,
    AsrBeyondDuration,
    NegativeStart,
    IntervalOrdering,
    ClipTooShort,
    ClipIdMismatch,
    FrameIndexOrder,
    SummaryConsistency,
    AestheticNotFinite,
    SimilarityRange,
    // Cross-record checks.
    DuplicateVideoId,
    DuplicateClipId,
    MissingParentVideo,
    ClipBeyondVideo,
    OverlappingClips,
}

impl Violation {
    pub fn describe(self) -> &'static str {
        match self {
            Violation::EmptyId => "empty identifier",
            Violation::NonpositiveDuration => "nonpositive duration",
            Violation::DurationWindow => "duration outside collection window",
            Violation::NonpositiveFps => "nonpositive fps",
            Violation::ResolutionWindow => "resolution outside collection window",
            Violation::AsrInterval => "asr segment interval",
            Violation::AsrOrdering => "asr segment ordering",
            Violation::AsrBeyondDuration => "asr segment beyond duration",
            Violation::NegativeStart => "negative start",
            Violation::IntervalOrdering => "interval ordering",
            Violation::ClipTooShort => "clip shorter than minimum",
            Violation::ClipIdMismatch => "clip id mismatch",
            Violation::FrameIndexOrder => "fine frame index ordering",
            Violation::SummaryConsistency => "fine summary consistency",
            Violation::AestheticNotFinite => "aesthetic not finite",
            Violation::SimilarityRange => "umt_sim outside [-1, 1]",
            Violation::DuplicateVideoId => "duplicate video id",
            Violation::DuplicateClipId => "duplicate clip id",
            Violation::MissingParentVideo => "missing parent video",
            Violation::ClipBeyondVideo => "clip beyond video duration",
            Violation::OverlappingClips => "overlapping clips",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

/// Thresholds used by record validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPolicy {
    /// Apply the collection window to videos (duration and resolution).
    pub collection_gating: bool,
    pub min_video: Millis,
    pub max_video: Millis,
    pub min_short_side: u32,
    pub max_short_side: u32,
    pub min_clip: Millis,
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        ValidationPolicy {
            collection_gating: true,
            min_video: Millis::from_secs(10),
            max_video: Millis::from_secs(30 * 60),
            min_short_side: 360,
            max_short_side: 720,
            min_clip: Millis::from_secs(2),
        }
    }
}

/// Outcome of the collection rules for a candidate video.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectionVerdict {
    Accept,
    /// Accepted after resizing to the maximum short side.
    Downscale(Resolution),
    RejectDuration,
    RejectResolution,
}

/// Applies the crawl-time duration and resolution rules: videos must last
/// between the policy bounds, anything below the minimum short side is
/// dropped, and anything above the maximum is resized down to it.
pub fn collection_gate(duration: Millis, res: Resolution, policy: &ValidationPolicy) -> CollectionVerdict {
    if duration < policy.min_video || duration > policy.max_video {
        return CollectionVerdict::RejectDuration;
    }
    let p = res.short_side();
    if p < policy.min_short_side {
        return CollectionVerdict::RejectResolution;
    }
    if p > policy.max_short_side {
        let scale = f64::from(policy.max_short_side) / f64::from(p);
        let w = (f64::from(res.width) * scale).round() as u32;
        let h = (f64::from(res.height) * scale).round() as u32;
        return CollectionVerdict::Downscale(Resolution { width: w, height: h });
    }
    CollectionVerdict::Accept
}

/// Text of every ASR segment overlapping `[clip.start, clip.end)` with
/// positive length, joined by single spaces in temporal order. Segments that
/// only touch the clip at an endpoint are excluded.
pub fn overlap_asr(clip: &ClipRecord, segments: &[AsrSegment]) -> String {
    segments
        .iter()
        .filter(|s| s.start < clip.end && s.end > clip.start)
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Checks invariants that span records: unique ids, clips inside their
/// parent video and pairwise disjoint per video. Returns offending ids.
pub fn cross_record_violations(records: &[Record]) -> Vec<(String, Violation)> {
    let mut out = Vec::new();
    let mut durations: BTreeMap<&str, Millis> = BTreeMap::new();
    for r in records {
        if let Record::Video(v) = r {
            if durations.insert(&v.video_id, v.duration).is_some() {
                out.push((v.video_id.clone(), Violation::DuplicateVideoId));
            }
        }
    }
    let mut seen = HashSet::new();
    let mut per_video: BTreeMap<&str, Vec<&ClipRecord>> = BTreeMap::new();
    for r in records {
        if let Record::Clip(c) = r {
            if !seen.insert(c.clip_id.as_str()) {
                out.push((c.clip_id.clone(), Violation::DuplicateClipId));
            }
            match durations.get(c.video_id.as_str()) {
                None => out.push((c.clip_id.clone(), Violation::MissingParentVideo)),
                Some(d) if c.end > *d => out.push((c.clip_id.clone(), Violation::ClipBeyondVideo)),
                Some(_) => {}
            }
            per_video.entry(&c.video_id).or_default().push(c);
        }
    }
    for clips in per_video.values_mut() {
        clips.sort_by_key(|c| (c.start, c.end));
        for w in clips.windows(2) {
            if w[1].start < w[0].end {
                out.push((w[1].clip_id.clone(), Violation::OverlappingClips));
            }
        }
    }
    out
}
