//! Multiscale clip captioning.
//!
//! The fine scale captions frames sampled at a low rate one by one and asks a
//! summarizer to merge them; the coarse scale captions the middle frame
//! only. Both scales run concurrently. A scale that fails after all retries
//! is reported in a [`PartialResult`] while the other scale's output is kept,
//! and a re-run only requests what is still missing.

pub mod client;
pub mod service;
pub mod stub;

use futures::{stream, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use vidcurate_core::{ClipRecord, MultiscaleCaption};

pub use client::{CaptionServiceSpec, ServiceClient, ServiceFailure};
pub use service::{service_for_endpoint, CallError, CaptionService, HttpService, Mode, ServiceRequest, ServiceResponse};
pub use stub::StubService;

pub const DEFAULT_SUMMARY_PROMPT: &str = include_str!("../assets/summary_prompt.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalSource {
    FineSummary,
    Coarse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionPlan {
    pub fine_fps: f64,
    pub canonical_source: CanonicalSource,
    pub summary_prompt: String,
}

impl Default for CaptionPlan {
    fn default() -> Self {
        CaptionPlan {
            fine_fps: 1.0,
            canonical_source: CanonicalSource::FineSummary,
            summary_prompt: DEFAULT_SUMMARY_PROMPT.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Fine,
    Coarse,
}

/// What a clip got before one scale gave up. `clip` already carries the
/// successful scale and a canonical caption taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialResult {
    pub clip: ClipRecord,
    pub failed: Scale,
    pub failure: ServiceFailure,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CaptionError {
    #[error("invalid caption plan: {0}")]
    InvalidPlan(String),
    #[error("clip {0} has no frames")]
    NoFrames(String),
    #[error("{scale:?} scale timed out after {attempts} attempts")]
    ServiceTimeout { scale: Scale, attempts: u32 },
    #[error("{scale:?} scale failed after {attempts} attempts: {message}")]
    ServiceError { scale: Scale, attempts: u32, message: String },
    #[error("{:?} scale failed after {} attempts: {}", .0.failed, .0.failure.attempts, .0.failure.last)]
    Partial(Box<PartialResult>),
}

impl CaptionError {
    fn from_failure(scale: Scale, f: ServiceFailure) -> CaptionError {
        match f.last {
            CallError::Timeout => CaptionError::ServiceTimeout { scale, attempts: f.attempts },
            other => CaptionError::ServiceError { scale, attempts: f.attempts, message: other.to_string() },
        }
    }
}

/// Frame positions `floor(j * clip_fps / fine_fps)` below `n_frames`.
/// Repeats, which appear when `fine_fps > clip_fps`, are collapsed.
pub fn fine_frame_indices(n_frames: u64, clip_fps: f64, fine_fps: f64) -> Vec<u64> {
    let step = clip_fps / fine_fps;
    let mut out: Vec<u64> = Vec::new();
    for j in 0u64.. {
        let idx = (j as f64 * step).floor() as u64;
        if idx >= n_frames {
            break;
        }
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    out
}

pub fn middle_frame_index(n_frames: u64) -> u64 {
    n_frames / 2
}

/// Frame references of one clip, position `i` naming the clip's `i`-th
/// decoded frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFrames {
    pub fps: f64,
    pub refs: Vec<String>,
}

impl ClipFrames {
    /// References `"<video_id>#<frame>"` for the frames whose start times
    /// fall inside the clip, with frame `f` starting at `f / fps` seconds.
    pub fn for_clip(clip: &ClipRecord, video_fps: f64) -> ClipFrames {
        let first = (clip.start.as_secs_f64() * video_fps).round() as u64;
        let last = ((clip.end.as_secs_f64() * video_fps).round() as u64).max(first + 1);
        ClipFrames { fps: video_fps, refs: (first..last).map(|f| format!("{}#{f}", clip.video_id)).collect() }
    }
}

pub struct CaptionServices {
    pub fine: ServiceClient,
    pub summarizer: ServiceClient,
    pub coarse: ServiceClient,
}

impl CaptionServices {
    pub fn from_specs(fine: CaptionServiceSpec, summarizer: CaptionServiceSpec, coarse: CaptionServiceSpec) -> Result<CaptionServices, String> {
        Ok(CaptionServices {
            fine: ServiceClient::from_spec(fine)?,
            summarizer: ServiceClient::from_spec(summarizer)?,
            coarse: ServiceClient::from_spec(coarse)?,
        })
    }

    fn max_in_flight(&self) -> usize {
        [&self.fine, &self.summarizer, &self.coarse].iter().map(|c| c.spec().max_in_flight).max().unwrap_or(1)
    }
}

fn frame_request(frame: &str) -> ServiceRequest {
    ServiceRequest { mode: Mode::Frame, inputs: vec![frame.to_string()], prompt: None }
}

async fn fine_scale(
    frames: &ClipFrames,
    services: &CaptionServices,
    plan: &CaptionPlan,
) -> Result<(Vec<(u64, String)>, String), ServiceFailure> {
    let indices = fine_frame_indices(frames.refs.len() as u64, frames.fps, plan.fine_fps);
    // One request per frame, issued together; join_all keeps index order.
    let replies = futures::future::join_all(
        indices.iter().map(|&i| services.fine.request(frame_request(&frames.refs[i as usize]), 1)),
    )
    .await;
    let mut captions = Vec::with_capacity(indices.len());
    for (i, r) in indices.into_iter().zip(replies) {
        captions.push((i, r?.outputs.remove(0)));
    }
    let request = ServiceRequest {
        mode: Mode::Summarize,
        inputs: captions.iter().map(|(_, c)| c.clone()).collect(),
        prompt: Some(plan.summary_prompt.clone()),
    };
    let summary = services.summarizer.request(request, 1).await?.outputs.remove(0);
    Ok((captions, summary))
}

async fn coarse_scale(frames: &ClipFrames, services: &CaptionServices) -> Result<String, ServiceFailure> {
    let mid = middle_frame_index(frames.refs.len() as u64) as usize;
    Ok(services.coarse.request(frame_request(&frames.refs[mid]), 1).await?.outputs.remove(0))
}

fn canonical(ms: &MultiscaleCaption, source: CanonicalSource) -> Option<String> {
    let (first, second) = match source {
        CanonicalSource::FineSummary => (&ms.fine_summary, &ms.coarse_caption),
        CanonicalSource::Coarse => (&ms.coarse_caption, &ms.fine_summary),
    };
    [first, second].into_iter().find(|s| !s.is_empty()).cloned()
}

/// Captions one clip at both scales. Scales already present on the clip are
/// kept as they are and not requested again.
pub async fn caption_clip(
    clip: &ClipRecord,
    frames: &ClipFrames,
    services: &CaptionServices,
    plan: &CaptionPlan,
) -> Result<ClipRecord, CaptionError> {
    if !(plan.fine_fps.is_finite() && plan.fine_fps > 0.0) {
        return Err(CaptionError::InvalidPlan(format!("fine_fps {}", plan.fine_fps)));
    }
    if !(frames.fps.is_finite() && frames.fps > 0.0) {
        return Err(CaptionError::InvalidPlan(format!("clip fps {}", frames.fps)));
    }
    if frames.refs.is_empty() {
        return Err(CaptionError::NoFrames(clip.clip_id.clone()));
    }
    let mut ms = clip.multiscale.clone().unwrap_or_default();
    let need_fine = !ms.has_fine();
    let need_coarse = !ms.has_coarse();
    let fine = async {
        if need_fine {
            Some(fine_scale(frames, services, plan).await)
        } else {
            None
        }
    };
    let coarse = async {
        if need_coarse {
            Some(coarse_scale(frames, services).await)
        } else {
            None
        }
    };
    let (fine, coarse) = futures::join!(fine, coarse);

    let mut failures = Vec::new();
    match fine {
        Some(Ok((captions, summary))) => {
            ms.fine_frame_captions = captions;
            ms.fine_summary = summary;
        }
        Some(Err(f)) => failures.push((Scale::Fine, f)),
        None => {}
    }
    match coarse {
        Some(Ok(c)) => ms.coarse_caption = c,
        Some(Err(f)) => failures.push((Scale::Coarse, f)),
        None => {}
    }
    let nothing = !ms.has_fine() && !ms.has_coarse();
    let mut out = clip.clone();
    out.caption = canonical(&ms, plan.canonical_source);
    out.multiscale = (!nothing).then_some(ms);
    match failures.into_iter().next() {
        None => Ok(out),
        Some((scale, f)) if nothing => Err(CaptionError::from_failure(scale, f)),
        Some((failed, failure)) => Err(CaptionError::Partial(Box::new(PartialResult { clip: out, failed, failure }))),
    }
}

/// Captions clips concurrently and returns results in input order.
pub async fn caption_clips(
    jobs: Vec<(ClipRecord, ClipFrames)>,
    services: &CaptionServices,
    plan: &CaptionPlan,
) -> Vec<Result<ClipRecord, CaptionError>> {
    stream::iter(jobs)
        .map(|(clip, frames)| async move { caption_clip(&clip, &frames, services, plan).await })
        .buffered(services.max_in_flight())
        .collect()
        .await
}
