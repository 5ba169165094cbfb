//! Training-subset construction.
//!
//! Three strategies:
//!
//! * **Random**: uniform without replacement.
//! * **Div**: first one clip from as many distinct videos as the budget
//!   allows (videos in seeded random order, each represented by its clip
//!   nearest the temporal middle), then the rest of the budget by weighted
//!   sampling without replacement with weight `1 / source video duration`.
//! * **Flt**: Div restricted to clips whose similarity score is in the top
//!   fraction (30% by default) of the pool.
//!
//! Randomness uses keyed draws from [`crate::keyed`]: every clip gets a key
//! that depends only on `(seed, clip_id)`, and weighted selection takes the
//! `n` smallest exponential-race keys `-ln(u) / w`. Outputs are sorted by
//! clip id.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::corpus::{ClipRecord, Millis};
use crate::keyed::{keyed_open_unit, keyed_unit};

pub const DEFAULT_TOP_FRACTION: f64 = 0.30;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("clip {clip_id} references unknown video {video_id}")]
    MissingVideo { clip_id: String, video_id: String },
    #[error("video {0} has nonpositive duration")]
    NonpositiveDuration(String),
    #[error("clip {0} has no similarity score")]
    MissingScore(String),
    #[error("empty input")]
    EmptyInput,
    #[error("top fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Random,
    Div,
    Flt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSpec {
    pub strategy: Strategy,
    pub n: usize,
    pub seed: u64,
    pub top_fraction: f64,
}

impl SubsetSpec {
    pub fn new(strategy: Strategy, n: usize, seed: u64) -> SubsetSpec {
        SubsetSpec { strategy, n, seed, top_fraction: DEFAULT_TOP_FRACTION }
    }
}

/// Video durations keyed by video id.
pub type Durations = HashMap<String, Millis>;

pub fn sample(clips: &[ClipRecord], videos: &Durations, spec: &SubsetSpec) -> Result<Vec<ClipRecord>, SampleError> {
    match spec.strategy {
        Strategy::Random => Ok(sample_random(clips, spec.n, spec.seed)),
        Strategy::Div => sample_div(clips, videos, spec.n, spec.seed),
        Strategy::Flt => sample_flt(clips, videos, spec.n, spec.seed, spec.top_fraction),
    }
}

fn sorted_by_id(mut out: Vec<ClipRecord>) -> Vec<ClipRecord> {
    out.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    out
}

/// Indices of the `n` smallest keys; ties broken by clip id.
fn smallest_keys(keys: &mut [(f64, usize)], clips: &[ClipRecord], n: usize) -> Vec<usize> {
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| clips[a.1].clip_id.cmp(&clips[b.1].clip_id)));
    keys.iter().take(n).map(|k| k.1).collect()
}

pub fn sample_random(clips: &[ClipRecord], n: usize, seed: u64) -> Vec<ClipRecord> {
    let mut keys: Vec<(f64, usize)> = clips
        .iter()
        .enumerate()
        .map(|(i, c)| (keyed_unit(seed, "sample-random", &c.clip_id), i))
        .collect();
    let picked = smallest_keys(&mut keys, clips, n);
    sorted_by_id(picked.into_iter().map(|i| clips[i].clone()).collect())
}

fn duration_of<'a>(clip: &ClipRecord, videos: &'a Durations) -> Result<&'a Millis, SampleError> {
    let d = videos.get(&clip.video_id).ok_or_else(|| SampleError::MissingVideo {
        clip_id: clip.clip_id.clone(),
        video_id: clip.video_id.clone(),
    })?;
    if d.0 <= 0 {
        return Err(SampleError::NonpositiveDuration(clip.video_id.clone()));
    }
    Ok(d)
}

/// `1 / duration_s` of each clip's source video.
pub fn div_weights(clips: &[ClipRecord], videos: &Durations) -> Result<BTreeMap<String, f64>, SampleError> {
    clips
        .iter()
        .map(|c| Ok((c.clip_id.clone(), 1.0 / duration_of(c, videos)?.as_secs_f64())))
        .collect()
}

pub fn sample_div(clips: &[ClipRecord], videos: &Durations, n: usize, seed: u64) -> Result<Vec<ClipRecord>, SampleError> {
    let weights = div_weights(clips, videos)?;

    // Phase 1: one representative per video, videos in seeded order.
    let mut by_video: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in clips.iter().enumerate() {
        by_video.entry(&c.video_id).or_default().push(i);
    }
    let mut order: Vec<(f64, &str)> = by_video
        .keys()
        .map(|v| (keyed_unit(seed, "sample-div-video", v), *v))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let mut chosen = vec![false; clips.len()];
    let mut picked = Vec::with_capacity(n.min(clips.len()));
    for (_, video) in order.iter().take(n) {
        let duration = videos[*video].0;
        let rep = by_video[video]
            .iter()
            .copied()
            .min_by_key(|&i| {
                let c = &clips[i];
                ((c.start.0 + c.end.0 - duration).abs(), c.start)
            })
            .expect("every video has a clip");
        chosen[rep] = true;
        picked.push(rep);
    }

    // Phase 2: exponential race over the remaining clips.
    let remaining = n.saturating_sub(picked.len());
    if remaining > 0 {
        let mut keys: Vec<(f64, usize)> = clips
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen[*i])
            .map(|(i, c)| {
                let u = keyed_open_unit(seed, "sample-div-clip", &c.clip_id);
                (-u.ln() / weights[&c.clip_id], i)
            })
            .collect();
        picked.extend(smallest_keys(&mut keys, clips, remaining));
    }
    Ok(sorted_by_id(picked.into_iter().map(|i| clips[i].clone()).collect()))
}

/// The k-th largest score with `k = ceil(top_fraction * len)`: keeping every
/// score `>= threshold` keeps at least `k` items, plus any ties.
pub fn quantile_threshold(scores: &[f64], top_fraction: f64) -> Result<f64, SampleError> {
    if scores.is_empty() {
        return Err(SampleError::EmptyInput);
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(SampleError::BadFraction(top_fraction));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // Absorb representation error such as 0.3 * 10 = 3.0000000000000004.
    let k = ((top_fraction * scores.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[k.min(sorted.len()) - 1])
}

pub fn sample_flt(
    clips: &[ClipRecord],
    videos: &Durations,
    n: usize,
    seed: u64,
    top_fraction: f64,
) -> Result<Vec<ClipRecord>, SampleError> {
    let sims = clips
        .iter()
        .map(|c| c.scores.map(|s| s.umt_sim).ok_or_else(|| SampleError::MissingScore(c.clip_id.clone())))
        .collect::<Result<Vec<f64>, _>>()?;
    if clips.is_empty() {
        return Ok(Vec::new());
    }
    let threshold = quantile_threshold(&sims, top_fraction)?;
    let pool: Vec<ClipRecord> = clips
        .iter()
        .zip(&sims)
        .filter(|(_, &s)| s >= threshold)
        .map(|(c, _)| c.clone())
        .collect();
    sample_div(&pool, videos, n, seed)
}
