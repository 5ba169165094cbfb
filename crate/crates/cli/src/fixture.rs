//! Synthetic corpus: video records with transcripts plus signature streams
//! made of flat scenes with small frame-to-frame jitter.
//!
//! Scene boundaries change every signature component by at least 60, far
//! above the default cut threshold. Some scenes are frozen (no jitter) and
//! some are shorter than the minimum scene length, so every segmenter
//! verdict shows up. All draws are keyed, so the output depends only on the
//! seed and the video count.

use std::path::Path;

use vidcurate_core::keyed::keyed_unit;
use vidcurate_core::segment::FrameSignature;
use vidcurate_core::signature::{signature_path, SignatureStream};
use vidcurate_core::{AsrSegment, Manifest, Millis, Record, Resolution, VideoRecord};

use crate::error::CliError;
use crate::io::write_atomic;

pub const SIGNATURE_DIM: usize = 4;

const CATEGORIES: [&str; 16] = [
    "animals", "cooking", "sports", "travel", "music", "education", "gaming", "news", "vehicles", "fashion",
    "science", "comedy", "nature", "crafts", "fitness", "family",
];
const LANGUAGES: [&str; 4] = ["en", "de", "fr", "es"];
const RESOLUTIONS: [(u32, u32); 3] = [(1280, 720), (640, 360), (960, 540)];
const FPS: [f64; 3] = [10.0, 12.5, 8.0];
const PHRASES: [&str; 12] = [
    "welcome back to the channel",
    "today we are going to try something new",
    "look at this",
    "keep going",
    "that was close",
    "now add the rest",
    "♪ music ♪",
    "thanks for watching",
    "here we go",
    "let me show you how",
    "almost there",
    "what a view",
];

pub struct Fixture {
    pub manifest: Manifest,
    pub signatures: Vec<(String, SignatureStream)>,
}

fn draw(seed: u64, what: &str, key: &str) -> f64 {
    keyed_unit(seed, what, key)
}

fn pick<T: Copy>(items: &[T], u: f64) -> T {
    items[((u * items.len() as f64) as usize).min(items.len() - 1)]
}

fn signature_stream(seed: u64, id: &str, fps: f64, n_frames: usize) -> SignatureStream {
    let mut frames = Vec::with_capacity(n_frames);
    let mut base: Vec<f64> =
        (0..SIGNATURE_DIM).map(|d| 40.0 + (draw(seed, "fixture-base", &format!("{id}/0/{d}")) * 175.0).floor()).collect();
    let mut scene = 0usize;
    while frames.len() < n_frames {
        let key = format!("{id}/{scene}");
        let kind = draw(seed, "fixture-kind", &key);
        let secs = if kind < 0.08 { 1.0 } else { 3.0 + (draw(seed, "fixture-len", &key) * 11.0).floor() };
        let amp = if (0.08..0.2).contains(&kind) { 0.0 } else { 1.0 + (draw(seed, "fixture-amp", &key) * 8.0).floor() };
        let len = (secs * fps) as usize;
        for f in 0..len.min(n_frames - frames.len()) {
            let sign = if f % 2 == 0 { 1.0 } else { -1.0 };
            let values = base.iter().map(|b| b + sign * amp).collect();
            frames.push(FrameSignature::new(frames.len() as u64, values));
        }
        scene += 1;
        for (d, b) in base.iter_mut().enumerate() {
            let step = 60.0 + (draw(seed, "fixture-step", &format!("{id}/{scene}/{d}")) * 55.0).floor();
            *b = 40.0 + (*b - 40.0 + step) % 175.0;
        }
    }
    SignatureStream { dim: SIGNATURE_DIM, fps, frames }
}

fn transcript(seed: u64, id: &str, duration: Millis) -> Vec<AsrSegment> {
    if draw(seed, "fixture-has-asr", id) < 0.3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut t = (draw(seed, "fixture-asr-offset", id) * 3000.0) as i64;
    let mut k = 0;
    while t + 1000 < duration.0 {
        let key = format!("{id}/{k}");
        let len = 1000 + (draw(seed, "fixture-asr-len", &key) * 3000.0) as i64;
        let end = (t + len).min(duration.0);
        out.push(AsrSegment { start: Millis(t), end: Millis(end), text: pick(&PHRASES, draw(seed, "fixture-asr-text", &key)).into() });
        t = end + 500 + (draw(seed, "fixture-asr-gap", &key) * 4000.0) as i64;
        k += 1;
    }
    out
}

pub fn generate(n_videos: usize, seed: u64) -> Fixture {
    let mut records = Vec::with_capacity(n_videos);
    let mut signatures = Vec::with_capacity(n_videos);
    for i in 0..n_videos {
        let id = format!("vid{i:03}");
        let fps = pick(&FPS, draw(seed, "fixture-fps", &id));
        let secs = 20 + (draw(seed, "fixture-duration", &id) * 70.0) as usize;
        let n_frames = (secs as f64 * fps) as usize;
        let duration = Millis((n_frames as f64 * 1000.0 / fps).round() as i64);
        let (width, height) = pick(&RESOLUTIONS, draw(seed, "fixture-res", &id));
        records.push(Record::Video(VideoRecord {
            video_id: id.clone(),
            duration,
            fps,
            resolution: Resolution { width, height },
            category: pick(&CATEGORIES, draw(seed, "fixture-category", &id)).into(),
            language: pick(&LANGUAGES, draw(seed, "fixture-language", &id)).into(),
            title: format!("Synthetic video {i}"),
            asr_segments: transcript(seed, &id, duration),
            extra: Default::default(),
        }));
        signatures.push((id.clone(), signature_stream(seed, &id, fps, n_frames)));
    }
    Fixture { manifest: Manifest::new(records), signatures }
}

/// Writes `manifest.jsonl` and `signatures/<video_id>.sig` under `dir`.
pub fn write(fixture: &Fixture, dir: &Path) -> Result<(), CliError> {
    write_atomic(&dir.join("manifest.jsonl"), fixture.manifest.to_text().as_bytes())?;
    let sig_dir = dir.join("signatures");
    for (id, s) in &fixture.signatures {
        let mut buf = Vec::new();
        s.write_to(&mut buf)?;
        write_atomic(&signature_path(&sig_dir, id), &buf)?;
    }
    Ok(())
}
