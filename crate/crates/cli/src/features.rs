//! Stand-in embedder producing the per-clip feature sidecar.
//!
//! The caption embedding is a bag of hashed word vectors. Frame embeddings
//! mix that vector with keyed noise in a per-clip proportion, so clips span
//! a range of video-text similarity. Frame aesthetic scores are keyed draws
//! in `[3, 8)`. Only arithmetic and square roots are used, which keeps the
//! output identical across platforms.

use vidcurate_core::keyed::keyed_unit;
use vidcurate_core::score::ClipFeatures;
use vidcurate_core::tagger::tokenize;
use vidcurate_core::ClipRecord;

pub const DEFAULT_DIM: usize = 16;
pub const DEFAULT_FRAMES: usize = 8;

fn centered(seed: u64, domain: &str, key: &str) -> f64 {
    keyed_unit(seed, domain, key) - 0.5
}

pub fn text_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for tok in tokenize(text) {
        for (d, x) in v.iter_mut().enumerate() {
            *x += centered(0, "embed-word", &format!("{tok}/{d}"));
        }
    }
    v
}

pub fn clip_features(clip: &ClipRecord, dim: usize, frames: usize, seed: u64) -> ClipFeatures {
    let id = &clip.clip_id;
    let mut text = text_embedding(clip.caption.as_deref().unwrap_or(""), dim);
    if text.iter().all(|&x| x == 0.0) {
        text = (0..dim).map(|d| centered(seed, "embed-empty", &format!("{id}/{d}"))).collect();
    }
    let norm = text.iter().map(|x| x * x).sum::<f64>().sqrt();
    let align = keyed_unit(seed, "embed-align", id);
    let frame_embeddings = (0..frames)
        .map(|f| {
            (0..dim)
                .map(|d| align * text[d] + (1.0 - align) * 2.0 * norm * centered(seed, "embed-noise", &format!("{id}/{f}/{d}")))
                .collect()
        })
        .collect();
    let frame_scores = (0..frames).map(|f| 3.0 + 5.0 * keyed_unit(seed, "embed-aesthetic", &format!("{id}/{f}"))).collect();
    ClipFeatures { clip_id: id.clone(), frame_scores, frame_embeddings, text_embedding: text }
}
