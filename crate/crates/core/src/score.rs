//! Per-clip computational features.
//!
//! Frame-level aesthetic scores and embeddings come from external models;
//! this module only aggregates them. Both clip scores look at four uniformly
//! sampled frames: the aesthetic score is the best frame's score, and the
//! video-text similarity compares the mean-pooled frame embedding with the
//! caption embedding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ScoreSet;

/// Frames sampled per clip for both aesthetic and similarity scoring.
pub const SAMPLED_FRAMES: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("empty input")]
    EmptyInput,
    #[error("cannot sample {k} frames from {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("non-finite value")]
    NonFinite,
}

/// `floor((i + 0.5) * n / k)` for `i in 0..k`, computed in integers.
pub fn uniform_sample_indices(n_frames: usize, k: usize) -> Result<Vec<usize>, ScoreError> {
    if k > n_frames {
        return Err(ScoreError::KTooLarge { k, n: n_frames });
    }
    Ok((0..k).map(|i| (2 * i + 1) * n_frames / (2 * k)).collect())
}

pub fn aesthetic_score(frame_scores: &[f64]) -> Result<f64, ScoreError> {
    if frame_scores.iter().any(|s| !s.is_finite()) {
        return Err(ScoreError::NonFinite);
    }
    frame_scores.iter().copied().reduce(f64::max).ok_or(ScoreError::EmptyInput)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, ScoreError> {
    if a.len() != b.len() {
        return Err(ScoreError::DimMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(ScoreError::ZeroVector);
    }
    if !(dot.is_finite() && na.is_finite() && nb.is_finite()) {
        return Err(ScoreError::NonFinite);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn mean_pool(frames: &[Vec<f64>]) -> Result<Vec<f64>, ScoreError> {
    let first = frames.first().ok_or(ScoreError::EmptyInput)?;
    let mut acc = vec![0.0; first.len()];
    for f in frames {
        if f.len() != acc.len() {
            return Err(ScoreError::DimMismatch(acc.len(), f.len()));
        }
        for (a, x) in acc.iter_mut().zip(f) {
            *a += x;
        }
    }
    let n = frames.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Cosine between the mean-pooled frame embedding and the text embedding.
pub fn umt_sim(frame_embeddings: &[Vec<f64>], text_embedding: &[f64]) -> Result<f64, ScoreError> {
    cosine_similarity(&mean_pool(frame_embeddings)?, text_embedding)
}

/// Mean over frames of the frame-text cosine.
pub fn clipsim(per_frame_embeddings: &[Vec<f64>], text_embedding: &[f64]) -> Result<f64, ScoreError> {
    if per_frame_embeddings.is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    let mut total = 0.0;
    for f in per_frame_embeddings {
        total += cosine_similarity(f, text_embedding)?;
    }
    Ok(total / per_frame_embeddings.len() as f64)
}

/// One sidecar line: frame-level features for all decoded frames of a clip
/// and the embedding of its caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipFeatures {
    pub clip_id: String,
    pub frame_scores: Vec<f64>,
    pub frame_embeddings: Vec<Vec<f64>>,
    pub text_embedding: Vec<f64>,
}

/// Samples [`SAMPLED_FRAMES`] frames and computes both clip scores.
pub fn score_clip(features: &ClipFeatures) -> Result<ScoreSet, ScoreError> {
    let scores: Vec<f64> = uniform_sample_indices(features.frame_scores.len(), SAMPLED_FRAMES)?
        .into_iter()
        .map(|i| features.frame_scores[i])
        .collect();
    let embeddings: Vec<Vec<f64>> = uniform_sample_indices(features.frame_embeddings.len(), SAMPLED_FRAMES)?
        .into_iter()
        .map(|i| features.frame_embeddings[i].clone())
        .collect();
    Ok(ScoreSet {
        aesthetic: aesthetic_score(&scores)?,
        umt_sim: umt_sim(&embeddings, &features.text_embedding)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sample_index_examples() {
        assert_eq!(uniform_sample_indices(8, 8).unwrap(), (0..8).collect::<Vec<_>>());
        assert_eq!(uniform_sample_indices(9, 1).unwrap(), vec![4]);
        assert_eq!(uniform_sample_indices(8, 4).unwrap(), vec![1, 3, 5, 7]);
        assert_eq!(uniform_sample_indices(3, 4), Err(ScoreError::KTooLarge { k: 4, n: 3 }));
    }

    #[test]
    fn aesthetic_examples() {
        assert_eq!(aesthetic_score(&[3.0, 5.2, 4.1, 4.9]).unwrap(), 5.2);
        assert_eq!(aesthetic_score(&[4.4]).unwrap(), 4.4);
        assert_eq!(aesthetic_score(&[4.9, 4.1, 5.2, 3.0]).unwrap(), 5.2);
        assert_eq!(aesthetic_score(&[]), Err(ScoreError::EmptyInput));
        assert_eq!(aesthetic_score(&[1.0, f64::NAN]), Err(ScoreError::NonFinite));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - 0.7071067811865475).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), Err(ScoreError::ZeroVector));
        assert_eq!(cosine_similarity(&[1.0], &[1.0, 1.0]), Err(ScoreError::DimMismatch(1, 2)));
    }

    #[test]
    fn umt_sim_examples() {
        let t = vec![0.3, -1.2, 2.0];
        assert!((umt_sim(&[t.clone(), t.clone()], &t).unwrap() - 1.0).abs() < 1e-15);
        let e = vec![1.0, 2.0, 3.0];
        let neg: Vec<f64> = e.iter().map(|x| -x).collect();
        assert_eq!(umt_sim(&[e, neg], &t), Err(ScoreError::ZeroVector));
        let frames = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = umt_sim(&frames, &[1.0, 0.0]).unwrap();
        assert!((s - 0.7071067811865475).abs() < 1e-12);
    }

    #[test]
    fn clipsim_examples() {
        let t = vec![1.0, 0.0];
        assert_eq!(clipsim(&[t.clone(), t.clone()], &t).unwrap(), 1.0);
        assert_eq!(clipsim(&[t.clone(), vec![0.0, 3.0]], &t).unwrap(), 0.5);
        assert_eq!(clipsim(&[t.clone(), vec![0.0, 1.0], vec![-2.0, 0.0]], &t).unwrap(), 0.0);
        assert_eq!(clipsim(&[t.clone(), vec![0.0, 0.0]], &t), Err(ScoreError::ZeroVector));
    }

    #[test]
    fn score_clip_uses_four_frames() {
        // Only frames 1, 3, 5, 7 are sampled; the 9.9 at frame 0 is ignored.
        let features = ClipFeatures {
            clip_id: "c".into(),
            frame_scores: vec![9.9, 4.0, 1.0, 5.5, 1.0, 4.5, 1.0, 3.0],
            frame_embeddings: (0..8).map(|i| if i % 2 == 1 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect(),
            text_embedding: vec![1.0, 0.0],
        };
        let s = score_clip(&features).unwrap();
        assert_eq!(s.aesthetic, 5.5);
        assert_eq!(s.umt_sim, 1.0);
    }

    proptest! {
        #[test]
        fn sample_indices_are_sorted_and_reflective(n in 1usize..500, k_frac in 0.0f64..1.0) {
            let k = 1 + ((n - 1) as f64 * k_frac) as usize;
            let idx = uniform_sample_indices(n, k).unwrap();
            prop_assert_eq!(idx.len(), k);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(idx.iter().all(|&i| i < n));
            // Reflection i -> n-1-i maps the sample onto itself up to the floor rule.
            for (a, b) in idx.iter().zip(idx.iter().rev()) {
                let gap = (a + b) as i64 - (n as i64 - 1);
                prop_assert!((-1..=1).contains(&gap), "{a} {b} {n}");
            }
        }

        #[test]
        fn scores_are_scale_invariant(
            frames in prop::collection::vec(prop::collection::vec(0.1f64..5.0, 3), 1..6),
            text in prop::collection::vec(-5.0f64..5.0, 3),
            scale in 0.01f64..100.0,
        ) {
            prop_assume!(text.iter().any(|x| x.abs() > 0.1));
            let scaled_text: Vec<f64> = text.iter().map(|x| x * scale).collect();
            let scaled_frames: Vec<Vec<f64>> = frames.iter().map(|f| f.iter().map(|x| x * scale).collect()).collect();
            let a = umt_sim(&frames, &text).unwrap();
            prop_assert!((a - umt_sim(&frames, &scaled_text).unwrap()).abs() < 1e-12);
            prop_assert!((a - umt_sim(&scaled_frames, &text).unwrap()).abs() < 1e-12);
            let mut one_scaled = frames.clone();
            one_scaled[0] = scaled_frames[0].clone();
            let c = clipsim(&frames, &text).unwrap();
            prop_assert!((c - clipsim(&one_scaled, &text).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn aesthetic_is_an_upper_bound_member(s in prop::collection::vec(-10.0f64..10.0, 1..20)) {
            let m = aesthetic_score(&s).unwrap();
            prop_assert!(s.iter().all(|&x| m >= x));
            prop_assert!(s.contains(&m));
        }
    }
}
