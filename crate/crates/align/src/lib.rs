//! Desk-scale numerics for contrastive video-text alignment.
//!
//! Matrices are `ndarray::Array2<f64>` with one sample or token per row.

pub mod attention;
pub mod batch;
pub mod mask;
pub mod matrix;
pub mod metrics;
pub mod nce;
pub mod train;

use thiserror::Error;

pub use attention::{attention, attention_weights, spatiotemporal_attention, st_attn, Projections};
pub use batch::{EmbeddingBatch, TemperatureParam, TokenLayout};
pub use mask::generate_patch_mask;
pub use metrics::{avg_top1_top5, recall_at_k, topk_accuracy};
pub use nce::{info_nce, info_nce_grad, InfoNce, InfoNceGrad};
pub use train::{train_alignment, AlignTrainConfig, TrainedAlignment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("row {0} has zero norm")]
    ZeroRow(usize),
    #[error("non-finite entry")]
    NonFinite,
    #[error("mask ratio {0} outside [0, 1)")]
    RatioOutOfRange(f64),
    #[error("token matrix does not match layout: {0}")]
    LayoutMismatch(String),
    #[error("training needs at least two pairs, got {0}")]
    DegenerateBatch(usize),
    #[error("k = {k} outside 1..={m}")]
    BadK { k: usize, m: usize },
    #[error("invalid config: {0}")]
    BadConfig(String),
}
