//! Toy alignment trainer: plain gradient descent on two linear projections
//! and the log-temperature, minimizing InfoNCE of the projected batches.
//!
//! With `mask_ratio > 0` each step zeroes a random subset of every video
//! row's input dimensions, drawn per sample, except during the final
//! `unmasked_tail_fraction` of the steps. `loss_curve[k]` is always the
//! unmasked loss after `k` steps, so it has `steps + 1` entries.

use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::batch::{EmbeddingBatch, TemperatureParam, TokenLayout};
use crate::mask::{generate_patch_mask, keep_count};
use crate::nce::loss_and_grad;
use crate::AlignError;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignTrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub mask_ratio: f64,
    pub unmasked_tail_fraction: f64,
    pub seed: u64,
    /// Width of the shared embedding space both projections map into.
    pub proj_dim: usize,
}

impl Default for AlignTrainConfig {
    fn default() -> Self {
        AlignTrainConfig {
            steps: 500,
            learning_rate: 4e-6,
            mask_ratio: 0.0,
            unmasked_tail_fraction: 0.0,
            seed: 0,
            proj_dim: 512,
        }
    }
}

impl AlignTrainConfig {
    pub fn validate(&self, input_dim: usize) -> Result<(), AlignError> {
        if !(0.0..1.0).contains(&self.mask_ratio) {
            return Err(AlignError::RatioOutOfRange(self.mask_ratio));
        }
        if !(0.0..=1.0).contains(&self.unmasked_tail_fraction) {
            return Err(AlignError::BadConfig(format!(
                "unmasked_tail_fraction {} outside [0, 1]",
                self.unmasked_tail_fraction
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(AlignError::BadConfig(format!("learning rate {}", self.learning_rate)));
        }
        if self.proj_dim == 0 {
            return Err(AlignError::BadConfig("proj_dim must be positive".into()));
        }
        if keep_count(input_dim, self.mask_ratio) == 0 {
            return Err(AlignError::BadConfig(format!(
                "mask ratio {} keeps no dimension of {input_dim}",
                self.mask_ratio
            )));
        }
        Ok(())
    }

    /// Number of leading steps that train on masked inputs.
    pub fn masked_steps(&self) -> usize {
        if self.mask_ratio == 0.0 {
            return 0;
        }
        let tail = (self.unmasked_tail_fraction * self.steps as f64).round() as usize;
        self.steps - tail.min(self.steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAlignment {
    pub wv: Array2<f64>,
    pub wt: Array2<f64>,
    pub temperature: TemperatureParam,
    pub loss_curve: Vec<f64>,
}

/// `D x E` matrix with `N(0, 1/D)` entries.
pub fn init_projection(rng: &mut ChaCha8Rng, d: usize, e: usize) -> Array2<f64> {
    let scale = (d as f64).sqrt().recip();
    Array2::from_shape_simple_fn((d, e), || rng.sample::<f64, _>(StandardNormal) * scale)
}

pub fn initial_parameters(input_dim: usize, config: &AlignTrainConfig) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let wv = init_projection(&mut rng, input_dim, config.proj_dim);
    let wt = init_projection(&mut rng, input_dim, config.proj_dim);
    (wv, wt)
}

fn project(x: &Array2<f64>, w: &Array2<f64>) -> Result<EmbeddingBatch, AlignError> {
    EmbeddingBatch::new(x.dot(w))
}

fn mask_rows(x: &Array2<f64>, ratio: f64, rng: &mut ChaCha8Rng) -> Result<Array2<f64>, AlignError> {
    let layout = TokenLayout { frames: 1, patches: x.ncols(), dim: 1, has_cls: false };
    let mut out = Array2::zeros(x.dim());
    for (i, row) in x.rows().into_iter().enumerate() {
        for j in generate_patch_mask(layout, ratio, rng.next_u64())? {
            out[[i, j]] = row[j];
        }
    }
    Ok(out)
}

pub fn train_alignment(
    v: &EmbeddingBatch,
    t: &EmbeddingBatch,
    config: &AlignTrainConfig,
) -> Result<TrainedAlignment, AlignError> {
    if v.rows() != t.rows() || v.dim() != t.dim() {
        return Err(AlignError::ShapeMismatch(format!("{:?} vs {:?}", v.data().dim(), t.data().dim())));
    }
    if v.rows() < 2 {
        return Err(AlignError::DegenerateBatch(v.rows()));
    }
    config.validate(v.dim())?;
    let (mut wv, mut wt) = initial_parameters(v.dim(), config);
    let mut tau = TemperatureParam::default();
    let mut mask_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6d61_736b);
    let masked_steps = config.masked_steps();
    let lr = config.learning_rate;
    let mut curve = Vec::with_capacity(config.steps + 1);

    for step in 0..config.steps {
        let masked = step < masked_steps;
        let vin = if masked { mask_rows(v.data(), config.mask_ratio, &mut mask_rng)? } else { v.data().clone() };
        let pt = project(t.data(), &wt)?;
        let (loss, grad) = loss_and_grad(&project(&vin, &wv)?, &pt, tau)?;
        if masked {
            curve.push(loss_and_grad(&project(v.data(), &wv)?, &pt, tau)?.0.loss);
        } else {
            curve.push(loss.loss);
        }
        let gwv = vin.t().dot(&grad.dv);
        let gwt = t.data().t().dot(&grad.dt);
        wv.scaled_add(-lr, &gwv);
        wt.scaled_add(-lr, &gwt);
        tau.log_tau -= lr * grad.dlog_tau;
    }
    let (final_loss, _) = loss_and_grad(&project(v.data(), &wv)?, &project(t.data(), &wt)?, tau)?;
    curve.push(final_loss.loss);
    Ok(TrainedAlignment { wv, wt, temperature: tau, loss_curve: curve })
}
