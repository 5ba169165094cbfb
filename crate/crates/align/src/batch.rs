use ndarray::Array2;

use crate::AlignError;

/// `N x D` embeddings, row `i` of a video batch paired with row `i` of a
/// text batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    data: Array2<f64>,
}

impl EmbeddingBatch {
    pub fn new(data: Array2<f64>) -> Result<EmbeddingBatch, AlignError> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(AlignError::ShapeMismatch(format!("empty batch {:?}", data.dim())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(AlignError::NonFinite);
        }
        Ok(EmbeddingBatch { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<EmbeddingBatch, AlignError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(AlignError::ShapeMismatch("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| AlignError::ShapeMismatch(e.to_string()))?;
        EmbeddingBatch::new(data)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// Temperature stored as its logarithm so that `tau > 0` always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureParam {
    pub log_tau: f64,
}

impl TemperatureParam {
    pub const INITIAL_TAU: f64 = 0.07;

    pub fn from_tau(tau: f64) -> TemperatureParam {
        TemperatureParam { log_tau: tau.ln() }
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }
}

impl Default for TemperatureParam {
    fn default() -> Self {
        TemperatureParam::from_tau(Self::INITIAL_TAU)
    }
}

/// Token grid of a clip: `frames x patches` tokens of width `dim`, plus an
/// optional class token stored first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenLayout {
    pub frames: usize,
    pub patches: usize,
    pub dim: usize,
    pub has_cls: bool,
}

impl TokenLayout {
    pub fn patch_tokens(&self) -> usize {
        self.frames * self.patches
    }

    pub fn tokens(&self) -> usize {
        self.patch_tokens() + usize::from(self.has_cls)
    }
}
