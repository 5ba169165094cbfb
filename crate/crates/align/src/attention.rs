//! Scaled dot-product attention and two video variants built on it.
//!
//! `spatiotemporal_attention` attends jointly over every token of the clip.
//! `st_attn` lets frame `t` attend to frames `t - 1` and `t` only; frame 0
//! uses itself as its previous frame.

use ndarray::{concatenate, s, Array2, Array3, Axis};

use crate::batch::TokenLayout;
use crate::AlignError;

/// Query, key and value projections, each `D x D_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
}

impl Projections {
    pub fn identity(dim: usize) -> Projections {
        let eye = Array2::eye(dim);
        Projections { wq: eye.clone(), wk: eye.clone(), wv: eye }
    }

    fn check(&self, dim: usize) -> Result<(), AlignError> {
        if self.wq.nrows() != dim || self.wk.nrows() != dim || self.wv.nrows() != dim || self.wq.ncols() != self.wk.ncols() {
            return Err(AlignError::ShapeMismatch(format!(
                "projections {:?} {:?} {:?} for token dim {dim}",
                self.wq.dim(),
                self.wk.dim(),
                self.wv.dim()
            )));
        }
        Ok(())
    }
}

/// Row-stochastic weights `softmax(Q K^T / sqrt(D))`.
pub fn attention_weights(q: &Array2<f64>, k: &Array2<f64>) -> Result<Array2<f64>, AlignError> {
    if q.ncols() != k.ncols() || k.nrows() == 0 {
        return Err(AlignError::ShapeMismatch(format!("Q {:?} vs K {:?}", q.dim(), k.dim())));
    }
    let mut w = q.dot(&k.t()) / (q.ncols() as f64).sqrt();
    for mut row in w.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row /= z;
    }
    Ok(w)
}

pub fn attention(q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>) -> Result<Array2<f64>, AlignError> {
    if k.nrows() != v.nrows() {
        return Err(AlignError::ShapeMismatch(format!("K {:?} vs V {:?}", k.dim(), v.dim())));
    }
    Ok(attention_weights(q, k)?.dot(v))
}

/// Joint attention over all tokens of a `layout.tokens() x layout.dim`
/// matrix.
pub fn spatiotemporal_attention(
    tokens: &Array2<f64>,
    layout: TokenLayout,
    proj: &Projections,
) -> Result<Array2<f64>, AlignError> {
    if tokens.dim() != (layout.tokens(), layout.dim) {
        return Err(AlignError::LayoutMismatch(format!(
            "got {:?}, layout wants {:?}",
            tokens.dim(),
            (layout.tokens(), layout.dim)
        )));
    }
    proj.check(layout.dim)?;
    attention(&tokens.dot(&proj.wq), &tokens.dot(&proj.wk), &tokens.dot(&proj.wv))
}

/// `frames` is `T x P x D`; the result is `T x P x D_v`.
pub fn st_attn(frames: &Array3<f64>, proj: &Projections) -> Result<Array3<f64>, AlignError> {
    let (t_len, p, d) = frames.dim();
    if t_len == 0 || p == 0 {
        return Err(AlignError::ShapeMismatch(format!("frames {:?}", frames.dim())));
    }
    proj.check(d)?;
    let mut out = Array3::zeros((t_len, p, proj.wv.ncols()));
    for t in 0..t_len {
        let cur = frames.index_axis(Axis(0), t);
        let prev = frames.index_axis(Axis(0), t.saturating_sub(1));
        let kv_in = concatenate(Axis(0), &[prev, cur]).expect("frames share width");
        let y = attention(&cur.dot(&proj.wq), &kv_in.dot(&proj.wk), &kv_in.dot(&proj.wv))?;
        out.slice_mut(s![t, .., ..]).assign(&y);
    }
    Ok(out)
}
