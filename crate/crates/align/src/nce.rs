//! Symmetric InfoNCE over cosine similarities and its analytic gradient.
//!
//! With `S[i][j] = cos(v_i, t_j)` and `L = S / tau`, the video-to-text term
//! is the mean cross-entropy of each row of `L` against the diagonal, the
//! text-to-video term the same over columns, and the loss is their average.
//!
//! Writing `P` for the row softmax and `Q` for the column softmax of `L`,
//! `dloss/dL = (P + Q - 2I) / 2N`. The rest is the chain rule through the
//! division by `tau` and the row normalizations.

use ndarray::{Array1, Array2, Axis};

use crate::batch::{EmbeddingBatch, TemperatureParam};
use crate::AlignError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoNce {
    pub loss: f64,
    pub loss_v2t: f64,
    pub loss_t2v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceGrad {
    pub dv: Array2<f64>,
    pub dt: Array2<f64>,
    pub dlog_tau: f64,
}

fn check_pair(v: &EmbeddingBatch, t: &EmbeddingBatch) -> Result<(), AlignError> {
    if v.rows() != t.rows() || v.dim() != t.dim() {
        return Err(AlignError::ShapeMismatch(format!(
            "video {}x{} vs text {}x{}",
            v.rows(),
            v.dim(),
            t.rows(),
            t.dim()
        )));
    }
    Ok(())
}

/// Unit rows and the original norms.
pub(crate) fn normalize_rows(x: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>), AlignError> {
    let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(AlignError::ZeroRow(i));
    }
    let unit = x / &norms.view().insert_axis(Axis(1));
    Ok((unit, norms))
}

fn log_sum_exp<'a>(xs: impl Iterator<Item = &'a f64> + Clone) -> f64 {
    let m = xs.clone().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct Forward {
    u: Array2<f64>,
    w: Array2<f64>,
    v_norms: Array1<f64>,
    t_norms: Array1<f64>,
    logits: Array2<f64>,
    row_lse: Vec<f64>,
    col_lse: Vec<f64>,
}

fn forward(v: &EmbeddingBatch, t: &EmbeddingBatch, tau: TemperatureParam) -> Result<Forward, AlignError> {
    check_pair(v, t)?;
    let (u, v_norms) = normalize_rows(v.data())?;
    let (w, t_norms) = normalize_rows(t.data())?;
    let logits = u.dot(&w.t()) / tau.tau();
    let row_lse = logits.rows().into_iter().map(|r| log_sum_exp(r.iter())).collect();
    let col_lse = logits.columns().into_iter().map(|c| log_sum_exp(c.iter())).collect();
    Ok(Forward { u, w, v_norms, t_norms, logits, row_lse, col_lse })
}

pub fn info_nce(v: &EmbeddingBatch, t: &EmbeddingBatch, tau: TemperatureParam) -> Result<InfoNce, AlignError> {
    let f = forward(v, t, tau)?;
    Ok(losses(&f))
}

fn losses(f: &Forward) -> InfoNce {
    let n = f.logits.nrows() as f64;
    let diag = f.logits.diag();
    let loss_v2t = diag.iter().zip(&f.row_lse).map(|(d, l)| l - d).sum::<f64>() / n;
    let loss_t2v = diag.iter().zip(&f.col_lse).map(|(d, l)| l - d).sum::<f64>() / n;
    InfoNce { loss: (loss_v2t + loss_t2v) / 2.0, loss_v2t, loss_t2v }
}

/// Gradients of the symmetric loss with respect to the raw (unnormalized)
/// embeddings and `log_tau`.
pub fn info_nce_grad(v: &EmbeddingBatch, t: &EmbeddingBatch, tau: TemperatureParam) -> Result<InfoNceGrad, AlignError> {
    Ok(loss_and_grad(v, t, tau)?.1)
}

pub(crate) fn loss_and_grad(
    v: &EmbeddingBatch,
    t: &EmbeddingBatch,
    tau: TemperatureParam,
) -> Result<(InfoNce, InfoNceGrad), AlignError> {
    let f = forward(v, t, tau)?;
    let n = f.logits.nrows();
    let scale = 1.0 / (2.0 * n as f64);
    let mut g = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let l = f.logits[[i, j]];
            let p = (l - f.row_lse[i]).exp();
            let q = (l - f.col_lse[j]).exp();
            let eye = if i == j { 2.0 } else { 0.0 };
            g[[i, j]] = (p + q - eye) * scale;
        }
    }
    let dlog_tau = -(&g * &f.logits).sum();
    let ds = g / tau.tau();
    let du = ds.dot(&f.w);
    let dw = ds.t().dot(&f.u);
    let dv = unnormalize_grad(&f.u, &f.v_norms, &du);
    let dt = unnormalize_grad(&f.w, &f.t_norms, &dw);
    Ok((losses(&f), InfoNceGrad { dv, dt, dlog_tau }))
}

/// Pulls a gradient on unit rows `u = x / |x|` back to `x`:
/// `(du - (u . du) u) / |x|`.
fn unnormalize_grad(unit: &Array2<f64>, norms: &Array1<f64>, du: &Array2<f64>) -> Array2<f64> {
    let radial = (unit * du).sum_axis(Axis(1)).insert_axis(Axis(1));
    (du - &(unit * &radial)) / norms.view().insert_axis(Axis(1))
}
