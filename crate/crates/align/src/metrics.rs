//! Retrieval and classification metrics over similarity matrices.
//!
//! A target's rank counts the columns scoring strictly higher plus the
//! columns with an equal score and a lower index, so ties go to the lower
//! column and results do not depend on sort stability.

use ndarray::{Array2, ArrayView1};

use crate::AlignError;

fn rank_of(row: ArrayView1<f64>, target: usize) -> usize {
    let s = row[target];
    row.iter().enumerate().filter(|&(j, &x)| x > s || (x == s && j < target)).count()
}

fn hit_rate(sim: &Array2<f64>, targets: &[usize], k: usize) -> Result<f64, AlignError> {
    let (n, m) = sim.dim();
    if k == 0 || k > m {
        return Err(AlignError::BadK { k, m });
    }
    if targets.len() != n {
        return Err(AlignError::ShapeMismatch(format!("{} targets for {n} rows", targets.len())));
    }
    if n == 0 {
        return Err(AlignError::ShapeMismatch("empty similarity matrix".into()));
    }
    if let Some(&bad) = targets.iter().find(|&&c| c >= m) {
        return Err(AlignError::ShapeMismatch(format!("target column {bad} of {m}")));
    }
    if sim.iter().any(|x| !x.is_finite()) {
        return Err(AlignError::NonFinite);
    }
    let hits = sim.rows().into_iter().zip(targets).filter(|(row, &c)| rank_of(*row, c) < k).count();
    Ok(hits as f64 / n as f64)
}

/// Fraction of rows whose ground-truth column is among the top `k`.
pub fn recall_at_k(sim: &Array2<f64>, ground_truth: &[usize], k: usize) -> Result<f64, AlignError> {
    hit_rate(sim, ground_truth, k)
}

pub fn topk_accuracy(sim: &Array2<f64>, labels: &[usize], k: usize) -> Result<f64, AlignError> {
    hit_rate(sim, labels, k)
}

/// Mean of top-1 and top-5 accuracy; needs at least five classes.
pub fn avg_top1_top5(sim: &Array2<f64>, labels: &[usize]) -> Result<f64, AlignError> {
    Ok((topk_accuracy(sim, labels, 1)? + topk_accuracy(sim, labels, 5)?) / 2.0)
}
