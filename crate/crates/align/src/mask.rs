use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::batch::TokenLayout;
use crate::AlignError;

/// Number of patch tokens kept at `mask_ratio`: `round((1 - ratio) * n)`.
pub fn keep_count(patch_tokens: usize, mask_ratio: f64) -> usize {
    ((1.0 - mask_ratio) * patch_tokens as f64).round() as usize
}

/// Sorted indices of kept tokens. With a class token it sits at index 0 and
/// is always kept; patch tokens are then `1..=frames*patches`.
pub fn generate_patch_mask(layout: TokenLayout, mask_ratio: f64, seed: u64) -> Result<Vec<usize>, AlignError> {
    if !(0.0..1.0).contains(&mask_ratio) {
        return Err(AlignError::RatioOutOfRange(mask_ratio));
    }
    let n = layout.patch_tokens();
    let keep = keep_count(n, mask_ratio);
    let offset = usize::from(layout.has_cls);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<usize> = rand::seq::index::sample(&mut rng, n, keep).into_iter().map(|i| i + offset).collect();
    if layout.has_cls {
        kept.push(0);
    }
    kept.sort_unstable();
    Ok(kept)
}
