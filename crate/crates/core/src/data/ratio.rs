use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::random::Sampler;

/// Mask of the `k` rows with the largest score. Ties are ordered by a
/// seeded permutation.
pub(crate) fn top_ranked(score: &[f64], k: usize, seed: u64) -> Vec<bool> {
    let tie = Sampler::new(seed).permutation(score.len());
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&i, &j| score[j].total_cmp(&score[i]).then(tie[i].cmp(&tie[j])));
    let mut mask = vec![false; score.len()];
    for &i in order.iter().take(k) {
        mask[i] = true;
    }
    mask
}

/// Re-partitions the training split so that `⌊r·n⌋` rows are unselected,
/// taking them from the bottom of the split-rule ranking.
///
/// Needs the split's selection score and the target of every row that ends
/// up selected.
pub fn ratio_split(train: &Dataset, r: f64, seed: u64) -> Result<Dataset> {
    let infeasible = |reason: &str| Error::InfeasibleRatio {
        ratio: r,
        reason: reason.to_string(),
    };
    if !(r > 0.0 && r < 0.9) {
        return Err(infeasible("ratio must lie in (0, 0.9)"));
    }
    let score = train
        .selection_score
        .as_ref()
        .ok_or_else(|| infeasible("dataset carries no selection score"))?;
    let n = train.n();
    let n_u = (r * n as f64 + 1e-9).floor() as usize;
    if n_u == 0 {
        return Err(infeasible("no row would be unselected"));
    }
    let mask = top_ranked(score, n - n_u, seed);
    let y = train
        .y
        .remask(mask.clone())
        .ok_or_else(|| infeasible("a newly selected row has no known target"))?;
    let mut out = train.clone();
    out.s = DVector::from_iterator(n, mask.iter().map(|&s| f64::from(u8::from(s))));
    out.y = y;
    Ok(out)
}
