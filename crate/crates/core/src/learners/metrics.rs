use crate::error::{Error, Result};

/// Area under the ROC curve in Mann-Whitney form: the share of
/// (positive, negative) pairs the scores order correctly, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(v) = scores.iter().find(|v| v.is_nan()) {
        return Err(Error::InvalidInput(format!("score {v} is not a number")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.iter().filter(|&&l| l == 0).count();
    if n_pos + n_neg != labels.len() {
        return Err(Error::InvalidInput("labels must be 0/1".into()));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (1-based, tie-averaged) ranks of the positives; every partial
    // value is a multiple of 1/2 and stays exact
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += avg_rank * pos as f64;
        i = j + 1;
    }
    let p = n_pos as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * n_neg as f64))
}

/// 1 iff score >= threshold.
pub fn classify(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}
