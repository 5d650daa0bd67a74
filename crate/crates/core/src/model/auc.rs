use crate::error::{Error, Result};

/// Area under the ROC curve in Mann-Whitney form: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties
/// counting one half.
///
/// Sort-based, O(n log n). Pair counts are accumulated in integers (doubled
/// to hold the halves), so the result is the same rational as the pairwise
/// count.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Degenerate("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut doubled_wins: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let (mut pos, mut neg) = (0u64, 0u64);
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            if labels[order[end]] {
                pos += 1;
            } else {
                neg += 1;
            }
            end += 1;
        }
        doubled_wins += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        start = end;
    }
    Ok(doubled_wins as f64 / (2 * positives * negatives) as f64)
}
