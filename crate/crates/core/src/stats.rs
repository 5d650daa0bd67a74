//! Rank correlation between success measures and reciprocal-rank feature
//! importance across the k sweep.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::success::{Measure, SuccessMeasures};

/// Ranks starting at 1; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "correlation needs paired samples");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert!(x.len() == y.len() && x.len() >= 2, "spearman needs at least two paired samples");
    pearson(&average_ranks(x), &average_ranks(y))
}

fn tie_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for i in 1..=sorted.len() {
        if i < sorted.len() && sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b with tie correction, O(n log n).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    assert!(x.len() == y.len() && x.len() >= 2, "kendall needs at least two paired samples");
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = n * (n - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tie_pairs(&xs);
    let n3 = tie_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buffer = Vec::with_capacity(ys.len());
    let swaps = count_inversions(&mut ys, &mut buffer);
    let n2 = tie_pairs(&ys);

    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return None;
    }
    let numer = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Some((numer as f64 / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Spearman,
    Kendall,
}

impl CorrelationMethod {
    pub const ALL: [CorrelationMethod; 2] = [CorrelationMethod::Spearman, CorrelationMethod::Kendall];

    pub fn name(self) -> &'static str {
        match self {
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::Kendall => "kendall",
        }
    }

    pub fn apply(self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            CorrelationMethod::Spearman => spearman(x, y),
            CorrelationMethod::Kendall => kendall_tau(x, y),
        }
    }
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symmetric matrix of pairwise coefficients between the six measures.
///
/// Undefined coefficients (a constant measure column) are `None` and listed in
/// `degenerate`; they are never replaced by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub k: usize,
    pub method: CorrelationMethod,
    pub measures: Vec<Measure>,
    pub values: Vec<Vec<Option<f64>>>,
    pub degenerate: Vec<(Measure, Measure)>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: Measure, b: Measure) -> Option<f64> {
        let i = self.measures.iter().position(|&m| m == a)?;
        let j = self.measures.iter().position(|&m| m == b)?;
        self.values[i][j]
    }

    /// Upper-triangle pairs in measure order.
    pub fn pairs(&self) -> Vec<(Measure, Measure, Option<f64>)> {
        let mut out = Vec::new();
        for i in 0..self.measures.len() {
            for j in i + 1..self.measures.len() {
                out.push((self.measures[i], self.measures[j], self.values[i][j]));
            }
        }
        out
    }
}

pub fn correlation_matrix(k: usize, measures: &[SuccessMeasures], method: CorrelationMethod) -> Result<CorrelationMatrix> {
    if measures.len() < 2 {
        return Err(Error::Degenerate(format!(
            "correlations at k={k} need at least two communities, got {}",
            measures.len()
        )));
    }
    let columns: Vec<Vec<f64>> = Measure::ALL
        .iter()
        .map(|&m| measures.iter().map(|s| s.get(m)).collect())
        .collect();
    columns_correlation(k, &Measure::ALL, &columns, method)
}

/// Correlation matrix over arbitrary named columns of equal length.
pub fn columns_correlation(
    k: usize,
    names: &[Measure],
    columns: &[Vec<f64>],
    method: CorrelationMethod,
) -> Result<CorrelationMatrix> {
    let d = names.len();
    let mut values = vec![vec![None; d]; d];
    let mut degenerate = Vec::new();
    for i in 0..d {
        for j in i..d {
            let coef = if i == j {
                method.apply(&columns[i], &columns[i]).map(|_| 1.0)
            } else {
                method.apply(&columns[i], &columns[j])
            };
            if coef.is_none() {
                if i != j {
                    log::warn!("{method} correlation of {} and {} is undefined at k={k}", names[i], names[j]);
                }
                degenerate.push((names[i], names[j]));
            }
            values[i][j] = coef;
            values[j][i] = coef;
        }
    }
    Ok(CorrelationMatrix {
        k,
        method,
        measures: names.to_vec(),
        values,
        degenerate,
    })
}

/// Average of each pair's defined coefficients over several matrices.
pub fn average_matrices(matrices: &[CorrelationMatrix]) -> Vec<(Measure, Measure, Option<f64>, usize)> {
    let mut acc: BTreeMap<(Measure, Measure), (f64, usize)> = BTreeMap::new();
    let mut order = Vec::new();
    for m in matrices {
        for (a, b, v) in m.pairs() {
            let entry = acc.entry((a, b)).or_insert_with(|| {
                order.push((a, b));
                (0.0, 0)
            });
            if let Some(v) = v {
                entry.0 += v;
                entry.1 += 1;
            }
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (sum, n) = acc[&key];
            (key.0, key.1, (n > 0).then(|| sum / n as f64), n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub mrr: f64,
    pub mean_coefficient: f64,
}

/// Orders features by descending |coefficient| (ties by name); rank 1 is the largest.
pub fn rank_by_magnitude(coefficients: &BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = coefficients.iter().map(|(k, &v)| (k.clone(), v)).collect();
    ranked.sort_by(|a, b| {
        b.1.abs()
            .partial_cmp(&a.1.abs())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked
}

/// Mean reciprocal rank of every feature across the per-k coefficient maps.
///
/// Output is sorted by descending MRR, ties alphabetically.
pub fn mrr_ranking(per_k: &[BTreeMap<String, f64>]) -> Result<Vec<RankedFeature>> {
    let Some(first) = per_k.first() else {
        return Ok(Vec::new());
    };
    for (i, coefs) in per_k.iter().enumerate() {
        if !coefs.keys().eq(first.keys()) {
            return Err(Error::Config(format!(
                "ranking {i} covers a different feature set than ranking 0"
            )));
        }
    }
    let mut reciprocal: BTreeMap<&str, f64> = BTreeMap::new();
    let mut coefficient: BTreeMap<&str, f64> = BTreeMap::new();
    for coefs in per_k {
        for (rank, (name, value)) in rank_by_magnitude(coefs).into_iter().enumerate() {
            let key = first.get_key_value(&name).expect("same feature set").0.as_str();
            *reciprocal.entry(key).or_default() += 1.0 / (rank + 1) as f64;
            *coefficient.entry(key).or_default() += value;
        }
    }
    let count = per_k.len() as f64;
    let mut out: Vec<RankedFeature> = reciprocal
        .into_iter()
        .map(|(name, rr)| RankedFeature {
            feature: name.to_string(),
            mrr: rr / count,
            mean_coefficient: coefficient[name] / count,
        })
        .collect();
    out.sort_by(|a, b| {
        b.mrr
            .partial_cmp(&a.mrr)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(out)
}
