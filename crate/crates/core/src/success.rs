//! The six success measures and their per-k median labels.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::{monthly_partition, CommunityTimeline, MonthlyActivity};

/// Number of months of data each measure needs after `t_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizons {
    pub growth_months: usize,
    pub retention_months: usize,
    pub survival_months: usize,
    /// Trailing months of the survival horizon counted as "late" activity.
    pub survival_tail_months: usize,
}

impl Default for Horizons {
    fn default() -> Self {
        Horizons {
            growth_months: 12,
            retention_months: 12,
            survival_months: 24,
            survival_tail_months: 3,
        }
    }
}

impl Horizons {
    /// Months the partition must cover: retention looks one month past its horizon.
    pub fn months_needed(&self) -> usize {
        self.growth_months
            .max(self.retention_months + 1)
            .max(self.survival_months)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    GrowthCommenters,
    GrowthPosters,
    Retention,
    Survival,
    AvgPosts,
    AvgComments,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::GrowthCommenters,
        Measure::GrowthPosters,
        Measure::Retention,
        Measure::Survival,
        Measure::AvgPosts,
        Measure::AvgComments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::GrowthCommenters => "growth_commenters",
            Measure::GrowthPosters => "growth_posters",
            Measure::Retention => "retention",
            Measure::Survival => "survival",
            Measure::AvgPosts => "avg_posts",
            Measure::AvgComments => "avg_comments",
        }
    }

    pub fn from_name(name: &str) -> Option<Measure> {
        Measure::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserRole {
    Commenters,
    Posters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityKind {
    Posts,
    Comments,
}

/// Size of the union of commenter (or poster) sets over the given months.
pub fn growth(monthly: &[MonthlyActivity], which: UserRole) -> usize {
    let mut users: BTreeSet<&str> = BTreeSet::new();
    for m in monthly {
        let set = match which {
            UserRole::Commenters => &m.commenters,
            UserRole::Posters => &m.posters,
        };
        users.extend(set.iter().map(String::as_str));
    }
    users.len()
}

/// Mean month-over-month retention over `monthly.len() - 1` months.
///
/// Month `i` contributes `|U_i ∩ U_{i+1}| / |U_i|`; months with no active
/// users contribute 0.
pub fn retention(monthly: &[MonthlyActivity]) -> f64 {
    assert!(monthly.len() >= 2, "retention needs at least two months");
    let months = monthly.len() - 1;
    let total: f64 = monthly
        .windows(2)
        .map(|pair| {
            let (cur, next) = (&pair[0].active_users, &pair[1].active_users);
            if cur.is_empty() {
                0.0
            } else {
                cur.intersection(next).count() as f64 / cur.len() as f64
            }
        })
        .sum();
    total / months as f64
}

/// Fraction of all activity that falls in the last `tail_months` months.
/// `None` when there is no activity at all.
pub fn survival(monthly: &[MonthlyActivity], tail_months: usize) -> Option<f64> {
    let total: usize = monthly.iter().map(MonthlyActivity::total_count).sum();
    if total == 0 {
        return None;
    }
    let tail_start = monthly.len().saturating_sub(tail_months);
    let tail: usize = monthly[tail_start..].iter().map(MonthlyActivity::total_count).sum();
    Some(tail as f64 / total as f64)
}

pub fn activity_average(monthly: &[MonthlyActivity], which: ActivityKind) -> f64 {
    assert!(!monthly.is_empty(), "activity average needs at least one month");
    let sum: usize = monthly
        .iter()
        .map(|m| match which {
            ActivityKind::Posts => m.posts_count,
            ActivityKind::Comments => m.comments_count,
        })
        .sum();
    sum as f64 / monthly.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessMeasures {
    pub growth_commenters: usize,
    pub growth_posters: usize,
    pub retention: f64,
    pub survival: f64,
    pub avg_posts: f64,
    pub avg_comments: f64,
    /// Set when the survival horizon held no activity and `survival` is the 0 sentinel.
    pub survival_undefined: bool,
}

impl SuccessMeasures {
    pub fn get(&self, measure: Measure) -> f64 {
        match measure {
            Measure::GrowthCommenters => self.growth_commenters as f64,
            Measure::GrowthPosters => self.growth_posters as f64,
            Measure::Retention => self.retention,
            Measure::Survival => self.survival,
            Measure::AvgPosts => self.avg_posts,
            Measure::AvgComments => self.avg_comments,
        }
    }
}

/// Computes all six measures from a partition that covers `horizons.months_needed()` months.
pub fn measures_from_months(monthly: &[MonthlyActivity], horizons: &Horizons) -> SuccessMeasures {
    assert!(
        monthly.len() >= horizons.months_needed(),
        "partition covers {} months, {} needed",
        monthly.len(),
        horizons.months_needed()
    );
    let year = &monthly[..horizons.growth_months];
    let survival_value = survival(&monthly[..horizons.survival_months], horizons.survival_tail_months);
    SuccessMeasures {
        growth_commenters: growth(year, UserRole::Commenters),
        growth_posters: growth(year, UserRole::Posters),
        retention: retention(&monthly[..horizons.retention_months + 1]),
        survival: survival_value.unwrap_or(0.0),
        avg_posts: activity_average(year, ActivityKind::Posts),
        avg_comments: activity_average(year, ActivityKind::Comments),
        survival_undefined: survival_value.is_none(),
    }
}

pub fn compute_measures(timeline: &CommunityTimeline, t_k: i64, horizons: &Horizons) -> SuccessMeasures {
    let monthly = monthly_partition(timeline, t_k, horizons.months_needed());
    measures_from_months(&monthly, horizons)
}

/// Sample median (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Median-split labels for one measure at one k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binarized {
    pub threshold: f64,
    pub labels: Vec<bool>,
    pub positives: usize,
    /// The positive class is not half the sample because of ties at the median.
    pub imbalanced: bool,
}

/// Labels each value 1 iff it strictly exceeds the sample median.
pub fn binarize(values: &[f64]) -> Binarized {
    assert!(values.len() >= 2, "binarization needs at least two communities");
    let threshold = median(values).expect("non-empty");
    let labels: Vec<bool> = values.iter().map(|&v| v > threshold).collect();
    let positives = labels.iter().filter(|&&l| l).count();
    let imbalanced = positives != values.len() / 2;
    if imbalanced {
        log::debug!(
            "median split puts {positives} of {} communities in the positive class",
            values.len()
        );
    }
    Binarized {
        threshold,
        labels,
        positives,
        imbalanced,
    }
}

/// Labels for every measure over the same ordered set of communities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub k: usize,
    pub communities: Vec<String>,
    pub measures: Vec<SuccessMeasures>,
    pub thresholds: Vec<(Measure, f64)>,
    pub labels: Vec<(Measure, Vec<bool>)>,
    pub imbalanced: Vec<Measure>,
}

impl LabelSet {
    pub fn build(k: usize, communities: Vec<String>, measures: Vec<SuccessMeasures>) -> Self {
        assert_eq!(communities.len(), measures.len());
        let mut thresholds = Vec::new();
        let mut labels = Vec::new();
        let mut imbalanced = Vec::new();
        for measure in Measure::ALL {
            let values: Vec<f64> = measures.iter().map(|m| m.get(measure)).collect();
            let split = binarize(&values);
            thresholds.push((measure, split.threshold));
            if split.imbalanced {
                imbalanced.push(measure);
            }
            labels.push((measure, split.labels));
        }
        LabelSet {
            k,
            communities,
            measures,
            thresholds,
            labels,
            imbalanced,
        }
    }

    pub fn labels_for(&self, measure: Measure) -> &[bool] {
        &self
            .labels
            .iter()
            .find(|(m, _)| *m == measure)
            .expect("every measure is labelled")
            .1
    }

    pub fn threshold_for(&self, measure: Measure) -> f64 {
        self.thresholds
            .iter()
            .find(|(m, _)| *m == measure)
            .expect("every measure has a threshold")
            .1
    }
}
