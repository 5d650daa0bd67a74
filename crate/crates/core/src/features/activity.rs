//! Volume and speed of early activity, and how unevenly it is spread.

use std::collections::HashMap;

use super::{median, Family, FeatureVector};
use crate::ingest::{seconds_to_days, EarlyWindow, Event, SECONDS_PER_DAY};

pub(crate) const VOLUME_SPEED_FEATURES: &[(&str, Family)] = &[
    ("n_posters", Family::VolumeSpeed),
    ("n_commenters", Family::VolumeSpeed),
    ("creation_date", Family::VolumeSpeed),
    ("n_posts", Family::VolumeSpeed),
    ("median_replies_per_post", Family::VolumeSpeed),
    ("median_posts_per_user", Family::VolumeSpeed),
    ("median_comments_per_user", Family::VolumeSpeed),
    ("days_to_k", Family::VolumeSpeed),
    ("mean_gap_posts_days", Family::VolumeSpeed),
    ("mean_gap_comments_days", Family::VolumeSpeed),
];

pub(crate) const DISTRIBUTION_FEATURES: &[(&str, Family)] = &[
    ("gini_posts_per_user", Family::Distribution),
    ("gini_comments_per_user", Family::Distribution),
    ("gini_post_gaps", Family::Distribution),
    ("gini_comment_gaps", Family::Distribution),
];

/// Gini coefficient of a non-negative vector:
/// `sum_i sum_j |x_i - x_j| / (2 n sum_i x_i)`.
///
/// Evaluated in O(n log n) from the sorted values. Ranges over
/// `[0, (n - 1) / n]`. Returns `None` for an empty or all-zero input.
pub fn gini_checked(x: &[f64]) -> Option<f64> {
    debug_assert!(x.iter().all(|&v| v >= 0.0), "gini expects non-negative input");
    let n = x.len();
    let total: f64 = x.iter().sum();
    if n == 0 || total <= 0.0 {
        return None;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum_{i<j} (x_(j) - x_(i)) = sum_i (2i - n - 1) x_(i), i 1-based.
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (2.0 * (i as f64 + 1.0) - n as f64 - 1.0) * v)
        .sum();
    Some(weighted / (n as f64 * total))
}

/// [`gini_checked`] with the all-zero (or empty) case defined as 0.
pub fn gini(x: &[f64]) -> f64 {
    gini_checked(x).unwrap_or(0.0)
}

fn member_counts(window: &EarlyWindow) -> (Vec<f64>, Vec<f64>) {
    let mut posts: HashMap<&str, usize> = HashMap::new();
    let mut comments: HashMap<&str, usize> = HashMap::new();
    for e in &window.events {
        if e.has_sentinel_author() {
            continue;
        }
        let counter = if e.is_post() { &mut posts } else { &mut comments };
        *counter.entry(e.author.as_str()).or_default() += 1;
    }
    let per_member = |map: &HashMap<&str, usize>| -> Vec<f64> {
        window
            .members
            .iter()
            .map(|m| map.get(m.as_str()).copied().unwrap_or(0) as f64)
            .collect()
    };
    (per_member(&posts), per_member(&comments))
}

/// Gaps in days between consecutive events (events already time-ordered).
fn gaps_days<'a>(events: impl Iterator<Item = &'a Event>) -> Vec<f64> {
    let times: Vec<i64> = events.map(|e| e.created_at).collect();
    times
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 / SECONDS_PER_DAY as f64)
        .collect()
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn volume_speed_features(window: &EarlyWindow) -> FeatureVector {
    let mut fv = FeatureVector::new(window.community.clone(), window.k);
    let family = Family::VolumeSpeed;

    let distinct = |want_post: bool| {
        let mut authors: Vec<&str> = window
            .events
            .iter()
            .filter(|e| e.is_post() == want_post && !e.has_sentinel_author())
            .map(|e| e.author.as_str())
            .collect();
        authors.sort_unstable();
        authors.dedup();
        authors.len() as f64
    };
    fv.push("n_posters", family, distinct(true));
    fv.push("n_commenters", family, distinct(false));
    fv.push("creation_date", family, seconds_to_days(window.created_at));

    let n_posts = window.posts().count();
    fv.push("n_posts", family, n_posts as f64);

    let mut replies: HashMap<String, usize> = window.posts().map(|p| (p.fullname(), 0)).collect();
    for c in window.comments() {
        if let Some(count) = c.parent_id.as_ref().and_then(|p| replies.get_mut(p)) {
            *count += 1;
        }
    }
    let reply_counts: Vec<f64> = replies.values().map(|&c| c as f64).collect();
    fv.push_opt("median_replies_per_post", family, median(&reply_counts));

    let (posts_per_member, comments_per_member) = member_counts(window);
    fv.push_opt("median_posts_per_user", family, median(&posts_per_member));
    fv.push_opt("median_comments_per_user", family, median(&comments_per_member));
    fv.push("days_to_k", family, window.days_to_k);

    // Fewer than two events of a kind: fall back to the whole window length.
    let post_gaps = gaps_days(window.posts());
    let comment_gaps = gaps_days(window.comments());
    fv.push("mean_gap_posts_days", family, mean(&post_gaps).unwrap_or(window.days_to_k));
    fv.push(
        "mean_gap_comments_days",
        family,
        mean(&comment_gaps).unwrap_or(window.days_to_k),
    );
    fv
}

pub fn distribution_features(window: &EarlyWindow) -> FeatureVector {
    let mut fv = FeatureVector::new(window.community.clone(), window.k);
    let family = Family::Distribution;
    let (posts_per_member, comments_per_member) = member_counts(window);
    fv.push_opt("gini_posts_per_user", family, gini_checked(&posts_per_member));
    fv.push_opt("gini_comments_per_user", family, gini_checked(&comments_per_member));
    fv.push_opt("gini_post_gaps", family, gini_checked(&gaps_days(window.posts())));
    fv.push_opt("gini_comment_gaps", family, gini_checked(&gaps_days(window.comments())));
    fv
}
