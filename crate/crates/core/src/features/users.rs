//! Who the early members were before they joined.

use super::{median, population_std, Family, FeatureVector, PRIOR_DAYS};
use crate::ingest::{seconds_to_days, EarlyWindow, EventKind, UserHistoryIndex, SECONDS_PER_DAY};

pub(crate) const USER_FEATURES: [&str; 8] = [
    "median_prior_post_score",
    "std_prior_post_score",
    "median_prior_comment_score",
    "std_prior_comment_score",
    "median_prior_activity_count",
    "std_prior_activity_count",
    "median_days_on_site",
    "fraction_new_users",
];

/// What one member did in the month before joining, outside the focal community.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberBackground {
    pub member: String,
    pub join_time: i64,
    /// Total score of prior posts; `None` without prior posts.
    pub post_score: Option<f64>,
    pub comment_score: Option<f64>,
    pub activity_count: usize,
    /// Days between the member's first event anywhere and joining.
    pub days_on_site: f64,
}

pub fn member_backgrounds(window: &EarlyWindow, history: &UserHistoryIndex) -> Vec<MemberBackground> {
    let joins = window.join_times();
    window
        .members
        .iter()
        .map(|member| {
            let join_time = joins[member.as_str()];
            let prior = history.activities(member, join_time - PRIOR_DAYS * SECONDS_PER_DAY, join_time);
            let mut post_score = None;
            let mut comment_score = None;
            let mut activity_count = 0;
            for a in prior.iter().filter(|a| a.community != window.community) {
                activity_count += 1;
                let slot = match a.kind {
                    EventKind::Post => &mut post_score,
                    EventKind::Comment => &mut comment_score,
                };
                *slot = Some(slot.unwrap_or(0.0) + a.score as f64);
            }
            let first_seen = history.first_seen(member).unwrap_or(join_time).min(join_time);
            MemberBackground {
                member: member.clone(),
                join_time,
                post_score,
                comment_score,
                activity_count,
                days_on_site: seconds_to_days(join_time - first_seen),
            }
        })
        .collect()
}

pub fn user_composition_features(window: &EarlyWindow, history: &UserHistoryIndex) -> FeatureVector {
    let backgrounds = member_backgrounds(window, history);
    let mut fv = FeatureVector::new(window.community.clone(), window.k);
    let family = Family::UserComposition;

    let post_scores: Vec<f64> = backgrounds.iter().filter_map(|b| b.post_score).collect();
    let comment_scores: Vec<f64> = backgrounds.iter().filter_map(|b| b.comment_score).collect();
    let counts: Vec<f64> = backgrounds.iter().map(|b| b.activity_count as f64).collect();
    let days: Vec<f64> = backgrounds.iter().map(|b| b.days_on_site).collect();

    fv.push_opt("median_prior_post_score", family, median(&post_scores));
    fv.push_opt("std_prior_post_score", family, population_std(&post_scores));
    fv.push_opt("median_prior_comment_score", family, median(&comment_scores));
    fv.push_opt("std_prior_comment_score", family, population_std(&comment_scores));
    fv.push_opt("median_prior_activity_count", family, median(&counts));
    fv.push_opt("std_prior_activity_count", family, population_std(&counts));
    fv.push_opt("median_days_on_site", family, median(&days));
    let new_users = backgrounds.iter().filter(|b| b.activity_count == 0).count();
    fv.push(
        "fraction_new_users",
        family,
        new_users as f64 / backgrounds.len().max(1) as f64,
    );
    fv
}
