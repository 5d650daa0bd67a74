//! Early-behaviour features, grouped in six families.
//!
//! Each family module produces a partial [`FeatureVector`]; [`extract_features`]
//! concatenates them in a fixed order so every community at the same `k`
//! carries the same columns.
//!
//! Values that are undefined for a given window (a Gini over fewer than two
//! gaps, a median over no posts, ...) are stored as 0 and flagged. The model
//! replaces flagged entries with the training-set median before fitting.

pub mod activity;
pub mod graph;
pub mod parents;
pub mod text;
pub mod users;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::{Corpus, EarlyWindow, UserHistoryIndex};
use text::CategoryLexicon;

pub use activity::{distribution_features, gini, gini_checked, volume_speed_features};
pub use graph::{build_reply_graph, graph_features, ReplyGraph, SimpleGraph};
pub use parents::{
    build_genealogy, cross_entropy, cross_entropy_counts, find_parents, parent_features, GenealogyGraph, ParentCache,
    TokenCounts, TokenIndex,
};
pub use text::{linguistic_features, tokenize};
pub use users::user_composition_features;

/// Bumped whenever a feature is added, removed or renamed.
pub const MANIFEST_VERSION: u32 = 1;

/// Length of the look-back window for prior activity and parent communities.
pub const PRIOR_DAYS: i64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    VolumeSpeed,
    Distribution,
    UserComposition,
    Linguistic,
    Social,
    Parents,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::VolumeSpeed,
        Family::Distribution,
        Family::UserComposition,
        Family::Linguistic,
        Family::Social,
        Family::Parents,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::VolumeSpeed => "volume_speed",
            Family::Distribution => "distribution",
            Family::UserComposition => "user_composition",
            Family::Linguistic => "linguistic",
            Family::Social => "social",
            Family::Parents => "parents",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub family: Family,
    pub value: f64,
    /// Value is undefined for this window and was stored as 0.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub community: String,
    pub k: usize,
    pub features: Vec<Feature>,
}

impl FeatureVector {
    pub fn new(community: impl Into<String>, k: usize) -> Self {
        FeatureVector {
            community: community.into(),
            k,
            features: Vec::new(),
        }
    }

    /// Adds a value; non-finite values are stored as flagged zeros.
    pub fn push(&mut self, name: impl Into<String>, family: Family, value: f64) {
        if value.is_finite() {
            self.features.push(Feature {
                name: name.into(),
                family,
                value,
                flagged: false,
            });
        } else {
            self.push_flagged(name, family);
        }
    }

    pub fn push_flagged(&mut self, name: impl Into<String>, family: Family) {
        self.features.push(Feature {
            name: name.into(),
            family,
            value: 0.0,
            flagged: true,
        });
    }

    pub fn push_opt(&mut self, name: impl Into<String>, family: Family, value: Option<f64>) {
        match value {
            Some(v) => self.push(name, family, v),
            None => self.push_flagged(name, family),
        }
    }

    pub fn extend(&mut self, other: FeatureVector) {
        self.features.extend(other.features);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.feature(name).map(|f| f.value)
    }

    pub fn feature(&self, name: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn is_flagged(&self, name: &str) -> bool {
        self.feature(name).is_some_and(|f| f.flagged)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn manifest_entries(&self) -> Vec<ManifestEntry> {
        self.features
            .iter()
            .map(|f| ManifestEntry {
                name: f.name.clone(),
                family: f.family,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub family: Family,
}

/// Versioned registry of feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub version: u32,
    pub features: Vec<ManifestEntry>,
    /// Names kept free for externally computed values (personality traits).
    pub reserved: Vec<ManifestEntry>,
}

pub const RESERVED_FEATURES: [&str; 5] = [
    "big5_openness",
    "big5_conscientiousness",
    "big5_extraversion",
    "big5_agreeableness",
    "big5_neuroticism",
];

impl FeatureManifest {
    pub fn new(features: Vec<ManifestEntry>) -> Self {
        FeatureManifest {
            version: MANIFEST_VERSION,
            features,
            reserved: RESERVED_FEATURES
                .iter()
                .map(|n| ManifestEntry {
                    name: n.to_string(),
                    family: Family::Linguistic,
                })
                .collect(),
        }
    }

    /// Manifest for a lexicon, computed from an empty window so it never
    /// depends on the data.
    pub fn for_lexicon(lexicon: Option<&CategoryLexicon>) -> Self {
        let mut entries = Vec::new();
        for (name, family) in activity::VOLUME_SPEED_FEATURES {
            entries.push((name.to_string(), *family));
        }
        for (name, family) in activity::DISTRIBUTION_FEATURES {
            entries.push((name.to_string(), *family));
        }
        for name in users::USER_FEATURES {
            entries.push((name.to_string(), Family::UserComposition));
        }
        for name in text::linguistic_feature_names(lexicon) {
            entries.push((name, Family::Linguistic));
        }
        for name in graph::SOCIAL_FEATURES {
            entries.push((name.to_string(), Family::Social));
        }
        for name in parents::PARENT_FEATURES {
            entries.push((name.to_string(), Family::Parents));
        }
        FeatureManifest::new(
            entries
                .into_iter()
                .map(|(name, family)| ManifestEntry { name, family })
                .collect(),
        )
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|e| e.name.as_str()).collect()
    }
}

fn non_parent_families(window: &EarlyWindow, history: &UserHistoryIndex, lexicon: Option<&CategoryLexicon>) -> FeatureVector {
    let mut fv = FeatureVector::new(window.community.clone(), window.k);
    fv.extend(volume_speed_features(window));
    fv.extend(distribution_features(window));
    fv.extend(user_composition_features(window, history));
    fv.extend(linguistic_features(window, lexicon));
    let reply = build_reply_graph(window);
    fv.extend(graph_features(&reply, window));
    fv
}

/// Computes all six families for one early window.
///
/// Convenient for a single window; use [`FeatureContext`] when extracting many.
pub fn extract_features(
    window: &EarlyWindow,
    history: &UserHistoryIndex,
    corpus: &Corpus,
    lexicon: Option<&CategoryLexicon>,
) -> FeatureVector {
    let mut fv = non_parent_families(window, history, lexicon);
    fv.extend(parents::parent_family(window, history, corpus));
    fv
}

/// Shared read-only inputs for extracting features of many windows.
pub struct FeatureContext<'a> {
    pub history: &'a UserHistoryIndex,
    pub corpus: &'a Corpus,
    pub lexicon: Option<&'a CategoryLexicon>,
    pub tokens: TokenIndex,
}

impl<'a> FeatureContext<'a> {
    /// Tokenises the whole corpus once.
    pub fn new(history: &'a UserHistoryIndex, corpus: &'a Corpus, lexicon: Option<&'a CategoryLexicon>) -> Self {
        FeatureContext {
            history,
            corpus,
            lexicon,
            tokens: TokenIndex::build(corpus),
        }
    }

    /// Same result as [`extract_features`]. `cache` may be shared by windows
    /// of one community (any k) but not across communities.
    pub fn extract(&self, window: &EarlyWindow, cache: &mut ParentCache) -> FeatureVector {
        let mut fv = non_parent_families(window, self.history, self.lexicon);
        fv.extend(parents::parent_family_indexed(
            window,
            self.history,
            self.corpus,
            &self.tokens,
            cache,
        ));
        fv
    }
}

/// Median of `values`, `None` when empty.
pub(crate) fn median(values: &[f64]) -> Option<f64> {
    crate::success::median(values)
}

/// Population standard deviation, `None` when empty.
pub(crate) fn population_std(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}
