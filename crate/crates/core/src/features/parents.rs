//! Parent communities: where early members were active in the month before
//! the focal community appeared.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::activity::gini_checked;
use super::graph::SimpleGraph;
use super::text::tokenize;
use super::{median, population_std, Family, FeatureVector, PRIOR_DAYS};
use crate::ingest::{Corpus, EarlyWindow, UserHistoryIndex, SECONDS_PER_DAY};

pub(crate) const PARENT_FEATURES: [&str; 10] = [
    "has_parents",
    "n_parents",
    "genealogy_density",
    "genealogy_transitivity",
    "max_log_parent_size",
    "min_log_parent_size",
    "std_log_parent_size",
    "gini_parent_member_counts",
    "median_lang_distance",
    "max_lang_distance",
];

/// Parent community id to the early members who were active there.
pub type ParentMap = BTreeMap<String, BTreeSet<String>>;

fn prior_span(window: &EarlyWindow) -> (i64, i64) {
    (window.created_at - PRIOR_DAYS * SECONDS_PER_DAY, window.created_at)
}

pub fn find_parents(window: &EarlyWindow, history: &UserHistoryIndex) -> ParentMap {
    let (from, to) = prior_span(window);
    let mut parents = ParentMap::new();
    for member in &window.members {
        for activity in history.activities(member, from, to) {
            if activity.community != window.community {
                parents
                    .entry(activity.community.clone())
                    .or_default()
                    .insert(member.clone());
            }
        }
    }
    parents
}

/// Parents linked when they share at least two early members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenealogyGraph {
    pub parents: Vec<String>,
    pub member_counts: Vec<usize>,
    pub graph: SimpleGraph,
}

pub fn build_genealogy(parents: &ParentMap) -> GenealogyGraph {
    let names: Vec<String> = parents.keys().cloned().collect();
    let sets: Vec<&BTreeSet<String>> = parents.values().collect();
    let mut graph = SimpleGraph::new(names.len());
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if sets[i].intersection(sets[j]).nth(1).is_some() {
                graph.add_edge(i, j);
            }
        }
    }
    GenealogyGraph {
        parents: names,
        member_counts: sets.iter().map(|s| s.len()).collect(),
        graph,
    }
}

/// Unigram counts of a token stream, keyed by token text or by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenCounts<K = String> {
    counts: BTreeMap<K, usize>,
    total: usize,
}

impl<K> Default for TokenCounts<K> {
    fn default() -> Self {
        TokenCounts {
            counts: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<K: Ord> TokenCounts<K> {
    pub fn add<Q>(&mut self, token: &Q)
    where
        Q: ?Sized + Ord + ToOwned<Owned = K>,
        K: Borrow<Q>,
    {
        match self.counts.get_mut(token) {
            Some(c) => *c += 1,
            None => {
                self.counts.insert(token.to_owned(), 1);
            }
        }
        self.total += 1;
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn get<Q>(&self, token: &Q) -> usize
    where
        Q: ?Sized + Ord,
        K: Borrow<Q>,
    {
        self.counts.get(token).copied().unwrap_or(0)
    }
}

impl TokenCounts<String> {
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut counts = TokenCounts::default();
        for t in tokens {
            counts.add(t.as_ref());
        }
        counts
    }
}

impl TokenCounts<u32> {
    pub fn from_ids(ids: &[u32]) -> Self {
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        let mut runs: Vec<(u32, usize)> = Vec::new();
        for id in sorted {
            match runs.last_mut() {
                Some((last, n)) if *last == id => *n += 1,
                _ => runs.push((id, 1)),
            }
        }
        TokenCounts {
            counts: runs.into_iter().collect(),
            total: ids.len(),
        }
    }
}

/// Cross-entropy in nats of the empirical unigram distribution of `p_tokens`
/// against the add-one smoothed unigram model of `q_tokens`, both over the
/// union vocabulary. `None` for empty `p_tokens`.
pub fn cross_entropy<S: AsRef<str>>(p_tokens: &[S], q_tokens: &[S]) -> Option<f64> {
    cross_entropy_counts(&TokenCounts::from_tokens(p_tokens), &TokenCounts::from_tokens(q_tokens))
}

/// [`cross_entropy`] on precomputed counts.
pub fn cross_entropy_counts<K: Ord>(p: &TokenCounts<K>, q: &TokenCounts<K>) -> Option<f64> {
    if p.total == 0 {
        return None;
    }
    // One lookup per focal token: q counts and the size of the union vocabulary.
    let matched: Vec<(usize, usize)> = p.counts.iter().map(|(t, &c)| (c, q.get(t))).collect();
    let vocab = q.distinct() + matched.iter().filter(|(_, qc)| *qc == 0).count();
    let p_total = p.total as f64;
    let q_norm = (q.total + vocab) as f64;
    let h = matched
        .iter()
        .map(|&(count, qc)| -(count as f64 / p_total) * ((qc + 1) as f64 / q_norm).ln())
        .sum();
    Some(h)
}

/// Tokens of every event, as ids into one vocabulary, laid out in timeline
/// order per community. Built once so parent texts are not re-tokenised for
/// every focal community.
#[derive(Debug, Clone, Default)]
pub struct TokenIndex {
    vocabulary: HashMap<String, u32>,
    communities: HashMap<String, CommunityTokens>,
}

#[derive(Debug, Clone, Default)]
struct CommunityTokens {
    times: Vec<i64>,
    /// Event `i` owns `ids[offsets[i]..offsets[i + 1]]`.
    offsets: Vec<usize>,
    ids: Vec<u32>,
}

impl TokenIndex {
    pub fn build(corpus: &Corpus) -> Self {
        Self::for_communities(corpus, corpus.timelines.keys())
    }

    pub fn for_communities<'a>(corpus: &Corpus, names: impl IntoIterator<Item = &'a String>) -> Self {
        let mut index = TokenIndex::default();
        for name in names {
            let Some(timeline) = corpus.get(name) else { continue };
            let mut entry = CommunityTokens {
                times: Vec::with_capacity(timeline.events.len()),
                offsets: vec![0],
                ids: Vec::new(),
            };
            for e in &timeline.events {
                for token in tokenize(&e.text()) {
                    let next = index.vocabulary.len() as u32;
                    entry.ids.push(*index.vocabulary.entry(token).or_insert(next));
                }
                entry.times.push(e.created_at);
                entry.offsets.push(entry.ids.len());
            }
            index.communities.insert(name.clone(), entry);
        }
        index
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    /// Token ids of a community's events with `from <= created_at < to`.
    pub fn between(&self, community: &str, from: i64, to: i64) -> &[u32] {
        let Some(c) = self.communities.get(community) else {
            return &[];
        };
        let start = c.times.partition_point(|&t| t < from);
        let end = c.times.partition_point(|&t| t < to).max(start);
        &c.ids[c.offsets[start]..c.offsets[end]]
    }

    /// Counts of arbitrary token text; tokens outside the vocabulary get
    /// fresh ids so they stay distinct.
    pub fn counts_of<'t>(&self, tokens: impl IntoIterator<Item = &'t str>) -> TokenCounts<u32> {
        let mut unseen: HashMap<&str, u32> = HashMap::new();
        let mut counts = TokenCounts::default();
        for t in tokens {
            let id = match self.vocabulary.get(t) {
                Some(&id) => id,
                None => {
                    let next = (self.vocabulary.len() + unseen.len()) as u32;
                    *unseen.entry(t).or_insert(next)
                }
            };
            counts.add(&id);
        }
        counts
    }
}

/// Inputs of [`parent_features`] for one parent community.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentProfile {
    /// Distinct members active in the parent during the look-back month.
    pub size: usize,
    pub tokens: TokenCounts<u32>,
}

pub fn parent_features(
    genealogy: &GenealogyGraph,
    focal: &TokenCounts<u32>,
    profiles: &BTreeMap<String, ParentProfile>,
    community: &str,
    k: usize,
) -> FeatureVector {
    let mut fv = FeatureVector::new(community, k);
    let family = Family::Parents;
    let n = genealogy.parents.len();
    if n == 0 {
        for name in PARENT_FEATURES {
            fv.push(name, family, 0.0);
        }
        return fv;
    }
    fv.push("has_parents", family, 1.0);
    fv.push("n_parents", family, n as f64);
    fv.push_opt("genealogy_density", family, genealogy.graph.density());
    fv.push_opt("genealogy_transitivity", family, genealogy.graph.transitivity());

    let log_sizes: Vec<f64> = genealogy
        .parents
        .iter()
        .map(|p| (profiles.get(p).map_or(0, |pr| pr.size) as f64 + 1.0).ln())
        .collect();
    fv.push("max_log_parent_size", family, log_sizes.iter().copied().fold(f64::MIN, f64::max));
    fv.push("min_log_parent_size", family, log_sizes.iter().copied().fold(f64::MAX, f64::min));
    fv.push_opt("std_log_parent_size", family, population_std(&log_sizes));

    let counts: Vec<f64> = genealogy.member_counts.iter().map(|&c| c as f64).collect();
    fv.push_opt("gini_parent_member_counts", family, gini_checked(&counts));

    let empty = TokenCounts::default();
    let distances: Option<Vec<f64>> = genealogy
        .parents
        .iter()
        .map(|p| cross_entropy_counts(focal, profiles.get(p).map_or(&empty, |pr| &pr.tokens)))
        .collect();
    match distances {
        Some(d) => {
            fv.push_opt("median_lang_distance", family, median(&d));
            fv.push("max_lang_distance", family, d.iter().copied().fold(f64::MIN, f64::max));
        }
        None => {
            fv.push_flagged("median_lang_distance", family);
            fv.push_flagged("max_lang_distance", family);
        }
    }
    fv
}

/// Parent profiles already computed for one focal community. The prior month
/// depends only on the creation time, so the same cache serves every k.
pub type ParentCache = BTreeMap<String, ParentProfile>;

fn parent_profile(parent: &str, corpus: &Corpus, tokens: &TokenIndex, from: i64, to: i64) -> ParentProfile {
    let events = corpus.get(parent).map_or(&[][..], |t| t.events_between(from, to));
    let members: BTreeSet<&str> = events
        .iter()
        .filter(|e| !e.has_sentinel_author())
        .map(|e| e.author.as_str())
        .collect();
    ParentProfile {
        size: members.len(),
        tokens: TokenCounts::from_ids(tokens.between(parent, from, to)),
    }
}

/// Looks up parent sizes and texts in the corpus and computes the family.
pub fn parent_family(window: &EarlyWindow, history: &UserHistoryIndex, corpus: &Corpus) -> FeatureVector {
    let parents = find_parents(window, history);
    let tokens = TokenIndex::for_communities(corpus, parents.keys());
    parent_family_indexed(window, history, corpus, &tokens, &mut ParentCache::new())
}

/// Like [`parent_family`] with a prebuilt token index, reusing profiles
/// across windows of the same community.
pub fn parent_family_indexed(
    window: &EarlyWindow,
    history: &UserHistoryIndex,
    corpus: &Corpus,
    tokens: &TokenIndex,
    cache: &mut ParentCache,
) -> FeatureVector {
    let parents = find_parents(window, history);
    let genealogy = build_genealogy(&parents);
    let (from, to) = prior_span(window);
    for p in parents.keys() {
        if !cache.contains_key(p) {
            cache.insert(p.clone(), parent_profile(p, corpus, tokens, from, to));
        }
    }
    let focal_text: Vec<String> = window.events.iter().flat_map(|e| tokenize(&e.text())).collect();
    let focal = tokens.counts_of(focal_text.iter().map(String::as_str));
    parent_features(&genealogy, &focal, cache, &window.community, window.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_user_history, Event, EventKind};

    const DAY: i64 = SECONDS_PER_DAY;
    const CREATED: i64 = 1_500_000_000;

    fn ev(id: &str, author: &str, community: &str, t: i64) -> Event {
        Event {
            event_id: id.into(),
            kind: EventKind::Post,
            author: author.into(),
            community: community.into(),
            created_at: t,
            parent_id: None,
            link_id: None,
            title: Some("hello".into()),
            body: "world".into(),
            score: 1,
        }
    }

    fn focal_window(members: &[&str]) -> EarlyWindow {
        let events: Vec<Event> = members
            .iter()
            .enumerate()
            .map(|(i, m)| ev(&format!("f{i}"), m, "focal", CREATED + i as i64))
            .collect();
        EarlyWindow {
            community: "focal".into(),
            k: members.len(),
            created_at: CREATED,
            members: members.iter().map(|s| s.to_string()).collect(),
            t_k: events.last().unwrap().created_at,
            events,
            days_to_k: 0.0,
        }
    }

    fn parent_map(entries: &[(&str, &[&str])]) -> ParentMap {
        entries
            .iter()
            .map(|(p, ms)| (p.to_string(), ms.iter().map(|m| m.to_string()).collect()))
            .collect()
    }

    #[test]
    fn parents_within_prior_month() {
        let w = focal_window(&["a", "b"]);
        let mut events = w.events.clone();
        events.push(ev("x1", "a", "X", CREATED - 5 * DAY));
        events.push(ev("x2", "b", "X", CREATED - 10 * DAY));
        events.push(ev("y1", "a", "Y", CREATED - 40 * DAY));
        let h = build_user_history(&events);
        let parents = find_parents(&w, &h);
        assert_eq!(parents, parent_map(&[("X", &["a", "b"])]));
    }

    #[test]
    fn brand_new_members_have_no_parents() {
        let w = focal_window(&["a", "b"]);
        let h = build_user_history(&w.events);
        assert!(find_parents(&w, &h).is_empty());
        let fv = parent_family(&w, &h, &Corpus::from_events(w.events.clone()));
        assert_eq!(fv.get("has_parents"), Some(0.0));
        assert!(fv.features.iter().all(|f| f.value == 0.0 && !f.flagged));
    }

    #[test]
    fn genealogy_edges_need_two_shared_members() {
        let g = build_genealogy(&parent_map(&[("X", &["a", "b"]), ("Y", &["a", "b"])]));
        assert_eq!(g.graph.edge_count(), 1);
        let g = build_genealogy(&parent_map(&[("X", &["a", "b"]), ("Y", &["a", "c"])]));
        assert_eq!(g.graph.edge_count(), 0);
        let g = build_genealogy(&parent_map(&[("X", &["a"])]));
        assert_eq!((g.graph.node_count(), g.graph.edge_count()), (1, 0));
    }

    #[test]
    fn connected_parents_and_sizes() {
        let g = build_genealogy(&parent_map(&[
            ("X", &["a", "b", "c"]),
            ("Y", &["a", "b", "c"]),
            ("Z", &["a", "b", "c"]),
        ]));
        let profiles: BTreeMap<String, ParentProfile> = [("X", 9), ("Y", 999), ("Z", 99)]
            .iter()
            .map(|(p, s)| {
                (
                    p.to_string(),
                    ParentProfile {
                        size: *s,
                        tokens: TokenCounts::from_ids(&[0]),
                    },
                )
            })
            .collect();
        let fv = parent_features(&g, &TokenCounts::from_ids(&[0]), &profiles, "focal", 3);
        assert_eq!(fv.get("genealogy_density"), Some(1.0));
        assert_eq!(fv.get("genealogy_transitivity"), Some(1.0));
        assert_eq!(fv.get("gini_parent_member_counts"), Some(0.0));
        assert_eq!(fv.get("max_log_parent_size"), Some(1000f64.ln()));
        assert_eq!(fv.get("min_log_parent_size"), Some(10f64.ln()));
        assert_eq!(fv.get("n_parents"), Some(3.0));
    }

    #[test]
    fn cross_entropy_of_matching_balanced_text() {
        let p: Vec<&str> = std::iter::repeat(["a", "b"]).take(1000).flatten().collect();
        let h = cross_entropy(&p, &p).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() <= 1e-3);
    }

    #[test]
    fn cross_entropy_is_finite_for_unseen_tokens() {
        let h = cross_entropy(&["z", "z", "z"], &["a", "b", "a"]).unwrap();
        assert!(h.is_finite() && h > 1.0);
        assert_eq!(cross_entropy::<&str>(&[], &["a"]), None);
    }

    #[test]
    fn empty_focal_text_flags_distances() {
        let g = build_genealogy(&parent_map(&[("X", &["a"])]));
        let fv = parent_features(&g, &TokenCounts::default(), &BTreeMap::new(), "focal", 1);
        assert!(fv.is_flagged("median_lang_distance"));
        assert!(fv.is_flagged("genealogy_density"));
    }
}
