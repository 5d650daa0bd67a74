//! Seeded synthetic communities with planted behaviour.
//!
//! A community is simulated as member arrivals (a Poisson process), per-member
//! activity (Poisson processes whose rates follow a power law in arrival
//! order), monthly churn and a hard end of life. Each event becomes a post or
//! a comment; comments reply either to another member's recent event or to
//! the author's own thread. Text is drawn from a Zipf vocabulary shared by
//! all communities in its head and shifted per community in its tail.
//!
//! Everything is driven by ChaCha generators derived from one seed, so the
//! same parameters always produce the same events.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Event, EventKind, DELETED_AUTHOR, MONTH_SECONDS, SECONDS_PER_DAY};

/// 2014-01-01T00:00:00Z.
pub const YEAR_2014_START: i64 = 1_388_534_400;

const HEAD_WORDS: [&str; 32] = [
    "the", "a", "to", "and", "of", "is", "it", "in", "that", "this", "for", "we", "our", "i", "you", "my", "they",
    "good", "great", "love", "like", "bad", "hate", "sad", "us", "me", "your", "their", "thanks", "wrong", "fun",
    "happy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabProfile {
    /// Number of distinct words.
    pub size: usize,
    pub zipf_exponent: f64,
    /// Rotation applied to the tail of the vocabulary.
    pub shift: usize,
}

impl Default for VocabProfile {
    fn default() -> Self {
        VocabProfile {
            size: 3000,
            zipf_exponent: 1.1,
            shift: 0,
        }
    }
}

impl VocabProfile {
    fn word(&self, rank: usize) -> String {
        if rank < HEAD_WORDS.len() {
            return HEAD_WORDS[rank].to_string();
        }
        let tail = self.size.saturating_sub(HEAD_WORDS.len()).max(1);
        format!("w{}", (rank - HEAD_WORDS.len() + self.shift) % tail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub community: String,
    /// Creation time (the first event), seconds since epoch.
    pub start: i64,
    /// Upper bound on distinct members over the community's life.
    pub n_members: usize,
    /// Expected new members per day.
    pub arrival_rate: f64,
    /// Mean events per member per day while active.
    pub activity_rate: f64,
    /// Spread of activity across members: member `j` (in arrival order) gets
    /// weight `(j + 1)^(-1 / concentration)`. Large values are near uniform,
    /// 0 leaves all repeat activity to the founder.
    pub concentration: f64,
    /// Probability that an event is a post.
    pub post_share: f64,
    /// Probability that a comment answers another member.
    pub reply_prob: f64,
    /// Probability that a member stops at each monthly anniversary of joining.
    pub churn: f64,
    /// All activity stops this many 30-day months after creation.
    pub lifetime_months: f64,
    /// Probability that an event's author shows up as deleted.
    pub deleted_prob: f64,
    pub vocabulary: VocabProfile,
    pub seed: u64,
    /// Explicit member names in arrival order; generated when shorter than needed.
    #[serde(default)]
    pub member_names: Vec<String>,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            community: "synth".into(),
            start: YEAR_2014_START,
            n_members: 50,
            arrival_rate: 1.0,
            activity_rate: 0.1,
            concentration: 2.0,
            post_share: 0.3,
            reply_prob: 0.5,
            churn: 0.1,
            lifetime_months: 30.0,
            deleted_prob: 0.0,
            vocabulary: VocabProfile::default(),
            seed: 0,
            member_names: Vec::new(),
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be a probability, got {v}")))
            }
        };
        prob("post_share", self.post_share)?;
        prob("reply_prob", self.reply_prob)?;
        prob("churn", self.churn)?;
        prob("deleted_prob", self.deleted_prob)?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("arrival_rate", self.arrival_rate)?;
        positive("activity_rate", self.activity_rate)?;
        positive("lifetime_months", self.lifetime_months)?;
        if self.concentration.is_nan() || self.concentration < 0.0 {
            return Err(Error::Config("concentration must be >= 0".into()));
        }
        if self.n_members == 0 || self.start <= 0 || self.vocabulary.size == 0 {
            return Err(Error::Config("n_members, start and vocabulary size must be positive".into()));
        }
        Ok(())
    }

    fn member_name(&self, j: usize) -> String {
        self.member_names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("{}_u{j}", self.community))
    }
}

struct Slot {
    time: i64,
    member: usize,
}

/// Simulates one community. Events come out time-ordered.
pub fn generate(params: &SynthParams) -> Result<Vec<Event>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let day = SECONDS_PER_DAY as f64;
    let end = params.start + (params.lifetime_months * MONTH_SECONDS as f64) as i64;

    // Arrivals: founder at creation, then exponential gaps.
    let gap = Exp::new(params.arrival_rate).expect("positive rate");
    let mut arrivals = vec![params.start];
    while arrivals.len() < params.n_members {
        let next = *arrivals.last().unwrap() + (gap.sample(&mut rng) * day).ceil() as i64;
        if next >= end {
            break;
        }
        arrivals.push(next);
    }

    let weights: Vec<f64> = (0..params.n_members)
        .map(|j| {
            if params.concentration == 0.0 {
                if j == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                ((j + 1) as f64).powf(-1.0 / params.concentration)
            }
        })
        .collect();
    let weight_total: f64 = weights.iter().sum();

    let mut slots: Vec<Slot> = Vec::new();
    for (member, &arrival) in arrivals.iter().enumerate() {
        slots.push(Slot { time: arrival, member });
        let mut stop = end;
        if params.churn > 0.0 {
            let mut months = 1i64;
            while arrival + months * MONTH_SECONDS < end && !rng.gen_bool(params.churn) {
                months += 1;
            }
            stop = stop.min(arrival + months * MONTH_SECONDS);
        }
        let rate = params.activity_rate * params.n_members as f64 * weights[member] / weight_total;
        if rate <= 0.0 {
            continue;
        }
        let gaps = Exp::new(rate).expect("positive rate");
        let mut t = arrival as f64;
        loop {
            t += gaps.sample(&mut rng) * day;
            if t >= stop as f64 {
                break;
            }
            slots.push(Slot {
                time: t as i64,
                member,
            });
        }
    }
    slots.sort_by_key(|s| (s.time, s.member));

    let zipf = Zipf::new(params.vocabulary.size as u64, params.vocabulary.zipf_exponent).expect("valid zipf");
    let text = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> String {
        let n = rng.gen_range(lo..=hi);
        (0..n)
            .map(|_| params.vocabulary.word(zipf.sample(rng) as usize - 1))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let names: Vec<String> = (0..arrivals.len()).map(|j| params.member_name(j)).collect();
    let mut events: Vec<Event> = Vec::with_capacity(slots.len());
    let mut authors: Vec<usize> = Vec::with_capacity(slots.len());
    let mut last_post_of: Vec<Option<usize>> = vec![None; arrivals.len()];
    let mut last_event_of: Vec<Option<usize>> = vec![None; arrivals.len()];
    let mut root_of: Vec<usize> = Vec::with_capacity(slots.len());
    let mut any_post = false;

    for (n, slot) in slots.iter().enumerate() {
        let member = slot.member;
        let is_post = !any_post || rng.gen_bool(params.post_share);
        let id = format!("{}_{n:x}", params.community);
        let (kind, parent, root) = if is_post {
            (EventKind::Post, None, n)
        } else {
            let others = rng.gen_bool(params.reply_prob) || last_event_of[member].is_none();
            let target = if others {
                pick_other(&mut rng, &authors, member).or(last_event_of[member])
            } else {
                last_post_of[member].or(last_event_of[member])
            };
            let target = target.expect("at least one earlier event exists");
            (EventKind::Comment, Some(target), root_of[target])
        };
        let author = if rng.gen_bool(params.deleted_prob) {
            DELETED_AUTHOR.to_string()
        } else {
            names[member].clone()
        };
        let (title, body) = if is_post {
            (Some(text(&mut rng, 3, 8)), text(&mut rng, 0, 20))
        } else {
            (None, text(&mut rng, 3, 15))
        };
        events.push(Event {
            event_id: id,
            kind,
            author,
            community: params.community.clone(),
            created_at: slot.time,
            parent_id: parent.map(|p| events[p].fullname()),
            link_id: (!is_post).then(|| events[root].fullname()),
            title,
            body,
            score: rng.gen_range(-2..=12),
        });
        authors.push(member);
        root_of.push(root);
        last_event_of[member] = Some(n);
        if is_post {
            last_post_of[member] = Some(n);
            any_post = true;
        }
    }
    Ok(events)
}

/// A recent event (among the last 50) by someone other than `member`.
fn pick_other(rng: &mut ChaCha8Rng, authors: &[usize], member: usize) -> Option<usize> {
    let lo = authors.len().saturating_sub(50);
    for _ in 0..8 {
        if authors.len() == lo {
            return None;
        }
        let idx = rng.gen_range(lo..authors.len());
        if authors[idx] != member {
            return Some(idx);
        }
    }
    (lo..authors.len()).rev().find(|&i| authors[i] != member)
}

/// Population of communities with drawn parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub n_communities: usize,
    pub seed: u64,
    /// Communities are created uniformly over `[start, start + span_days)`.
    pub start: i64,
    pub span_days: f64,
    /// Range of the planted appeal (member arrivals per day), log-uniform.
    pub arrival_rate: (f64, f64),
    pub activity_rate: (f64, f64),
    pub concentration: (f64, f64),
    pub reply_prob: (f64, f64),
    pub churn: (f64, f64),
    pub lifetime_months: (f64, f64),
    pub n_members: usize,
    /// Size of the shared user pool members are drawn from.
    pub user_pool: usize,
    /// Probability that a member comes from the shared pool rather than being new.
    pub pool_share: f64,
    pub deleted_prob: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            n_communities: 400,
            seed: 7,
            start: YEAR_2014_START,
            span_days: 330.0,
            arrival_rate: (0.12, 4.0),
            activity_rate: (0.015, 0.04),
            concentration: (0.3, 4.0),
            reply_prob: (0.1, 0.9),
            churn: (0.05, 0.4),
            lifetime_months: (16.0, 40.0),
            n_members: 200,
            user_pool: 4000,
            pool_share: 0.5,
            deleted_prob: 0.01,
        }
    }
}

/// Planted parameters and generated events of a corpus.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub communities: Vec<SynthParams>,
    pub events: Vec<Event>,
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        return lo;
    }
    rng.gen_range(lo..hi)
}

/// Draws per-community parameters and simulates every community.
pub fn generate_corpus(params: &CorpusParams) -> Result<SynthCorpus> {
    if params.n_communities == 0 {
        return Err(Error::Config("corpus needs at least one community".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let communities: Vec<SynthParams> = (0..params.n_communities)
        .map(|c| {
            let community = format!("sub{c:04}");
            let n_members = params.n_members;
            let mut seen = HashSet::new();
            let member_names: Vec<String> = (0..n_members)
                .map(|j| {
                    if params.user_pool > 0 && rng.gen_bool(params.pool_share) {
                        for _ in 0..16 {
                            let name = format!("user{}", rng.gen_range(0..params.user_pool));
                            if seen.insert(name.clone()) {
                                return name;
                            }
                        }
                    }
                    format!("{community}_new{j}")
                })
                .collect();
            SynthParams {
                start: params.start + (uniform(&mut rng, (0.0, params.span_days)) * SECONDS_PER_DAY as f64) as i64,
                n_members,
                arrival_rate: log_uniform(&mut rng, params.arrival_rate),
                activity_rate: uniform(&mut rng, params.activity_rate),
                concentration: log_uniform(&mut rng, params.concentration),
                post_share: uniform(&mut rng, (0.2, 0.4)),
                reply_prob: uniform(&mut rng, params.reply_prob),
                churn: uniform(&mut rng, params.churn),
                lifetime_months: uniform(&mut rng, params.lifetime_months),
                deleted_prob: params.deleted_prob,
                vocabulary: VocabProfile {
                    shift: rng.gen_range(0..3000),
                    ..VocabProfile::default()
                },
                seed: rng.gen(),
                member_names,
                community,
            }
        })
        .collect();
    let generated: Vec<Vec<Event>> = communities.par_iter().map(generate).collect::<Result<_>>()?;
    Ok(SynthCorpus {
        communities,
        events: generated.into_iter().flatten().collect(),
    })
}
