//! Event dumps, community timelines, early windows and per-user histories.
//!
//! The input is the public newline-delimited JSON dump layout: one file of
//! posts and one file of comments. Each file is streamed line by line and
//! malformed lines are counted and skipped.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;
/// Length of one analysis month in seconds (fixed 30-day months).
pub const MONTH_SECONDS: i64 = 30 * SECONDS_PER_DAY;
/// Author name the dumps use for deleted accounts.
pub const DELETED_AUTHOR: &str = "[deleted]";
pub const DEFAULT_QUALIFICATION_DAYS: f64 = 90.0;

pub fn is_sentinel(author: &str) -> bool {
    author == DELETED_AUTHOR
}

pub fn seconds_to_days(seconds: i64) -> f64 {
    seconds as f64 / SECONDS_PER_DAY as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Post,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: String,
    pub kind: EventKind,
    pub author: String,
    pub community: String,
    pub created_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub body: String,
    pub score: i64,
}

impl Event {
    pub fn is_post(&self) -> bool {
        self.kind == EventKind::Post
    }

    pub fn is_comment(&self) -> bool {
        self.kind == EventKind::Comment
    }

    pub fn has_sentinel_author(&self) -> bool {
        is_sentinel(&self.author)
    }

    /// Type-prefixed identifier (`t3_` for posts, `t1_` for comments), the
    /// form parent and link references use.
    pub fn fullname(&self) -> String {
        if self.event_id.starts_with("t1_") || self.event_id.starts_with("t3_") {
            return self.event_id.clone();
        }
        match self.kind {
            EventKind::Post => format!("t3_{}", self.event_id),
            EventKind::Comment => format!("t1_{}", self.event_id),
        }
    }

    /// Full text of the event: title (posts only) followed by the body.
    pub fn text(&self) -> String {
        match &self.title {
            Some(t) if !t.is_empty() => format!("{} {}", t, self.body),
            _ => self.body.clone(),
        }
    }
}

/// Which of the two dump files a stream comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Posts,
    Comments,
}

impl FromStr for DumpFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "posts" | "submissions" => Ok(DumpFormat::Posts),
            "comments" => Ok(DumpFormat::Comments),
            other => Err(Error::Config(format!("unknown dump format `{other}`"))),
        }
    }
}

// `created_utc` shows up as an integer, a float or a numeric string depending
// on the dump vintage.
#[derive(Deserialize)]
#[serde(untagged)]
enum Timestamp {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Timestamp {
    fn seconds(&self) -> Option<i64> {
        match self {
            Timestamp::Int(v) => Some(*v),
            Timestamp::Float(v) if v.is_finite() => Some(v.trunc() as i64),
            Timestamp::Float(_) => None,
            Timestamp::Text(s) => {
                let s = s.trim();
                s.parse::<i64>()
                    .ok()
                    .or_else(|| s.parse::<f64>().ok().filter(|v| v.is_finite()).map(|v| v.trunc() as i64))
            }
        }
    }
}

#[derive(Deserialize)]
struct RawPost {
    id: String,
    author: String,
    subreddit: String,
    created_utc: Timestamp,
    title: String,
    #[serde(default)]
    selftext: Option<String>,
    score: i64,
}

#[derive(Deserialize)]
struct RawComment {
    id: String,
    author: String,
    subreddit: String,
    created_utc: Timestamp,
    #[serde(default)]
    parent_id: Option<String>,
    #[serde(default)]
    link_id: Option<String>,
    #[serde(default)]
    body: Option<String>,
    score: i64,
}

fn parse_line(line: &str, format: DumpFormat) -> Option<Event> {
    match format {
        DumpFormat::Posts => {
            let raw: RawPost = serde_json::from_str(line).ok()?;
            let created_at = raw.created_utc.seconds().filter(|&t| t > 0)?;
            Some(Event {
                event_id: raw.id,
                kind: EventKind::Post,
                author: raw.author,
                community: raw.subreddit,
                created_at,
                parent_id: None,
                link_id: None,
                title: Some(raw.title),
                body: raw.selftext.unwrap_or_default(),
                score: raw.score,
            })
        }
        DumpFormat::Comments => {
            let raw: RawComment = serde_json::from_str(line).ok()?;
            let created_at = raw.created_utc.seconds().filter(|&t| t > 0)?;
            // A comment must point somewhere; fall back to the root post.
            let parent_id = raw.parent_id.or_else(|| raw.link_id.clone())?;
            Some(Event {
                event_id: raw.id,
                kind: EventKind::Comment,
                author: raw.author,
                community: raw.subreddit,
                created_at,
                parent_id: Some(parent_id),
                link_id: raw.link_id,
                title: None,
                body: raw.body.unwrap_or_default(),
                score: raw.score,
            })
        }
    }
}

/// Streaming iterator over one dump file.
///
/// Lines that fail to parse are skipped and counted; read failures end the
/// stream with an error.
pub struct EventStream<R> {
    reader: R,
    format: DumpFormat,
    line: String,
    skipped: usize,
    lines_read: usize,
}

impl<R: BufRead> EventStream<R> {
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn lines_read(&self) -> usize {
        self.lines_read
    }
}

impl<R: BufRead> Iterator for EventStream<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line.clear();
            match self.reader.read_line(&mut self.line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(Error::Stream(e))),
            }
            let trimmed = self.line.trim();
            if trimmed.is_empty() {
                continue;
            }
            self.lines_read += 1;
            match parse_line(trimmed, self.format) {
                Some(event) => return Some(Ok(event)),
                None => self.skipped += 1,
            }
        }
    }
}

pub fn stream_events<R: BufRead>(reader: R, format: DumpFormat) -> EventStream<R> {
    EventStream {
        reader,
        format,
        line: String::new(),
        skipped: 0,
        lines_read: 0,
    }
}

/// Opens a dump file, decompressing by extension (`.gz`, `.zst`/`.zstd`,
/// anything else is read as plain text).
pub fn open_dump(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let reader: Box<dyn BufRead> = match ext {
        "gz" => Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file))),
        "zst" | "zstd" => {
            let mut decoder = zstd::stream::read::Decoder::new(file).map_err(|e| Error::io(path, e))?;
            // Pushshift archives use long windows.
            decoder.window_log_max(31).map_err(|e| Error::io(path, e))?;
            Box::new(BufReader::new(decoder))
        }
        _ => Box::new(BufReader::new(file)),
    };
    Ok(reader)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadStats {
    pub lines: usize,
    pub events: usize,
    pub skipped: usize,
}

pub fn read_dump(path: &Path, format: DumpFormat) -> Result<(Vec<Event>, ReadStats)> {
    let mut stream = stream_events(open_dump(path)?, format);
    let mut events = Vec::new();
    for event in stream.by_ref() {
        events.push(event.map_err(|e| match e {
            Error::Stream(source) => Error::io(path, source),
            other => other,
        })?);
    }
    let stats = ReadStats {
        lines: stream.lines_read(),
        events: events.len(),
        skipped: stream.skipped(),
    };
    Ok((events, stats))
}

#[derive(Serialize)]
struct DumpPost<'a> {
    id: &'a str,
    author: &'a str,
    subreddit: &'a str,
    created_utc: i64,
    title: &'a str,
    selftext: &'a str,
    score: i64,
}

#[derive(Serialize)]
struct DumpComment<'a> {
    id: &'a str,
    author: &'a str,
    subreddit: &'a str,
    created_utc: i64,
    parent_id: &'a str,
    link_id: &'a str,
    body: &'a str,
    score: i64,
}

/// Writes events back out as the two NDJSON dump files.
pub fn write_dump<'a, P: Write, C: Write>(
    events: impl IntoIterator<Item = &'a Event>,
    mut posts: P,
    mut comments: C,
) -> Result<()> {
    for e in events {
        match e.kind {
            EventKind::Post => {
                let row = DumpPost {
                    id: &e.event_id,
                    author: &e.author,
                    subreddit: &e.community,
                    created_utc: e.created_at,
                    title: e.title.as_deref().unwrap_or(""),
                    selftext: &e.body,
                    score: e.score,
                };
                serde_json::to_writer(&mut posts, &row)?;
                posts.write_all(b"\n")?;
            }
            EventKind::Comment => {
                let parent = e.parent_id.as_deref().unwrap_or("");
                let row = DumpComment {
                    id: &e.event_id,
                    author: &e.author,
                    subreddit: &e.community,
                    created_utc: e.created_at,
                    parent_id: parent,
                    link_id: e.link_id.as_deref().unwrap_or(parent),
                    body: &e.body,
                    score: e.score,
                };
                serde_json::to_writer(&mut comments, &row)?;
                comments.write_all(b"\n")?;
            }
        }
    }
    posts.flush()?;
    comments.flush()?;
    Ok(())
}

/// Time-ordered events of one community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityTimeline {
    pub community: String,
    /// Timestamp of the first event, used as the creation time.
    pub created_at: i64,
    pub events: Vec<Event>,
}

fn event_order(a: &Event, b: &Event) -> std::cmp::Ordering {
    a.created_at
        .cmp(&b.created_at)
        .then_with(|| a.event_id.cmp(&b.event_id))
}

impl CommunityTimeline {
    /// Builds a timeline from events that all belong to `community`.
    pub fn new(community: impl Into<String>, mut events: Vec<Event>) -> Result<Self> {
        let community = community.into();
        if events.is_empty() {
            return Err(Error::Data(format!("community `{community}` has no events")));
        }
        if let Some(e) = events.iter().find(|e| e.community != community) {
            return Err(Error::Data(format!(
                "event {} belongs to `{}`, not `{community}`",
                e.event_id, e.community
            )));
        }
        events.sort_by(event_order);
        Ok(CommunityTimeline {
            created_at: events[0].created_at,
            community,
            events,
        })
    }

    /// Events with `from <= created_at < to`.
    pub fn events_between(&self, from: i64, to: i64) -> &[Event] {
        let start = self.events.partition_point(|e| e.created_at < from);
        let end = self.events.partition_point(|e| e.created_at < to);
        &self.events[start..end.max(start)]
    }
}

/// All community timelines of a corpus, keyed by community id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub timelines: BTreeMap<String, CommunityTimeline>,
    /// Repeated event ids dropped while building (first occurrence kept).
    pub duplicates: usize,
}

impl Corpus {
    pub fn from_events(events: impl IntoIterator<Item = Event>) -> Self {
        let mut seen: HashSet<(EventKind, String)> = HashSet::new();
        let mut grouped: BTreeMap<String, Vec<Event>> = BTreeMap::new();
        let mut duplicates = 0;
        for event in events {
            if !seen.insert((event.kind, event.event_id.clone())) {
                duplicates += 1;
                continue;
            }
            grouped.entry(event.community.clone()).or_default().push(event);
        }
        let timelines = grouped
            .into_iter()
            .map(|(community, events)| {
                let timeline = CommunityTimeline::new(community.clone(), events)
                    .expect("grouped events are non-empty and share a community");
                (community, timeline)
            })
            .collect();
        Corpus {
            timelines,
            duplicates,
        }
    }

    pub fn get(&self, community: &str) -> Option<&CommunityTimeline> {
        self.timelines.get(community)
    }

    pub fn len(&self) -> usize {
        self.timelines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timelines.is_empty()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.timelines.values().flat_map(|t| t.events.iter())
    }
}

/// Events from a community's creation until its k-th distinct member first acts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyWindow {
    pub community: String,
    pub k: usize,
    pub created_at: i64,
    /// The first `k` distinct non-deleted authors, in order of arrival.
    pub members: Vec<String>,
    pub t_k: i64,
    pub events: Vec<Event>,
    pub days_to_k: f64,
}

impl EarlyWindow {
    /// Timestamp of each member's first event in the window.
    pub fn join_times(&self) -> BTreeMap<&str, i64> {
        let mut joins = BTreeMap::new();
        for e in &self.events {
            if !e.has_sentinel_author() {
                joins.entry(e.author.as_str()).or_insert(e.created_at);
            }
        }
        joins
    }

    pub fn posts(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.is_post())
    }

    pub fn comments(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.is_comment())
    }
}

/// The community did not gather `k` members in the qualification period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rejected {
    pub members_in_period: usize,
}

pub fn extract_early_window(
    timeline: &CommunityTimeline,
    k: usize,
    qualification_days: f64,
) -> std::result::Result<EarlyWindow, Rejected> {
    assert!(k >= 1, "k must be at least 1");
    let deadline = timeline.created_at as f64 + qualification_days * SECONDS_PER_DAY as f64;
    let mut members: Vec<String> = Vec::with_capacity(k);
    let mut seen: HashSet<&str> = HashSet::with_capacity(k);
    for (idx, event) in timeline.events.iter().enumerate() {
        if event.created_at as f64 > deadline {
            break;
        }
        if event.has_sentinel_author() || !seen.insert(event.author.as_str()) {
            continue;
        }
        members.push(event.author.clone());
        if members.len() == k {
            let t_k = event.created_at;
            return Ok(EarlyWindow {
                community: timeline.community.clone(),
                k,
                created_at: timeline.created_at,
                members,
                t_k,
                events: timeline.events[..=idx].to_vec(),
                days_to_k: seconds_to_days(t_k - timeline.created_at),
            });
        }
    }
    Err(Rejected {
        members_in_period: members.len(),
    })
}

/// Activity of one 30-day month after `t_k`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyActivity {
    pub month_index: usize,
    pub posts_count: usize,
    pub comments_count: usize,
    pub active_users: BTreeSet<String>,
    pub posters: BTreeSet<String>,
    pub commenters: BTreeSet<String>,
}

impl MonthlyActivity {
    pub fn new(month_index: usize) -> Self {
        MonthlyActivity {
            month_index,
            ..Default::default()
        }
    }

    pub fn total_count(&self) -> usize {
        self.posts_count + self.comments_count
    }

    pub fn record(&mut self, event: &Event) {
        match event.kind {
            EventKind::Post => self.posts_count += 1,
            EventKind::Comment => self.comments_count += 1,
        }
        if event.has_sentinel_author() {
            return;
        }
        self.active_users.insert(event.author.clone());
        match event.kind {
            EventKind::Post => self.posters.insert(event.author.clone()),
            EventKind::Comment => self.commenters.insert(event.author.clone()),
        };
    }
}

/// Splits `[t_k, t_k + months * 30d)` into half-open 30-day months.
pub fn monthly_partition(timeline: &CommunityTimeline, t_k: i64, months: usize) -> Vec<MonthlyActivity> {
    assert!(months >= 1, "at least one month is required");
    let mut out: Vec<MonthlyActivity> = (1..=months).map(MonthlyActivity::new).collect();
    let end = t_k + months as i64 * MONTH_SECONDS;
    for event in timeline.events_between(t_k, end) {
        let idx = ((event.created_at - t_k) / MONTH_SECONDS) as usize;
        out[idx].record(event);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub community: String,
    pub kind: EventKind,
    pub score: i64,
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user: String,
    pub first_seen: i64,
    /// Sorted by `created_at`, ties by community.
    pub log: Vec<Activity>,
}

impl UserHistory {
    pub fn between(&self, from: i64, to: i64) -> &[Activity] {
        let start = self.log.partition_point(|a| a.created_at < from);
        let end = self.log.partition_point(|a| a.created_at < to);
        &self.log[start..end.max(start)]
    }
}

/// Read-only index of every (non-deleted) user's activity across the corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserHistoryIndex {
    users: BTreeMap<String, UserHistory>,
}

impl UserHistoryIndex {
    pub fn from_histories(histories: impl IntoIterator<Item = UserHistory>) -> Self {
        UserHistoryIndex {
            users: histories.into_iter().map(|h| (h.user.clone(), h)).collect(),
        }
    }

    pub fn first_seen(&self, user: &str) -> Option<i64> {
        self.users.get(user).map(|h| h.first_seen)
    }

    /// Activities of `user` with `from <= created_at < to`.
    pub fn activities(&self, user: &str, from: i64, to: i64) -> &[Activity] {
        self.users.get(user).map(|h| h.between(from, to)).unwrap_or(&[])
    }

    pub fn get(&self, user: &str) -> Option<&UserHistory> {
        self.users.get(user)
    }

    pub fn histories(&self) -> impl Iterator<Item = &UserHistory> {
        self.users.values()
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

pub fn build_user_history<'a>(events: impl IntoIterator<Item = &'a Event>) -> UserHistoryIndex {
    let mut logs: BTreeMap<String, Vec<Activity>> = BTreeMap::new();
    for e in events {
        if e.has_sentinel_author() {
            continue;
        }
        logs.entry(e.author.clone()).or_default().push(Activity {
            community: e.community.clone(),
            kind: e.kind,
            score: e.score,
            created_at: e.created_at,
        });
    }
    let users = logs
        .into_iter()
        .map(|(user, mut log)| {
            log.sort_by(|a, b| {
                a.created_at
                    .cmp(&b.created_at)
                    .then_with(|| a.community.cmp(&b.community))
                    .then_with(|| a.kind.cmp(&b.kind))
                    .then_with(|| a.score.cmp(&b.score))
            });
            let first_seen = log[0].created_at;
            (user.clone(), UserHistory { user, first_seen, log })
        })
        .collect();
    UserHistoryIndex { users }
}
