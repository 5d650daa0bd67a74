//! Linguistic style: text lengths, vocabulary rate and lexicon categories.

use std::collections::HashSet;
use std::path::Path;

use super::{median, Family, FeatureVector};
use crate::error::{Error, Result};
use crate::ingest::EarlyWindow;

const DEFAULT_LEXICON: &str = include_str!("default_lexicon.txt");

/// Lowercased alphanumeric tokens. Whitespace-separated chunks that look like
/// URLs are dropped before splitting.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|chunk| !is_url(chunk))
        .flat_map(|chunk| chunk.split(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.trim_start_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Exact(String),
    Prefix(String),
}

impl Pattern {
    pub fn parse(raw: &str) -> Result<Self> {
        let raw = raw.trim().to_lowercase();
        match raw.strip_suffix('*') {
            Some("") => Err(Error::Config("empty prefix pattern `*`".into())),
            Some(stem) => Ok(Pattern::Prefix(stem.to_string())),
            None if raw.is_empty() => Err(Error::Config("empty lexicon pattern".into())),
            None => Ok(Pattern::Exact(raw)),
        }
    }

    pub fn matches(&self, token: &str) -> bool {
        match self {
            Pattern::Exact(word) => token == word,
            Pattern::Prefix(stem) => token.starts_with(stem.as_str()),
        }
    }
}

/// Named word categories, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryLexicon {
    categories: Vec<(String, Vec<Pattern>)>,
}

impl CategoryLexicon {
    /// Parses `name: pat1, pat2, ...` lines; `#` starts a comment.
    pub fn parse(source: &str) -> Result<Self> {
        let mut categories: Vec<(String, Vec<Pattern>)> = Vec::new();
        for (lineno, line) in source.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, patterns) = line
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("lexicon line {}: expected `name: patterns`", lineno + 1)))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(Error::Config(format!("lexicon line {}: bad category name `{name}`", lineno + 1)));
            }
            if categories.iter().any(|(n, _)| n == name) {
                return Err(Error::Config(format!("lexicon: duplicate category `{name}`")));
            }
            let patterns = patterns
                .split(',')
                .map(Pattern::parse)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Config(format!("lexicon line {}: {e}", lineno + 1)))?;
            categories.push((name.to_string(), patterns));
        }
        Ok(CategoryLexicon { categories })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The small open lexicon shipped with the crate (pronouns and affect).
    pub fn default_bundled() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(n, _)| n.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Fraction of `tokens` matching each category; `None` for no tokens.
    pub fn fractions(&self, tokens: &[String]) -> Vec<(&str, Option<f64>)> {
        self.categories
            .iter()
            .map(|(name, patterns)| {
                let value = (!tokens.is_empty()).then(|| {
                    let hits = tokens
                        .iter()
                        .filter(|t| patterns.iter().any(|p| p.matches(t)))
                        .count();
                    hits as f64 / tokens.len() as f64
                });
                (name.as_str(), value)
            })
            .collect()
    }
}

pub(crate) fn linguistic_feature_names(lexicon: Option<&CategoryLexicon>) -> Vec<String> {
    let mut names: Vec<String> = ["median_post_length", "median_title_length", "median_comment_length", "vocab_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Some(lex) = lexicon {
        for scope in ["post", "comment"] {
            names.extend(lex.category_names().map(|c| format!("{scope}_{c}")));
        }
    }
    names
}

pub fn linguistic_features(window: &EarlyWindow, lexicon: Option<&CategoryLexicon>) -> FeatureVector {
    let mut fv = FeatureVector::new(window.community.clone(), window.k);
    let family = Family::Linguistic;

    let mut post_lengths = Vec::new();
    let mut title_lengths = Vec::new();
    let mut comment_lengths = Vec::new();
    let mut post_tokens: Vec<String> = Vec::new();
    let mut comment_tokens: Vec<String> = Vec::new();
    for e in &window.events {
        let body = tokenize(&e.body);
        if e.is_post() {
            let title = tokenize(e.title.as_deref().unwrap_or(""));
            post_lengths.push(body.len() as f64);
            title_lengths.push(title.len() as f64);
            post_tokens.extend(title);
            post_tokens.extend(body);
        } else {
            comment_lengths.push(body.len() as f64);
            comment_tokens.extend(body);
        }
    }

    fv.push_opt("median_post_length", family, median(&post_lengths));
    fv.push_opt("median_title_length", family, median(&title_lengths));
    fv.push_opt("median_comment_length", family, median(&comment_lengths));

    let vocabulary: HashSet<&str> = post_tokens
        .iter()
        .chain(comment_tokens.iter())
        .map(String::as_str)
        .collect();
    let n_texts = post_lengths.len() + comment_lengths.len();
    fv.push_opt(
        "vocab_rate",
        family,
        (n_texts > 0).then(|| vocabulary.len() as f64 / n_texts as f64),
    );

    if let Some(lex) = lexicon {
        for (scope, tokens) in [("post", &post_tokens), ("comment", &comment_tokens)] {
            for (category, value) in lex.fractions(tokens) {
                fv.push_opt(format!("{scope}_{category}"), family, value);
            }
        }
    }
    fv
}
