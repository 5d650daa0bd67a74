//! Batch stages over an output directory.
//!
//! Each stage reads the files written by the stages before it and writes its
//! own files only, so any stage can be re-run from its inputs:
//!
//! | stage         | reads                                  | writes |
//! |---------------|----------------------------------------|--------|
//! | `ingest`      | post and comment dumps                 | `timelines.jsonl`, `user_history.jsonl`, `ingest.json` |
//! | `features`    | ingest outputs                         | `feature_manifest.json`, `features_k{k}.csv`, `features_k{k}.json`, `qualification.csv` |
//! | `labels`      | ingest outputs, feature CSVs           | `success_k{k}.csv`, `thresholds_k{k}.json` |
//! | `correlate`   | success CSVs                           | `correlation_k{k}_{method}.csv`, `correlations_long.csv` |
//! | `experiments` | feature and success CSVs               | `experiments.csv`, `weights.json` |
//! | `report`      | manifest, experiments, correlations    | `report_auc.csv`, `report_correlations.csv`, `report_top_features.csv` |
//!
//! Work is spread with rayon; results are always merged in sorted order so
//! the files do not depend on scheduling.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::text::CategoryLexicon;
use crate::features::{FeatureContext, FeatureManifest, FeatureVector, ParentCache};
use crate::ingest::{
    build_user_history, extract_early_window, read_dump, write_dump, CommunityTimeline, Corpus, DumpFormat, Event, UserHistory,
    UserHistoryIndex,
};
use crate::model::{run_experiment, ExperimentConfig, ExperimentResult, FeatureTable, Matrix, ModelVariant};
use crate::stats::{average_matrices, correlation_matrix, mrr_ranking, CorrelationMatrix, CorrelationMethod};
use crate::synth::{generate_corpus, CorpusParams, SynthCorpus};
use crate::success::{compute_measures, LabelSet, Measure, SuccessMeasures};

/// How many top features the report keeps per measure.
pub const TOP_FEATURES: usize = 10;

/// File names inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    dir: PathBuf,
}

impl Layout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Layout { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn file(&self, name: impl AsRef<str>) -> PathBuf {
        self.dir.join(name.as_ref())
    }

    pub fn synth_posts(&self) -> PathBuf {
        self.file("posts.ndjson")
    }
    pub fn synth_comments(&self) -> PathBuf {
        self.file("comments.ndjson")
    }
    pub fn timelines(&self) -> PathBuf {
        self.file("timelines.jsonl")
    }
    pub fn user_history(&self) -> PathBuf {
        self.file("user_history.jsonl")
    }
    pub fn ingest_summary(&self) -> PathBuf {
        self.file("ingest.json")
    }
    pub fn manifest(&self) -> PathBuf {
        self.file("feature_manifest.json")
    }
    pub fn features(&self, k: usize) -> PathBuf {
        self.file(format!("features_k{k}.csv"))
    }
    pub fn feature_flags(&self, k: usize) -> PathBuf {
        self.file(format!("features_k{k}.json"))
    }
    pub fn qualification(&self) -> PathBuf {
        self.file("qualification.csv")
    }
    pub fn success(&self, k: usize) -> PathBuf {
        self.file(format!("success_k{k}.csv"))
    }
    pub fn thresholds(&self, k: usize) -> PathBuf {
        self.file(format!("thresholds_k{k}.json"))
    }
    pub fn correlation(&self, k: usize, method: CorrelationMethod) -> PathBuf {
        self.file(format!("correlation_k{k}_{method}.csv"))
    }
    pub fn correlations_long(&self) -> PathBuf {
        self.file("correlations_long.csv")
    }
    pub fn experiments(&self) -> PathBuf {
        self.file("experiments.csv")
    }
    pub fn weights(&self) -> PathBuf {
        self.file("weights.json")
    }
    pub fn report_auc(&self) -> PathBuf {
        self.file("report_auc.csv")
    }
    pub fn report_correlations(&self) -> PathBuf {
        self.file("report_correlations.csv")
    }
    pub fn report_top_features(&self) -> PathBuf {
        self.file("report_top_features.csv")
    }

    fn require(&self, path: &Path, stage: &'static str) -> Result<()> {
        if path.is_file() {
            Ok(())
        } else {
            Err(Error::MissingStage {
                stage,
                path: path.to_path_buf(),
            })
        }
    }

    fn ensure_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = create(path)?;
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(items)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_f64(field: &str, path: &Path) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Data(format!("{}: `{field}` is not a number", path.display())))
}

/// Calendar year (UTC) of a timestamp.
pub fn utc_year(timestamp: i64) -> Option<i32> {
    DateTime::from_timestamp(timestamp, 0).map(|t| t.year())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    /// Creation-year filter for focal communities; `None` keeps all.
    pub year: Option<i32>,
    pub lines: usize,
    pub events: usize,
    pub skipped_lines: usize,
    pub duplicates: usize,
    pub communities: usize,
    /// Communities eligible for analysis, sorted.
    pub focal: Vec<String>,
}

/// In-memory result of the ingest stage.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub corpus: Corpus,
    pub history: UserHistoryIndex,
    pub summary: IngestSummary,
}

/// Indexes events; communities created in `year` become focal. Every
/// community stays in the corpus as a potential parent.
pub fn ingest_events(events: Vec<Event>, year: Option<i32>) -> Checkpoint {
    let n_events = events.len();
    let corpus = Corpus::from_events(events);
    let history = build_user_history(corpus.events());
    let focal = corpus
        .timelines
        .values()
        .filter(|t| year.is_none_or(|y| utc_year(t.created_at) == Some(y)))
        .map(|t| t.community.clone())
        .collect();
    let summary = IngestSummary {
        year,
        lines: n_events,
        events: n_events - corpus.duplicates,
        skipped_lines: 0,
        duplicates: corpus.duplicates,
        communities: corpus.len(),
        focal,
    };
    Checkpoint {
        corpus,
        history,
        summary,
    }
}

/// Reads both dumps, indexes them and writes the ingest checkpoint.
pub fn cmd_ingest(posts: &Path, comments: &Path, layout: &Layout, year: Option<i32>) -> Result<IngestSummary> {
    let (mut events, post_stats) = read_dump(posts, DumpFormat::Posts)?;
    let (comment_events, comment_stats) = read_dump(comments, DumpFormat::Comments)?;
    events.extend(comment_events);
    let skipped = post_stats.skipped + comment_stats.skipped;
    if skipped > 0 {
        log::warn!("skipped {skipped} malformed dump lines");
    }
    if events.is_empty() {
        log::warn!("dumps hold no events; writing an empty checkpoint");
    }
    let mut checkpoint = ingest_events(events, year);
    checkpoint.summary.lines = post_stats.lines + comment_stats.lines;
    checkpoint.summary.skipped_lines = skipped;
    if checkpoint.summary.duplicates > 0 {
        log::warn!("dropped {} duplicate events", checkpoint.summary.duplicates);
    }
    write_checkpoint(&checkpoint, layout)?;
    Ok(checkpoint.summary)
}

pub fn write_checkpoint(checkpoint: &Checkpoint, layout: &Layout) -> Result<()> {
    layout.ensure_dir()?;
    write_jsonl(&layout.timelines(), checkpoint.corpus.timelines.values())?;
    write_jsonl(&layout.user_history(), checkpoint.history.histories())?;
    write_json(&layout.ingest_summary(), &checkpoint.summary)
}

pub fn load_checkpoint(layout: &Layout) -> Result<Checkpoint> {
    for path in [layout.ingest_summary(), layout.timelines(), layout.user_history()] {
        layout.require(&path, "ingest")?;
    }
    let summary: IngestSummary = read_json(&layout.ingest_summary())?;
    let timelines: Vec<CommunityTimeline> = read_jsonl(&layout.timelines())?;
    let histories: Vec<UserHistory> = read_jsonl(&layout.user_history())?;
    let corpus = Corpus {
        timelines: timelines.into_iter().map(|t| (t.community.clone(), t)).collect(),
        duplicates: summary.duplicates,
    };
    Ok(Checkpoint {
        corpus,
        history: UserHistoryIndex::from_histories(histories),
        summary,
    })
}

/// Lexicon choice for the linguistic family.
#[derive(Debug, Clone)]
pub enum LexiconSource {
    Bundled,
    File(PathBuf),
    Disabled,
}

impl LexiconSource {
    /// A missing or unreadable file disables the category features with a warning.
    pub fn resolve(&self) -> Result<Option<CategoryLexicon>> {
        match self {
            LexiconSource::Bundled => Ok(Some(CategoryLexicon::default_bundled())),
            LexiconSource::Disabled => Ok(None),
            LexiconSource::File(path) if !path.is_file() => {
                log::warn!(
                    "lexicon {} not found; continuing without category features",
                    path.display()
                );
                Ok(None)
            }
            LexiconSource::File(path) => CategoryLexicon::load(path).map(Some),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFlags {
    pub k: usize,
    pub communities: usize,
    pub rejected: usize,
    /// Features that were undefined and stored as 0, per community.
    pub flagged: BTreeMap<String, Vec<String>>,
}

/// Early-window features of every qualifying focal community for each k,
/// sorted by community id, with the number of rejected communities per k.
pub fn features_for_ks(
    checkpoint: &Checkpoint,
    ks: &[usize],
    qualification_days: f64,
    lexicon: Option<&CategoryLexicon>,
) -> Vec<(Vec<FeatureVector>, usize)> {
    let context = FeatureContext::new(&checkpoint.history, &checkpoint.corpus, lexicon);
    let per_community: Vec<Vec<Option<FeatureVector>>> = checkpoint
        .summary
        .focal
        .par_iter()
        .map(|community| {
            let mut cache = ParentCache::new();
            let timeline = checkpoint.corpus.get(community);
            ks.iter()
                .map(|&k| {
                    let window = extract_early_window(timeline?, k, qualification_days).ok()?;
                    Some(context.extract(&window, &mut cache))
                })
                .collect()
        })
        .collect();
    let mut out: Vec<(Vec<FeatureVector>, usize)> = ks.iter().map(|_| (Vec::new(), 0)).collect();
    for rows in per_community {
        for (slot, row) in out.iter_mut().zip(rows) {
            match row {
                Some(fv) => slot.0.push(fv),
                None => slot.1 += 1,
            }
        }
    }
    out
}

pub fn write_features(layout: &Layout, k: usize, manifest: &FeatureManifest, rows: &[FeatureVector]) -> Result<()> {
    let path = layout.features(k);
    let mut out = csv_writer(&path)?;
    let mut header = vec!["community_id"];
    header.extend(manifest.names());
    out.write_record(&header)?;
    for fv in rows {
        let mut record = vec![fv.community.clone()];
        record.extend(fv.features.iter().map(|f| f.value.to_string()));
        out.write_record(&record)?;
    }
    out.flush().map_err(|e| Error::io(&path, e))
}

/// Computes and writes feature tables for every k.
pub fn cmd_features(layout: &Layout, config: &ExperimentConfig, lexicon: &LexiconSource) -> Result<Vec<(usize, usize)>> {
    let checkpoint = load_checkpoint(layout)?;
    let lexicon = lexicon.resolve()?;
    let manifest = FeatureManifest::for_lexicon(lexicon.as_ref());
    write_json(&layout.manifest(), &manifest)?;

    let ks = config.k_values();
    let tables = features_for_ks(&checkpoint, &ks, config.qualification_days, lexicon.as_ref());
    let mut counts = Vec::new();
    for (k, (rows, rejected)) in ks.into_iter().zip(tables) {
        for fv in &rows {
            if fv.names().ne(manifest.names()) {
                return Err(Error::Data(format!(
                    "feature columns of {} differ from the manifest",
                    fv.community
                )));
            }
        }
        write_features(layout, k, &manifest, &rows)?;
        let flags = FeatureFlags {
            k,
            communities: rows.len(),
            rejected,
            flagged: rows
                .iter()
                .map(|fv| {
                    let names = fv.features.iter().filter(|f| f.flagged).map(|f| f.name.clone()).collect();
                    (fv.community.clone(), names)
                })
                .filter(|(_, names): &(String, Vec<String>)| !names.is_empty())
                .collect(),
        };
        write_json(&layout.feature_flags(k), &flags)?;
        log::info!("k={k}: {} qualifying communities, {rejected} rejected", rows.len());
        counts.push((k, rows.len()));
    }

    let path = layout.qualification();
    let mut out = csv_writer(&path)?;
    out.write_record(["k", "qualifying"])?;
    for (k, n) in &counts {
        out.write_record([k.to_string(), n.to_string()])?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;
    Ok(counts)
}

/// Reads a feature CSV and its flag sidecar back into a table.
pub fn read_feature_table(layout: &Layout, k: usize) -> Result<FeatureTable> {
    for path in [layout.manifest(), layout.features(k), layout.feature_flags(k)] {
        layout.require(&path, "features")?;
    }
    let manifest: FeatureManifest = read_json(&layout.manifest())?;
    let flags: FeatureFlags = read_json(&layout.feature_flags(k))?;
    let path = layout.features(k);
    let mut reader = csv_reader(&path)?;
    let header = reader.headers()?.clone();
    if header.iter().skip(1).ne(manifest.names()) {
        return Err(Error::Data(format!("{} does not match the feature manifest", path.display())));
    }
    let d = manifest.features.len();
    let mut communities = Vec::new();
    let mut values = Vec::new();
    let mut flagged = Vec::new();
    for record in reader.records() {
        let record = record?;
        let community = record[0].to_string();
        let marked = flags.flagged.get(&community);
        for (j, field) in record.iter().skip(1).enumerate() {
            values.push(parse_f64(field, &path)?);
            flagged.push(marked.is_some_and(|m| m.contains(&manifest.features[j].name)));
        }
        communities.push(community);
    }
    Ok(FeatureTable {
        k,
        values: Matrix::from_vec(communities.len(), d, values),
        communities,
        columns: manifest.features,
        flagged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub k: usize,
    pub communities: usize,
    /// Median per measure; empty when there were too few communities.
    pub thresholds: BTreeMap<String, f64>,
    pub positives: BTreeMap<String, usize>,
    pub imbalanced: Vec<String>,
    pub survival_undefined: usize,
}

fn community_ids(layout: &Layout, k: usize) -> Result<Vec<String>> {
    let path = layout.features(k);
    layout.require(&path, "features")?;
    let mut reader = csv_reader(&path)?;
    reader
        .records()
        .map(|r| Ok(r?.get(0).unwrap_or_default().to_string()))
        .collect()
}

/// Success measures and median labels for the communities of each feature table.
pub fn cmd_labels(layout: &Layout, config: &ExperimentConfig) -> Result<()> {
    let checkpoint = load_checkpoint(layout)?;
    let horizons = config.horizons();
    for k in config.k_values() {
        let communities = community_ids(layout, k)?;
        let measures: Vec<SuccessMeasures> = communities
            .par_iter()
            .map(|c| {
                let timeline = checkpoint
                    .corpus
                    .get(c)
                    .ok_or_else(|| Error::Data(format!("community {c} is not in the checkpoint")))?;
                let window = extract_early_window(timeline, k, config.qualification_days)
                    .map_err(|_| Error::Data(format!("community {c} no longer qualifies at k={k}")))?;
                Ok(compute_measures(timeline, window.t_k, &horizons))
            })
            .collect::<Result<_>>()?;
        write_labels(layout, k, communities, measures)?;
    }
    Ok(())
}

pub fn write_labels(layout: &Layout, k: usize, communities: Vec<String>, measures: Vec<SuccessMeasures>) -> Result<()> {
    let path = layout.success(k);
    let mut out = csv_writer(&path)?;
    let mut header = vec!["community_id".to_string()];
    header.extend(Measure::ALL.iter().map(|m| m.name().to_string()));
    header.push("survival_undefined".into());
    header.extend(Measure::ALL.iter().map(|m| format!("label_{}", m.name())));
    out.write_record(&header)?;

    let undefined = measures.iter().filter(|m| m.survival_undefined).count();
    let summary = if communities.len() >= 2 {
        let set = LabelSet::build(k, communities, measures);
        for (i, c) in set.communities.iter().enumerate() {
            let m = &set.measures[i];
            let mut record = vec![c.clone()];
            record.extend(Measure::ALL.iter().map(|&x| m.get(x).to_string()));
            record.push(u8::from(m.survival_undefined).to_string());
            record.extend(Measure::ALL.iter().map(|&x| u8::from(set.labels_for(x)[i]).to_string()));
            out.write_record(&record)?;
        }
        ThresholdSummary {
            k,
            communities: set.communities.len(),
            thresholds: set.thresholds.iter().map(|(m, t)| (m.name().to_string(), *t)).collect(),
            positives: Measure::ALL
                .iter()
                .map(|&m| (m.name().to_string(), set.labels_for(m).iter().filter(|&&l| l).count()))
                .collect(),
            imbalanced: set.imbalanced.iter().map(|m| m.name().to_string()).collect(),
            survival_undefined: undefined,
        }
    } else {
        log::warn!(
            "k={k}: {} qualifying communities, too few to label",
            communities.len()
        );
        ThresholdSummary {
            k,
            communities: communities.len(),
            thresholds: BTreeMap::new(),
            positives: BTreeMap::new(),
            imbalanced: Vec::new(),
            survival_undefined: undefined,
        }
    };
    out.flush().map_err(|e| Error::io(&path, e))?;
    write_json(&layout.thresholds(k), &summary)
}

/// Rows of a success CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub k: usize,
    pub communities: Vec<String>,
    pub measures: Vec<SuccessMeasures>,
    pub labels: BTreeMap<Measure, Vec<bool>>,
}

pub fn read_labels(layout: &Layout, k: usize) -> Result<LabelTable> {
    let path = layout.success(k);
    layout.require(&path, "labels")?;
    let mut reader = csv_reader(&path)?;
    let mut table = LabelTable {
        k,
        communities: Vec::new(),
        measures: Vec::new(),
        labels: Measure::ALL.iter().map(|&m| (m, Vec::new())).collect(),
    };
    for record in reader.records() {
        let record = record?;
        if record.len() != 14 {
            return Err(Error::Data(format!("{}: expected 14 columns", path.display())));
        }
        let num = |i: usize| parse_f64(&record[i], &path);
        table.communities.push(record[0].to_string());
        table.measures.push(SuccessMeasures {
            growth_commenters: num(1)? as usize,
            growth_posters: num(2)? as usize,
            retention: num(3)?,
            survival: num(4)?,
            avg_posts: num(5)?,
            avg_comments: num(6)?,
            survival_undefined: &record[7] == "1",
        });
        for (i, m) in Measure::ALL.iter().enumerate() {
            table.labels.get_mut(m).expect("all measures").push(&record[8 + i] == "1");
        }
    }
    Ok(table)
}

fn write_matrix(path: &Path, matrix: &CorrelationMatrix) -> Result<()> {
    let mut out = csv_writer(path)?;
    let mut header = vec!["measure"];
    header.extend(matrix.measures.iter().map(|m| m.name()));
    out.write_record(&header)?;
    for (i, m) in matrix.measures.iter().enumerate() {
        let mut record = vec![m.name().to_string()];
        record.extend(matrix.values[i].iter().map(|&v| fmt_opt(v)));
        out.write_record(&record)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Pairwise rank correlations of the six measures at every k, both methods.
pub fn cmd_correlate(layout: &Layout, config: &ExperimentConfig) -> Result<Vec<CorrelationMatrix>> {
    let tables: Vec<LabelTable> = config
        .k_values()
        .into_iter()
        .map(|k| read_labels(layout, k))
        .collect::<Result<_>>()?;
    let jobs: Vec<(&LabelTable, CorrelationMethod)> = tables
        .iter()
        .filter(|t| t.communities.len() >= 2)
        .flat_map(|t| CorrelationMethod::ALL.into_iter().map(move |m| (t, m)))
        .collect();
    let matrices: Vec<CorrelationMatrix> = jobs
        .par_iter()
        .map(|(t, method)| correlation_matrix(t.k, &t.measures, *method))
        .collect::<Result<_>>()?;

    let path = layout.correlations_long();
    let mut long = csv_writer(&path)?;
    long.write_record(["k", "measure_a", "measure_b", "method", "coefficient"])?;
    for matrix in &matrices {
        write_matrix(&layout.correlation(matrix.k, matrix.method), matrix)?;
        for (a, b, v) in matrix.pairs() {
            long.write_record([
                matrix.k.to_string(),
                a.name().to_string(),
                b.name().to_string(),
                matrix.method.name().to_string(),
                fmt_opt(v),
            ])?;
        }
    }
    long.flush().map_err(|e| Error::io(&path, e))?;
    Ok(matrices)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub measure: String,
    pub k: usize,
    pub variant: String,
    pub lambda: f64,
    pub bias: f64,
    pub weights: Vec<(String, f64)>,
}

/// Runs every (k, measure, variant) experiment that has enough data.
pub fn run_experiments(
    tables: &[(FeatureTable, LabelTable)],
    measures: &[Measure],
    variants: &[ModelVariant],
    config: &ExperimentConfig,
) -> Result<Vec<ExperimentResult>> {
    let mut jobs = Vec::new();
    for (table, labels) in tables {
        if table.communities != labels.communities {
            return Err(Error::Data(format!(
                "feature and label rows disagree at k={}",
                table.k
            )));
        }
        if table.rows() < 10 {
            log::warn!("k={}: {} communities, skipping experiments", table.k, table.rows());
            continue;
        }
        for &m in measures {
            for &v in variants {
                jobs.push((table, &labels.labels[&m], m, v));
            }
        }
    }
    let outcomes: Vec<Result<ExperimentResult>> = jobs
        .par_iter()
        .map(|&(table, labels, m, v)| run_experiment(table, labels, m, v, config, config.seed))
        .collect();
    let mut results = Vec::new();
    for ((table, _, m, v), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => results.push(r),
            Err(Error::Degenerate(msg)) => log::warn!("skipping {m}/{v} at k={}: {msg}", table.k),
            Err(e) => return Err(e),
        }
    }
    Ok(results)
}

const EXPERIMENT_HEADER: [&str; 12] = [
    "measure",
    "k",
    "variant",
    "auc",
    "lambda",
    "cv_auc",
    "seed",
    "n_train",
    "n_test",
    "folds_used",
    "converged",
    "bias",
];

pub fn cmd_experiments(layout: &Layout, config: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    let tables: Vec<(FeatureTable, LabelTable)> = config
        .k_values()
        .into_iter()
        .map(|k| Ok((read_feature_table(layout, k)?, read_labels(layout, k)?)))
        .collect::<Result<_>>()?;
    let results = run_experiments(&tables, &Measure::ALL, &ModelVariant::all(), config)?;

    let path = layout.experiments();
    let mut out = csv_writer(&path)?;
    out.write_record(EXPERIMENT_HEADER)?;
    for r in &results {
        out.write_record([
            r.measure.name().to_string(),
            r.k.to_string(),
            r.variant.clone(),
            r.auc.to_string(),
            r.lambda.to_string(),
            r.cv_auc.to_string(),
            r.seed.to_string(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            r.folds_used.to_string(),
            u8::from(r.converged).to_string(),
            r.bias.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;
    let weights: Vec<WeightRecord> = results
        .iter()
        .map(|r| WeightRecord {
            measure: r.measure.name().to_string(),
            k: r.k,
            variant: r.variant.clone(),
            lambda: r.lambda,
            bias: r.bias,
            weights: r.weights.clone(),
        })
        .collect();
    write_json(&layout.weights(), &weights)?;
    Ok(results)
}

/// AUC of one measure and variant across the k sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub measure: Measure,
    pub variant: String,
    pub n_k: usize,
    pub median: f64,
    /// Population standard deviation over k.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize_auc(rows: &[(Measure, String, f64)]) -> Vec<AucSummary> {
    let mut groups: BTreeMap<(Measure, usize, &str), Vec<f64>> = BTreeMap::new();
    for (m, v, auc) in rows {
        let order = ModelVariant::from_name(v)
            .and_then(|x| ModelVariant::all().iter().position(|&y| y == x))
            .unwrap_or(usize::MAX);
        groups.entry((*m, order, v.as_str())).or_default().push(*auc);
    }
    groups
        .into_iter()
        .map(|((measure, _, variant), aucs)| {
            let n = aucs.len() as f64;
            let mean = aucs.iter().sum::<f64>() / n;
            AucSummary {
                measure,
                variant: variant.to_string(),
                n_k: aucs.len(),
                median: crate::success::median(&aucs).expect("non-empty group"),
                std: (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt(),
                min: aucs.iter().copied().fold(f64::INFINITY, f64::min),
                max: aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

/// Summary tables over all k: AUC per measure and variant, averaged
/// correlations, and the top features of the all-features model.
pub fn cmd_report(layout: &Layout) -> Result<()> {
    for (path, stage) in [
        (layout.manifest(), "features"),
        (layout.experiments(), "experiments"),
        (layout.weights(), "experiments"),
        (layout.correlations_long(), "correlate"),
    ] {
        layout.require(&path, stage)?;
    }
    let manifest: FeatureManifest = read_json(&layout.manifest())?;

    let exp_path = layout.experiments();
    let mut rows = Vec::new();
    for record in csv_reader(&exp_path)?.records() {
        let record = record?;
        let measure = Measure::from_name(&record[0])
            .ok_or_else(|| Error::Data(format!("unknown measure `{}`", &record[0])))?;
        rows.push((measure, record[2].to_string(), parse_f64(&record[3], &exp_path)?));
    }
    if rows.is_empty() {
        return Err(Error::Degenerate("no experiments to summarise".into()));
    }
    let path = layout.report_auc();
    let mut out = csv_writer(&path)?;
    out.write_record(["measure", "variant", "n_k", "median_auc", "std_auc", "min_auc", "max_auc"])?;
    for s in summarize_auc(&rows) {
        out.write_record([
            s.measure.name().to_string(),
            s.variant,
            s.n_k.to_string(),
            s.median.to_string(),
            s.std.to_string(),
            s.min.to_string(),
            s.max.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    let corr_path = layout.correlations_long();
    let mut by_method: BTreeMap<CorrelationMethod, BTreeMap<usize, MeasurePairs>> = BTreeMap::new();
    for record in csv_reader(&corr_path)?.records() {
        let record = record?;
        let k: usize = record[0]
            .parse()
            .map_err(|_| Error::Data(format!("bad k `{}` in {}", &record[0], corr_path.display())))?;
        let a = Measure::from_name(&record[1]).ok_or_else(|| Error::Data(format!("unknown measure `{}`", &record[1])))?;
        let b = Measure::from_name(&record[2]).ok_or_else(|| Error::Data(format!("unknown measure `{}`", &record[2])))?;
        let method = match &record[3] {
            "spearman" => CorrelationMethod::Spearman,
            "kendall" => CorrelationMethod::Kendall,
            other => return Err(Error::Data(format!("unknown method `{other}`"))),
        };
        let v = if record[4].is_empty() {
            None
        } else {
            Some(parse_f64(&record[4], &corr_path)?)
        };
        by_method.entry(method).or_default().entry(k).or_default().push((a, b, v));
    }
    let path = layout.report_correlations();
    let mut out = csv_writer(&path)?;
    out.write_record(["measure_a", "measure_b", "method", "mean_coefficient", "n_k"])?;
    for (method, per_k) in &by_method {
        let matrices: Vec<CorrelationMatrix> = per_k
            .iter()
            .map(|(&k, pairs)| pairs_to_matrix(k, *method, pairs))
            .collect();
        for (a, b, mean, n) in average_matrices(&matrices) {
            out.write_record([
                a.name().to_string(),
                b.name().to_string(),
                method.name().to_string(),
                fmt_opt(mean),
                n.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    let weights: Vec<WeightRecord> = read_json(&layout.weights())?;
    let family_of: BTreeMap<&str, &str> = manifest
        .features
        .iter()
        .map(|e| (e.name.as_str(), e.family.name()))
        .collect();
    let path = layout.report_top_features();
    let mut out = csv_writer(&path)?;
    out.write_record(["measure", "rank", "feature", "family", "mrr", "mean_coefficient", "n_k"])?;
    for measure in Measure::ALL {
        let per_k: Vec<BTreeMap<String, f64>> = weights
            .iter()
            .filter(|w| w.measure == measure.name() && w.variant == ModelVariant::All.name())
            .map(|w| w.weights.iter().cloned().collect())
            .collect();
        for (rank, f) in mrr_ranking(&per_k)?.into_iter().take(TOP_FEATURES).enumerate() {
            out.write_record([
                measure.name().to_string(),
                (rank + 1).to_string(),
                f.feature.clone(),
                family_of.get(f.feature.as_str()).copied().unwrap_or("").to_string(),
                f.mrr.to_string(),
                f.mean_coefficient.to_string(),
                per_k.len().to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io(&path, e))
}

type MeasurePairs = Vec<(Measure, Measure, Option<f64>)>;

fn pairs_to_matrix(k: usize, method: CorrelationMethod, pairs: &[(Measure, Measure, Option<f64>)]) -> CorrelationMatrix {
    let measures = Measure::ALL.to_vec();
    let d = measures.len();
    let mut values = vec![vec![None; d]; d];
    for (i, row) in values.iter_mut().enumerate() {
        row[i] = Some(1.0);
    }
    let mut degenerate = Vec::new();
    for &(a, b, v) in pairs {
        let i = measures.iter().position(|&m| m == a).expect("known measure");
        let j = measures.iter().position(|&m| m == b).expect("known measure");
        values[i][j] = v;
        values[j][i] = v;
        if v.is_none() {
            degenerate.push((a, b));
        }
    }
    CorrelationMatrix {
        k,
        method,
        measures,
        values,
        degenerate,
    }
}

/// Writes events as a post dump and a comment dump; a `.gz` extension compresses.
pub fn write_dump_files(events: &[Event], posts: &Path, comments: &Path) -> Result<()> {
    fn sink(path: &Path) -> Result<Box<dyn Write>> {
        let file = create(path)?;
        Ok(if path.extension().is_some_and(|e| e == "gz") {
            Box::new(flate2::write::GzEncoder::new(file, flate2::Compression::default()))
        } else {
            Box::new(file)
        })
    }
    write_dump(events, sink(posts)?, sink(comments)?)
}

/// Generates a synthetic corpus into `posts.ndjson`, `comments.ndjson` and
/// `synth_params.json` (the planted parameters).
pub fn cmd_synth(params: &CorpusParams, layout: &Layout) -> Result<SynthCorpus> {
    layout.ensure_dir()?;
    let corpus = generate_corpus(params)?;
    write_dump_files(&corpus.events, &layout.synth_posts(), &layout.synth_comments())?;
    write_json(
        &layout.file("synth_params.json"),
        &serde_json::json!({ "corpus": params, "communities": corpus.communities }),
    )?;
    Ok(corpus)
}

/// Runs every stage after ingest.
pub fn run_all(layout: &Layout, config: &ExperimentConfig, lexicon: &LexiconSource) -> Result<()> {
    cmd_features(layout, config, lexicon)?;
    cmd_labels(layout, config)?;
    cmd_correlate(layout, config)?;
    cmd_experiments(layout, config)?;
    cmd_report(layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_of_timestamp() {
        assert_eq!(utc_year(1_388_534_400), Some(2014));
        assert_eq!(utc_year(1_388_534_399), Some(2013));
    }

    #[test]
    fn auc_summary_uses_population_std() {
        let rows = vec![
            (Measure::Retention, "all".to_string(), 0.6),
            (Measure::Retention, "all".to_string(), 0.8),
            (Measure::Retention, "social".to_string(), 0.7),
        ];
        let s = summarize_auc(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].variant, "social");
        assert_eq!(s[1].variant, "all");
        assert!((s[1].median - 0.7).abs() < 1e-12);
        assert!((s[1].std - 0.1).abs() < 1e-12);
        assert_eq!(s[0].std, 0.0);
    }

    #[test]
    fn missing_stage_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let layout = Layout::new(dir.path());
        match cmd_report(&layout) {
            Err(Error::MissingStage { stage, .. }) => assert_eq!(stage, "features"),
            other => panic!("unexpected {other:?}"),
        }
        match load_checkpoint(&layout) {
            Err(Error::MissingStage { stage, .. }) => assert_eq!(stage, "ingest"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
