//! Scoring of inferred concepts against the words of reference stories, the
//! threshold sweep built on it, and the normalized comprehensive score.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_rational::Ratio;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{infer_stream, story_transactions, ConceptSet};
use crate::ingest::{AnnotationTable, FeatureTable, Story, Vocabulary};
use crate::miner::mine_frequent;
use crate::rules::{generate_rules, RuleStore};
use crate::transactions::{preprocess_tokens, MiningParams, TextMode, Transaction, TransactionDatabase};

/// Metrics averaged over photo streams.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_streams: usize,
    /// Mean number of inferred concepts.
    pub num: f64,
    /// Mean number of inferred concepts found in the references.
    pub hit: f64,
    /// Fraction of streams with no inferred concept.
    pub zero: f64,
    pub precision: f64,
    pub recall: f64,
    /// Mean of per-stream F1.
    pub f1: f64,
    /// Harmonic mean of `precision` and `recall`.
    pub f1_pooled: f64,
}

/// Semantic words of the reference sentences that the vocabulary knows.
pub fn reference_labels<'a>(
    stories: impl IntoIterator<Item = &'a Story>,
    vocab: &Vocabulary,
    mode: TextMode,
) -> BTreeSet<String> {
    let mut labels = BTreeSet::new();
    for story in stories {
        labels.extend(
            preprocess_tokens(story.sentences(), mode)
                .into_iter()
                .filter(|w| vocab.get(w).is_some()),
        );
    }
    labels
}

/// Per-stream scores `(num, hit, precision, recall, f1)`.
fn stream_scores(inferred: &ConceptSet, labels: &BTreeSet<String>) -> (usize, usize, f64, f64, f64) {
    let num = inferred.len();
    let hit = inferred.concepts.iter().filter(|w| labels.contains(*w)).count();
    let precision = if num == 0 { 0.0 } else { hit as f64 / num as f64 };
    let recall = if labels.is_empty() {
        0.0
    } else {
        hit as f64 / labels.len() as f64
    };
    (num, hit, precision, recall, harmonic(precision, recall))
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Mean that does not depend on the order of `values`.
fn ordered_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn evaluate(inferences: &[ConceptSet], references: &[(String, BTreeSet<String>)]) -> Result<EvalReport> {
    if inferences.len() != references.len() {
        return Err(Error::Alignment(format!(
            "{} inferences vs {} references",
            inferences.len(),
            references.len()
        )));
    }
    if inferences.is_empty() {
        return Err(Error::Alignment("nothing to evaluate".into()));
    }
    if let Some((inf, (id, _))) = inferences
        .iter()
        .zip(references)
        .find(|(inf, (id, _))| inf.story_id != *id)
    {
        return Err(Error::Alignment(format!(
            "inference for {:?} paired with reference {id:?}",
            inf.story_id
        )));
    }
    let scores: Vec<_> = inferences
        .iter()
        .zip(references)
        .map(|(inf, (_, labels))| stream_scores(inf, labels))
        .collect();
    let n = scores.len();
    let precision = ordered_mean(scores.iter().map(|s| s.2).collect());
    let recall = ordered_mean(scores.iter().map(|s| s.3).collect());
    Ok(EvalReport {
        n_streams: n,
        num: scores.iter().map(|s| s.0).sum::<usize>() as f64 / n as f64,
        hit: scores.iter().map(|s| s.1).sum::<usize>() as f64 / n as f64,
        zero: scores.iter().filter(|s| s.0 == 0).count() as f64 / n as f64,
        precision,
        recall,
        f1: ordered_mean(scores.iter().map(|s| s.4).collect()),
        f1_pooled: harmonic(precision, recall),
    })
}

/// A photo stream to evaluate on: five image transactions and the pooled
/// labels of every reference story over the same images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalStream {
    pub story_id: String,
    pub images: Vec<Transaction>,
    pub labels: BTreeSet<String>,
}

/// Groups stories showing the same image sequence into one stream, named
/// after its first story.
pub fn build_eval_streams(
    features: &FeatureTable,
    annotations: &AnnotationTable,
    vocab: &Vocabulary,
    mode: TextMode,
    top_k: usize,
) -> Result<Vec<EvalStream>> {
    let mut order: Vec<Vec<&str>> = Vec::new();
    let mut groups: HashMap<Vec<&str>, Vec<&Story>> = HashMap::new();
    for story in &annotations.stories {
        let key: Vec<&str> = story.image_ids().collect();
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(story);
    }
    order
        .iter()
        .map(|key| {
            let stories = &groups[key];
            Ok(EvalStream {
                story_id: stories[0].story_id.clone(),
                images: story_transactions(stories[0], features, top_k)?,
                labels: reference_labels(stories.iter().copied(), vocab, mode),
            })
        })
        .collect()
}

/// Up to `n` streams drawn without replacement, kept in their original order.
pub fn sample_streams(streams: &[EvalStream], n: usize, seed: u64) -> Vec<EvalStream> {
    if n >= streams.len() {
        return streams.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, streams.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| streams[i].clone()).collect()
}

pub fn infer_streams(streams: &[EvalStream], store: &RuleStore) -> Result<Vec<ConceptSet>> {
    streams
        .par_iter()
        .map(|s| infer_stream(&s.story_id, &s.images, store))
        .collect()
}

pub fn evaluate_store(store: &RuleStore, streams: &[EvalStream]) -> Result<EvalReport> {
    let inferred = infer_streams(streams, store)?;
    let references: Vec<(String, BTreeSet<String>)> = streams
        .iter()
        .map(|s| (s.story_id.clone(), s.labels.clone()))
        .collect();
    evaluate(&inferred, &references)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPoint {
    pub supp_min: u64,
    pub conf_min: Ratio<u64>,
}

/// One row of a report file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: Option<SweepPoint>,
    pub rule_count: usize,
    pub report: EvalReport,
}

impl Serialize for SweepRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            supp_min: Option<u64>,
            conf_min: Option<[u64; 2]>,
            rule_count: usize,
            num: f64,
            hit: f64,
            zero: f64,
            precision: f64,
            recall: f64,
            f1: f64,
            f1_pooled: f64,
        }
        let r = &self.report;
        Row {
            supp_min: self.point.map(|p| p.supp_min),
            conf_min: self.point.map(|p| [*p.conf_min.numer(), *p.conf_min.denom()]),
            rule_count: self.rule_count,
            num: r.num,
            hit: r.hit,
            zero: r.zero,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            f1_pooled: r.f1_pooled,
        }
        .serialize(s)
    }
}

/// Mines once at the loosest support of the grid, then derives and scores the
/// rule store of every grid point in grid order.
pub fn threshold_sweep(
    db: &TransactionDatabase,
    grid: &[SweepPoint],
    base: &MiningParams,
    vocab: &Vocabulary,
    streams: &[EvalStream],
    tag: &str,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let params_at = |p: &SweepPoint| MiningParams {
        supp_min: p.supp_min,
        conf_min: p.conf_min,
        ..base.clone()
    };
    for p in grid {
        params_at(p).validate()?;
    }
    let loosest = grid
        .iter()
        .map(|p| params_at(p).support_floor())
        .min()
        .expect("non-empty grid");
    let freq = mine_frequent(db, loosest, base.max_len);
    grid.iter()
        .map(|p| {
            let store = generate_rules(&freq, &params_at(p), vocab, db.feature_dim(), tag)?;
            Ok(SweepRow {
                point: Some(*p),
                rule_count: store.len(),
                report: evaluate_store(&store, streams)?,
            })
        })
        .collect()
}

/// Sum over metrics of `(x - l) / (r - l)`, each term clamped to [0, 1].
/// `runs[i][j]` is metric `j` of run `i`.
pub fn comprehensive_score(runs: &[Vec<f64>], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    if lower.len() != upper.len() {
        return Err(Error::Bounds(format!(
            "{} lower bounds vs {} upper bounds",
            lower.len(),
            upper.len()
        )));
    }
    if let Some(j) = (0..lower.len()).find(|&j| upper[j].partial_cmp(&lower[j]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::Bounds(format!(
            "metric {j}: upper bound {} is not above lower bound {}",
            upper[j], lower[j]
        )));
    }
    runs.iter()
        .enumerate()
        .map(|(i, run)| {
            if run.len() != lower.len() {
                return Err(Error::Bounds(format!(
                    "run {i} has {} metrics, bounds cover {}",
                    run.len(),
                    lower.len()
                )));
            }
            Ok(run
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&x, (&l, &r))| ((x - l) / (r - l)).clamp(0.0, 1.0))
                .sum())
        })
        .collect()
}

pub fn save_report(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::io(path, e.into()))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn conf_percent(c: Ratio<u64>) -> String {
    let pct = Ratio::new(100 * c.numer(), *c.denom());
    if pct.is_integer() {
        format!("{}%", pct.to_integer())
    } else {
        format!("{:.1}%", 100.0 * *c.numer() as f64 / *c.denom() as f64)
    }
}

/// Plain-text table with columns Sup, Conf, Num, Hit, Zero, Prec, Recall, F1.
pub fn render_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6} {:>8}",
        "Sup", "Conf", "Num", "Hit", "Zero", "Prec", "Recall", "F1", "Rules"
    );
    for row in rows {
        let (sup, conf) = match row.point {
            Some(p) => (p.supp_min.to_string(), conf_percent(p.conf_min)),
            None => ("-".into(), "-".into()),
        };
        let r = &row.report;
        let _ = writeln!(
            out,
            "{:>5} {:>6} {:>7.1} {:>7.1} {:>7} {:>7} {:>7} {:>6.3} {:>8}",
            sup,
            conf,
            r.num,
            r.hit,
            percent(r.zero),
            percent(r.precision),
            percent(r.recall),
            r.f1,
            row.rule_count
        );
    }
    out
}
