//! Integer transactions built from pooled CNN activations and description
//! words.
//!
//! Item ids are partitioned by modality: dimension indices of the activation
//! vector occupy `[0, D)` and vocabulary words are shifted to `[D, D + v)`.
//! A cross-modal transaction is the union of one image's top-k dimension
//! indices and the shifted indices of every semantic word describing it.

pub mod text;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{for_each_json_line, write_json_line, AnnotationTable, FeatureTable, Vocabulary};

pub use text::{preprocess_tokens, TextMode};

pub type Item = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Image,
    Text,
    CrossModal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    items: Vec<Item>,
    origin: Origin,
    source_id: String,
}

impl Transaction {
    /// Sorts and deduplicates `items`.
    pub fn new(mut items: Vec<Item>, origin: Origin, source_id: impl Into<String>) -> Self {
        items.sort_unstable();
        items.dedup();
        Transaction {
            items,
            origin,
            source_id: source_id.into(),
        }
    }

    /// Builds an image transaction after checking every item is below `feature_dim`.
    pub fn image(items: Vec<Item>, feature_dim: usize, source_id: impl Into<String>) -> Result<Self> {
        if let Some(&bad) = items.iter().find(|&&i| i as usize >= feature_dim) {
            return Err(Error::Origin(format!(
                "item {bad} is not a visual item (feature dim {feature_dim})"
            )));
        }
        Ok(Transaction::new(items, Origin::Image, source_id))
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains_all(&self, itemset: &[Item]) -> bool {
        is_sorted_subset(itemset, &self.items)
    }
}

/// `needle ⊆ haystack` for ascending slices.
pub fn is_sorted_subset(needle: &[Item], haystack: &[Item]) -> bool {
    let mut rest = haystack;
    'outer: for &x in needle {
        while let Some((&head, tail)) = rest.split_first() {
            rest = tail;
            if head == x {
                continue 'outer;
            }
            if head > x {
                return false;
            }
        }
        return false;
    }
    true
}

/// Thresholds and sizes shared by the mining pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningParams {
    pub top_k: usize,
    /// Minimum support as a transaction count.
    pub supp_min: u64,
    /// Minimum confidence as an exact fraction in (0, 1].
    pub conf_min: Ratio<u64>,
    pub max_len: Option<usize>,
    /// Use `>` instead of `>=` for both thresholds.
    pub strict: bool,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            top_k: 10,
            supp_min: 3,
            conf_min: Ratio::new(3, 5),
            max_len: None,
            strict: false,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self.supp_min == 0 {
            return Err(Error::Config("minimum support must be at least 1".into()));
        }
        if *self.conf_min.numer() == 0 || self.conf_min > Ratio::from_integer(1) {
            return Err(Error::Config(format!(
                "minimum confidence {} is outside (0, 1]",
                self.conf_min
            )));
        }
        if self.max_len == Some(0) {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        Ok(())
    }

    /// Smallest support count that passes the support threshold.
    pub fn support_floor(&self) -> u64 {
        if self.strict {
            self.supp_min + 1
        } else {
            self.supp_min
        }
    }

    /// Exact confidence test `joint / ante (>= | >) conf_min` by cross-multiplication.
    pub fn confidence_passes(&self, joint: u64, ante: u64) -> bool {
        let lhs = joint as u128 * *self.conf_min.denom() as u128;
        let rhs = ante as u128 * *self.conf_min.numer() as u128;
        if self.strict {
            lhs > rhs
        } else {
            lhs >= rhs
        }
    }
}

/// Indices of the `top_k` largest-magnitude activations, ascending. Equal
/// magnitudes prefer the smaller index.
pub fn build_image_transaction(activation: &[f32], top_k: usize, source_id: &str) -> Result<Transaction> {
    if activation.is_empty() {
        return Err(Error::EmptyInput("activation vector"));
    }
    if top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let mut order: Vec<Item> = (0..activation.len() as Item).collect();
    let by_magnitude = |a: &Item, b: &Item| {
        let (ma, mb) = (activation[*a as usize].abs(), activation[*b as usize].abs());
        mb.total_cmp(&ma).then(a.cmp(b))
    };
    let k = top_k.min(activation.len());
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, by_magnitude);
        order.truncate(k);
    }
    Ok(Transaction::new(order, Origin::Image, source_id))
}

/// Maps words to `vocab_index + feature_dim`; words outside the vocabulary
/// (i.e. UNK) are dropped.
pub fn build_text_transaction<'a>(
    words: impl IntoIterator<Item = &'a String>,
    vocab: &Vocabulary,
    feature_dim: usize,
    source_id: &str,
) -> Transaction {
    let items = words
        .into_iter()
        .filter_map(|w| vocab.get(w))
        .map(|idx| idx + feature_dim as Item)
        .collect();
    Transaction::new(items, Origin::Text, source_id)
}

pub fn build_cross_modal_transaction(img: &Transaction, txt: &Transaction) -> Result<Transaction> {
    if img.origin != Origin::Image {
        return Err(Error::Origin(format!(
            "left operand of {:?} has origin {:?}, expected image",
            img.source_id, img.origin
        )));
    }
    if txt.origin != Origin::Text {
        return Err(Error::Origin(format!(
            "right operand of {:?} has origin {:?}, expected text",
            txt.source_id, txt.origin
        )));
    }
    let mut items = Vec::with_capacity(img.len() + txt.len());
    items.extend_from_slice(&img.items);
    items.extend_from_slice(&txt.items);
    Ok(Transaction::new(items, Origin::CrossModal, img.source_id.clone()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionDatabase {
    transactions: Vec<Transaction>,
    feature_dim: usize,
    vocab_size: usize,
    top_k: usize,
}

impl TransactionDatabase {
    pub fn new(
        transactions: Vec<Transaction>,
        feature_dim: usize,
        vocab_size: usize,
        top_k: usize,
    ) -> Result<Self> {
        let limit = (feature_dim + vocab_size) as u64;
        for t in &transactions {
            if let Some(&bad) = t.items.iter().find(|&&i| i as u64 >= limit) {
                return Err(Error::Invariant(format!(
                    "transaction {:?} has item {bad} outside [0, {limit})",
                    t.source_id
                )));
            }
        }
        Ok(TransactionDatabase {
            transactions,
            feature_dim,
            vocab_size,
            top_k,
        })
    }

    /// Database over raw item lists, mainly for tests and synthetic data.
    pub fn from_item_lists<I>(lists: I, feature_dim: usize, vocab_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<Item>>,
    {
        let transactions = lists
            .into_iter()
            .enumerate()
            .map(|(i, items)| Transaction::new(items, Origin::CrossModal, format!("t{i}")))
            .collect();
        TransactionDatabase::new(transactions, feature_dim, vocab_size, 0)
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn top_k(&self) -> usize {
        self.top_k
    }
}

/// One cross-modal transaction per annotated image, in order of first
/// appearance. The text part pools the words of every story that shows the
/// image.
pub fn build_database(
    features: &FeatureTable,
    annotations: &AnnotationTable,
    vocab: &Vocabulary,
    params: &MiningParams,
    mode: TextMode,
) -> Result<TransactionDatabase> {
    let mut order: Vec<&str> = Vec::new();
    let mut sentences: HashMap<&str, Vec<&[String]>> = HashMap::new();
    for story in &annotations.stories {
        for item in &story.items {
            let id = item.image_id.as_str();
            if features.get(id).is_none() {
                return Err(Error::Join(id.to_owned()));
            }
            sentences
                .entry(id)
                .or_insert_with(|| {
                    order.push(id);
                    Vec::new()
                })
                .push(&item.tokens);
        }
    }
    let feature_dim = features.feature_dim();
    let transactions = order
        .par_iter()
        .map(|&id| {
            let activation = features.get(id).expect("joined above");
            let img = build_image_transaction(activation, params.top_k, id)?;
            let words: BTreeSet<String> = preprocess_tokens(sentences[id].iter().copied(), mode);
            let txt = build_text_transaction(&words, vocab, feature_dim, id);
            build_cross_modal_transaction(&img, &txt)
        })
        .collect::<Result<Vec<_>>>()?;
    TransactionDatabase::new(transactions, feature_dim, vocab.size(), params.top_k)
}

#[derive(Serialize, Deserialize)]
struct DatabaseHeader {
    feature_dim: usize,
    vocab_size: usize,
    top_k: usize,
}

#[derive(Serialize, Deserialize)]
struct DatabaseRecord {
    source_id: String,
    items: Vec<Item>,
}

pub fn save_database(db: &TransactionDatabase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let header = DatabaseHeader {
        feature_dim: db.feature_dim,
        vocab_size: db.vocab_size,
        top_k: db.top_k,
    };
    write_json_line(&mut out, &header).map_err(|e| Error::io(path, e))?;
    for t in &db.transactions {
        let record = DatabaseRecord {
            source_id: t.source_id.clone(),
            items: t.items.clone(),
        };
        write_json_line(&mut out, &record).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_database(path: impl AsRef<Path>) -> Result<TransactionDatabase> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Line {
        Header(DatabaseHeader),
        Record(DatabaseRecord),
    }

    let path = path.as_ref();
    let mut header: Option<DatabaseHeader> = None;
    let mut transactions = Vec::new();
    for_each_json_line(path, |line_no, line: Line| {
        let misplaced = |what: &str| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!("unexpected {what}"),
        };
        match (line, &header) {
            (Line::Header(h), None) => header = Some(h),
            (Line::Header(_), Some(_)) => return Err(misplaced("second header")),
            (Line::Record(_), None) => return Err(misplaced("record before header")),
            (Line::Record(r), Some(_)) => {
                transactions.push(Transaction::new(r.items, Origin::CrossModal, r.source_id))
            }
        }
        Ok(())
    })?;
    let header = header.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "missing header line".into(),
    })?;
    TransactionDatabase::new(transactions, header.feature_dim, header.vocab_size, header.top_k)
}
