//! Concept inference: a rule fires for an image when every visual item of
//! its antecedent is present in the image transaction.

use std::collections::BTreeMap;
use std::io::Write;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{write_json_line, FeatureTable, Story, STREAM_LEN};
use crate::rules::RuleStore;
use crate::transactions::{build_image_transaction, is_sorted_subset, Item, Origin, Transaction};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiredRule {
    pub antecedent: Vec<Item>,
    pub consequent: Item,
    pub joint: u64,
    pub ante: u64,
}

impl Serialize for FiredRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("antecedent", &self.antecedent)?;
        map.serialize_entry("confidence", &[self.joint, self.ante])?;
        map.end()
    }
}

/// Words inferred for one image, each with the rules that produced it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImageInference {
    pub words: BTreeMap<String, Vec<FiredRule>>,
}

impl ImageInference {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(word)
    }
}

pub fn infer_image(img: &Transaction, store: &RuleStore) -> Result<ImageInference> {
    if img.origin() != Origin::Image {
        return Err(Error::Origin(format!(
            "inference needs an image transaction, {:?} has origin {:?}",
            img.source_id(),
            img.origin()
        )));
    }
    if let Some(&bad) = img.items().iter().find(|&&i| i as usize >= store.feature_dim()) {
        return Err(Error::Origin(format!(
            "transaction {:?} contains non-visual item {bad}",
            img.source_id()
        )));
    }
    let mut out = ImageInference::default();
    for &item in img.items() {
        for stored in store.starting_with(item) {
            let rule = &stored.rule;
            if !is_sorted_subset(&rule.antecedent[1..], img.items()) {
                continue;
            }
            let word = store.word(rule.consequent).unwrap_or_default().to_owned();
            out.words.entry(word).or_default().push(FiredRule {
                antecedent: rule.antecedent.clone(),
                consequent: rule.consequent,
                joint: rule.support_count,
                ante: rule.antecedent_support,
            });
        }
    }
    Ok(out)
}

/// Deduplicated concepts of one photo stream. Words appear in the order they
/// were first inferred (image by image, alphabetical within an image).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptSet {
    pub story_id: String,
    pub concepts: Vec<String>,
    pub provenance: BTreeMap<String, Vec<FiredRule>>,
}

impl ConceptSet {
    pub fn new(story_id: impl Into<String>) -> Self {
        ConceptSet {
            story_id: story_id.into(),
            concepts: Vec::new(),
            provenance: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn add(&mut self, inference: ImageInference) {
        for (word, fired) in inference.words {
            let slot = self.provenance.entry(word.clone()).or_insert_with(|| {
                self.concepts.push(word);
                Vec::new()
            });
            for rule in fired {
                if !slot.contains(&rule) {
                    slot.push(rule);
                }
            }
        }
    }
}

pub fn infer_stream(story_id: &str, imgs: &[Transaction], store: &RuleStore) -> Result<ConceptSet> {
    if imgs.len() != STREAM_LEN {
        return Err(Error::Arity {
            expected: STREAM_LEN,
            found: imgs.len(),
        });
    }
    let mut set = ConceptSet::new(story_id);
    for img in imgs {
        set.add(infer_image(img, store)?);
    }
    Ok(set)
}

/// Image transactions for the five photos of `story`.
pub fn story_transactions(story: &Story, features: &FeatureTable, top_k: usize) -> Result<Vec<Transaction>> {
    story
        .image_ids()
        .map(|id| {
            let activation = features.get(id).ok_or_else(|| Error::Join(id.to_owned()))?;
            build_image_transaction(activation, top_k, id)
        })
        .collect()
}

/// Writes one `{"story_id", "concepts"[, "provenance"]}` line.
pub fn write_concepts<W: Write>(out: &mut W, set: &ConceptSet, with_provenance: bool) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        story_id: &'a str,
        concepts: &'a [String],
        #[serde(skip_serializing_if = "Option::is_none")]
        provenance: Option<&'a BTreeMap<String, Vec<FiredRule>>>,
    }
    write_json_line(
        out,
        &Line {
            story_id: &set.story_id,
            concepts: &set.concepts,
            provenance: with_provenance.then_some(&set.provenance),
        },
    )
}
