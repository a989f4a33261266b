//! Seeded synthetic data.
//!
//! [`planted_rules`] builds a transaction database in which the only itemsets
//! mixing visual and word items are the planted pairs `{p, w}`, so the rule
//! set produced at any threshold is known in closed form. [`corpus`] builds
//! feature vectors and five-image stories whose words follow planted
//! activation patterns, for end-to-end runs of the command-line pipeline.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{AnnotationTable, FeatureTable, Story, StoryItem, Vocabulary, STREAM_LEN, UNK_TOKEN};
use crate::transactions::{Item, Origin, Transaction, TransactionDatabase};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedRule {
    pub visual: Item,
    /// Word item, i.e. vocabulary index plus the feature dimension.
    pub word_item: Item,
    pub word: String,
    /// Transactions holding both `visual` and the word.
    pub joint: u64,
    /// Transactions holding `visual`.
    pub ante: u64,
}

impl PlantedRule {
    pub fn confidence(&self) -> Ratio<u64> {
        Ratio::new(self.joint, self.ante)
    }

    /// Whether the rule survives the (non-strict) thresholds.
    pub fn clears(&self, supp_min: u64, conf_min: Ratio<u64>) -> bool {
        self.joint >= supp_min && self.joint as u128 * *conf_min.denom() as u128 >= self.ante as u128 * *conf_min.numer() as u128
    }
}

#[derive(Debug, Clone)]
pub struct PlantedConfig {
    pub rules: usize,
    pub transactions: usize,
    pub feature_dim: usize,
    pub distractor_words: usize,
    pub max_ante: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            rules: 20,
            transactions: 500,
            feature_dim: 256,
            distractor_words: 10,
            max_ante: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub db: TransactionDatabase,
    pub vocab: Vocabulary,
    pub rules: Vec<PlantedRule>,
    /// Visual items that never co-occur with a word.
    pub noise_items: Vec<Item>,
}

impl PlantedDataset {
    pub fn expected_rules(&self, supp_min: u64, conf_min: Ratio<u64>) -> Vec<&PlantedRule> {
        self.rules.iter().filter(|r| r.clears(supp_min, conf_min)).collect()
    }
}

/// Visual items `0..rules` are planted antecedents; noise items occupy the
/// upper half of the feature range.
pub fn planted_rules(seed: u64, config: &PlantedConfig) -> PlantedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = config.feature_dim as Item;
    assert!(config.rules as Item <= d / 2, "feature_dim too small for the planted rules");

    let mut words: Vec<String> = (0..config.rules).map(|i| format!("planted{i:02}")).collect();
    words.extend((0..config.distractor_words).map(|i| format!("distractor{i:02}")));
    let vocab = Vocabulary::from_words(UNK_TOKEN, words).expect("distinct words");
    let noise_items: Vec<Item> = (d / 2..d).collect();

    let mut rows: Vec<Vec<Item>> = Vec::with_capacity(config.transactions);
    let mut rules = Vec::with_capacity(config.rules);
    for r in 0..config.rules {
        let visual = r as Item;
        let word_item = d + r as Item;
        let ante = rng.gen_range(1..=config.max_ante);
        let joint = rng.gen_range(1..=ante);
        for _ in 0..joint {
            rows.push(vec![visual, word_item]);
        }
        for _ in joint..ante {
            let mut row = vec![visual];
            let extra = rng.gen_range(0..=3);
            row.extend(noise_items.choose_multiple(&mut rng, extra).copied());
            rows.push(row);
        }
        rules.push(PlantedRule {
            visual,
            word_item,
            word: vocab.words()[r].clone(),
            joint,
            ante,
        });
    }
    assert!(rows.len() <= config.transactions, "planted rows exceed transaction budget");
    let n_words = vocab.len_words() as Item;
    while rows.len() < config.transactions {
        let row: Vec<Item> = if rng.gen_bool(0.5) {
            let n = rng.gen_range(2..=5);
            noise_items.choose_multiple(&mut rng, n).copied().collect()
        } else {
            let n = rng.gen_range(1..=3);
            (0..n).map(|_| d + rng.gen_range(0..n_words)).collect()
        };
        rows.push(row);
    }
    rows.shuffle(&mut rng);

    let transactions = rows
        .into_iter()
        .enumerate()
        .map(|(i, items)| Transaction::new(items, Origin::CrossModal, format!("t{i:04}")))
        .collect();
    let db = TransactionDatabase::new(transactions, config.feature_dim, vocab.size(), 0)
        .expect("items within range");
    PlantedDataset {
        db,
        vocab,
        rules,
        noise_items,
    }
}

/// Image transactions drawing on planted and noise visual items.
pub fn random_image_transactions(seed: u64, data: &PlantedDataset, count: usize) -> Vec<Transaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<Item> = data.rules.iter().map(|r| r.visual).collect();
    (0..count)
        .map(|i| {
            let n_planted = rng.gen_range(0..=4);
            let mut items: Vec<Item> = planted.choose_multiple(&mut rng, n_planted).copied().collect();
            let n_noise = rng.gen_range(0..=3);
            items.extend(data.noise_items.choose_multiple(&mut rng, n_noise).copied());
            Transaction::new(items, Origin::Image, format!("q{i}"))
        })
        .collect()
}

pub const CORPUS_CONCEPTS: &[&str] = &[
    "beach", "dog", "cake", "tree", "car", "mountain", "snow", "city", "flower", "bird", "boat",
    "bridge", "castle", "horse", "lake", "park", "pumpkin", "river", "street", "train",
];

const CORPUS_FILLER: &[&str] = &["nice", "great", "day", "fun", "time", "beautiful", "friend", "family"];

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub stories: usize,
    pub feature_dim: usize,
    /// Probability that a sentence mentions each concept shown in its image.
    pub mention_rate: f64,
    /// Probability that a story reuses an image from an earlier story.
    pub reuse_rate: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            stories: 60,
            feature_dim: 64,
            mention_rate: 0.8,
            reuse_rate: 0.1,
        }
    }
}

/// Concept `c` drives feature dimensions `2c` and `2c + 1`; other dimensions
/// carry low-level noise.
pub fn corpus(seed: u64, config: &CorpusConfig) -> (FeatureTable, AnnotationTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    assert!(config.feature_dim >= 2 * CORPUS_CONCEPTS.len(), "feature_dim too small");
    let mut features = FeatureTable::new(config.feature_dim);
    let mut shown: Vec<(String, Vec<usize>)> = Vec::new();
    let mut annotations = AnnotationTable::default();

    for s in 0..config.stories {
        let mut items = Vec::with_capacity(STREAM_LEN);
        for _ in 0..STREAM_LEN {
            let (image_id, concepts) = if !shown.is_empty() && rng.gen_bool(config.reuse_rate) {
                shown[rng.gen_range(0..shown.len())].clone()
            } else {
                let n = rng.gen_range(1..=2);
                let concepts: Vec<usize> = (0..CORPUS_CONCEPTS.len()).collect::<Vec<_>>()
                    .choose_multiple(&mut rng, n)
                    .copied()
                    .collect();
                let mut activation: Vec<f32> = (0..config.feature_dim).map(|_| rng.gen_range(0.0..0.5)).collect();
                for &c in &concepts {
                    activation[2 * c] = rng.gen_range(1.0..1.5);
                    activation[2 * c + 1] = rng.gen_range(1.0..1.5);
                }
                let id = format!("img{:05}", features.len());
                features.insert(id.clone(), activation).expect("fresh id with matching length");
                shown.push((id.clone(), concepts.clone()));
                (id, concepts)
            };
            let mut tokens: Vec<String> = vec!["the".into()];
            for &c in &concepts {
                if rng.gen_bool(config.mention_rate) {
                    tokens.push(CORPUS_CONCEPTS[c].into());
                }
            }
            tokens.push("was".into());
            tokens.push(CORPUS_FILLER.choose(&mut rng).expect("non-empty").to_string());
            items.push(StoryItem { image_id, tokens });
        }
        annotations
            .push(Story {
                story_id: format!("story{s:04}"),
                items,
            })
            .expect("five non-empty sentences");
    }
    (features, annotations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::support;

    #[test]
    fn planted_counts_are_exact() {
        let data = planted_rules(3, &PlantedConfig::default());
        assert_eq!(data.db.len(), 500);
        for r in &data.rules {
            assert_eq!(support(&[r.visual], &data.db).0, r.ante);
            assert_eq!(support(&[r.visual, r.word_item], &data.db).0, r.joint);
        }
    }

    #[test]
    fn planted_is_seeded() {
        let a = planted_rules(9, &PlantedConfig::default());
        let b = planted_rules(9, &PlantedConfig::default());
        assert_eq!(a.db, b.db);
        assert_eq!(a.rules, b.rules);
    }

    #[test]
    fn corpus_shape() {
        let (features, annotations) = corpus(1, &CorpusConfig::default());
        assert_eq!(annotations.len(), 60);
        assert!(features.len() <= 300 && features.len() > 200);
        for story in &annotations.stories {
            for id in story.image_ids() {
                assert!(features.get(id).is_some());
            }
        }
    }
}
