//! Vision-to-word rules.
//!
//! A rule `X => w` has a purely visual antecedent (every item below the
//! feature dimension) and a single word consequent (item at or above it).
//! Supports are integer counts and confidences exact rationals; every
//! threshold test is done by cross-multiplication.

mod io;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::Vocabulary;
use crate::miner::FrequentItemsetTable;
use crate::transactions::{Item, MiningParams};

pub use io::{load_store, save_store, write_store, RULES_FORMAT, RULES_VERSION};

/// `joint / ante` as an exact fraction in (0, 1].
pub fn confidence(joint: u64, ante: u64) -> Result<Ratio<u64>> {
    if ante == 0 {
        return Err(Error::Domain("antecedent support is zero".into()));
    }
    if joint == 0 || joint > ante {
        return Err(Error::Domain(format!(
            "joint support {joint} must lie in 1..={ante}"
        )));
    }
    Ok(Ratio::new(joint, ante))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CrossModalRule {
    pub antecedent: Vec<Item>,
    pub consequent: Item,
    /// Transactions containing antecedent and consequent.
    pub support_count: u64,
    /// Transactions containing the antecedent.
    pub antecedent_support: u64,
}

impl CrossModalRule {
    pub fn confidence(&self) -> Ratio<u64> {
        Ratio::new(self.support_count, self.antecedent_support)
    }

    /// Compares confidences exactly without reducing either fraction.
    pub fn cmp_confidence(&self, other: &CrossModalRule) -> Ordering {
        let lhs = self.support_count as u128 * other.antecedent_support as u128;
        let rhs = other.support_count as u128 * self.antecedent_support as u128;
        lhs.cmp(&rhs)
    }

    pub fn key(&self) -> RuleKey {
        (self.antecedent.clone(), self.consequent)
    }

    fn check(&self, feature_dim: usize, vocab_size: usize) -> Result<()> {
        let d = feature_dim as u64;
        if self.antecedent.is_empty() {
            return Err(Error::Invariant("rule with empty antecedent".into()));
        }
        if !self.antecedent.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invariant(format!(
                "antecedent {:?} is not strictly ascending",
                self.antecedent
            )));
        }
        if let Some(&bad) = self.antecedent.iter().find(|&&i| i as u64 >= d) {
            return Err(Error::Invariant(format!(
                "antecedent item {bad} is not visual (feature dim {feature_dim})"
            )));
        }
        let c = self.consequent as u64;
        if c < d || c >= d + vocab_size as u64 {
            return Err(Error::Invariant(format!(
                "consequent {c} is outside the word range [{d}, {})",
                d + vocab_size as u64
            )));
        }
        if self.support_count == 0 || self.support_count > self.antecedent_support {
            return Err(Error::Invariant(format!(
                "rule {:?} => {c} has joint support {} and antecedent support {}",
                self.antecedent, self.support_count, self.antecedent_support
            )));
        }
        Ok(())
    }
}

pub type RuleKey = (Vec<Item>, Item);

/// Where a rule was mined and with which counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub tag: String,
    pub joint: u64,
    pub ante: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredRule {
    pub rule: CrossModalRule,
    pub provenance: Vec<Provenance>,
}

/// Rules keyed by `(antecedent, consequent)` together with the word each
/// consequent stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleStore {
    feature_dim: usize,
    vocab_size: usize,
    words: BTreeMap<Item, String>,
    rules: Vec<StoredRule>,
    /// First antecedent item -> positions in `rules`.
    by_first_item: HashMap<Item, Vec<usize>>,
}

impl RuleStore {
    pub fn empty(feature_dim: usize, vocab_size: usize) -> Self {
        RuleStore {
            feature_dim,
            vocab_size,
            words: BTreeMap::new(),
            rules: Vec::new(),
            by_first_item: HashMap::new(),
        }
    }

    /// Checks every rule against the store invariants and orders them by key.
    pub fn from_rules(
        feature_dim: usize,
        vocab_size: usize,
        rules: impl IntoIterator<Item = (StoredRule, String)>,
    ) -> Result<Self> {
        let mut words: BTreeMap<Item, String> = BTreeMap::new();
        let mut keyed: BTreeMap<RuleKey, StoredRule> = BTreeMap::new();
        for (stored, word) in rules {
            stored.rule.check(feature_dim, vocab_size)?;
            match words.get(&stored.rule.consequent) {
                Some(existing) if *existing != word => {
                    return Err(Error::Invariant(format!(
                        "item {} is labelled both {existing:?} and {word:?}",
                        stored.rule.consequent
                    )))
                }
                Some(_) => {}
                None => {
                    words.insert(stored.rule.consequent, word);
                }
            }
            let key = stored.rule.key();
            if keyed.insert(key.clone(), stored).is_some() {
                return Err(Error::Invariant(format!("duplicate rule {:?} => {}", key.0, key.1)));
            }
        }
        let mut seen_words: HashMap<&str, Item> = HashMap::new();
        for (&item, word) in &words {
            if let Some(other) = seen_words.insert(word, item) {
                return Err(Error::Invariant(format!(
                    "word {word:?} is assigned to both items {other} and {item}"
                )));
            }
        }
        Ok(Self::assemble(feature_dim, vocab_size, words, keyed.into_values().collect()))
    }

    fn assemble(
        feature_dim: usize,
        vocab_size: usize,
        words: BTreeMap<Item, String>,
        rules: Vec<StoredRule>,
    ) -> Self {
        let mut by_first_item: HashMap<Item, Vec<usize>> = HashMap::new();
        for (pos, r) in rules.iter().enumerate() {
            by_first_item.entry(r.rule.antecedent[0]).or_default().push(pos);
        }
        RuleStore {
            feature_dim,
            vocab_size,
            words,
            rules,
            by_first_item,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rules in key order.
    pub fn rules(&self) -> &[StoredRule] {
        &self.rules
    }

    pub fn get(&self, antecedent: &[Item], consequent: Item) -> Option<&StoredRule> {
        let first = antecedent.first()?;
        self.by_first_item.get(first)?.iter().map(|&p| &self.rules[p]).find(|r| {
            r.rule.consequent == consequent && r.rule.antecedent == antecedent
        })
    }

    /// Rules whose antecedent starts with `item`.
    pub fn starting_with(&self, item: Item) -> impl Iterator<Item = &StoredRule> {
        self.by_first_item
            .get(&item)
            .into_iter()
            .flatten()
            .map(|&p| &self.rules[p])
    }

    pub fn word(&self, consequent: Item) -> Option<&str> {
        self.words.get(&consequent).map(String::as_str)
    }

    /// Number of distinct consequent words.
    pub fn concept_count(&self) -> usize {
        self.words.len()
    }

    pub fn keys(&self) -> impl Iterator<Item = RuleKey> + '_ {
        self.rules.iter().map(|r| r.rule.key())
    }
}

/// Turns frequent itemsets with exactly one word item into `visual => word`
/// rules that clear both thresholds.
pub fn generate_rules(
    freq: &FrequentItemsetTable,
    params: &MiningParams,
    vocab: &Vocabulary,
    feature_dim: usize,
    tag: &str,
) -> Result<RuleStore> {
    let d = feature_dim as Item;
    let floor = params.support_floor();
    let candidates: Vec<(&[Item], u64)> = freq
        .iter()
        .filter(|&(items, joint)| {
            // items are ascending, so "exactly one word" means only the last is >= D
            let n = items.len();
            n >= 2 && items[n - 1] >= d && items[n - 2] < d && joint >= floor
        })
        .collect();
    let rules = candidates
        .par_iter()
        .filter_map(|&(items, joint)| {
            let (consequent, antecedent) = items.split_last().expect("len >= 2");
            let ante = match freq.support(antecedent) {
                Some(n) => n,
                None => return Some(Err(Error::ClosureViolation(antecedent.to_vec()))),
            };
            if !params.confidence_passes(joint, ante) {
                return None;
            }
            let word = match vocab.words().get((consequent - d) as usize) {
                Some(w) => w.clone(),
                None => {
                    return Some(Err(Error::Invariant(format!(
                        "item {consequent} does not name a vocabulary word"
                    ))))
                }
            };
            let stored = StoredRule {
                rule: CrossModalRule {
                    antecedent: antecedent.to_vec(),
                    consequent: *consequent,
                    support_count: joint,
                    antecedent_support: ante,
                },
                provenance: vec![Provenance {
                    tag: tag.to_owned(),
                    joint,
                    ante,
                }],
            };
            Some(Ok((stored, word)))
        })
        .collect::<Result<Vec<_>>>()?;
    RuleStore::from_rules(feature_dim, vocab.size(), rules)
}

/// Union of two stores. On a key collision the entry with the higher
/// confidence wins (then the larger joint support, then `a`), and the
/// provenance lists are concatenated.
pub fn merge_stores(a: &RuleStore, b: &RuleStore) -> Result<RuleStore> {
    if a.feature_dim != b.feature_dim {
        return Err(Error::IncompatibleStore(format!(
            "feature dimensions differ ({} vs {})",
            a.feature_dim, b.feature_dim
        )));
    }
    if a.vocab_size != b.vocab_size {
        return Err(Error::RemapRequired(format!(
            "vocabulary sizes differ ({} vs {})",
            a.vocab_size, b.vocab_size
        )));
    }
    let mut words = a.words.clone();
    let mut items_by_word: HashMap<&str, Item> =
        a.words.iter().map(|(&i, w)| (w.as_str(), i)).collect();
    for (&item, word) in &b.words {
        if let Some(existing) = a.words.get(&item) {
            if existing != word {
                return Err(Error::RemapRequired(format!(
                    "item {item} is {existing:?} in one store and {word:?} in the other"
                )));
            }
        }
        match items_by_word.get(word.as_str()) {
            Some(&other) if other != item => {
                return Err(Error::RemapRequired(format!(
                    "word {word:?} is item {other} in one store and {item} in the other"
                )))
            }
            _ => {}
        }
        items_by_word.insert(word, item);
        words.insert(item, word.clone());
    }

    let mut merged: BTreeMap<RuleKey, StoredRule> =
        a.rules.iter().map(|r| (r.rule.key(), r.clone())).collect();
    for incoming in &b.rules {
        match merged.get_mut(&incoming.rule.key()) {
            None => {
                merged.insert(incoming.rule.key(), incoming.clone());
            }
            Some(current) => {
                let replace = match incoming.rule.cmp_confidence(&current.rule) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => incoming.rule.support_count > current.rule.support_count,
                };
                if replace {
                    current.rule = incoming.rule.clone();
                }
                current.provenance.extend(incoming.provenance.iter().cloned());
            }
        }
    }
    Ok(RuleStore::assemble(
        a.feature_dim,
        a.vocab_size,
        words,
        merged.into_values().collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::UNK_TOKEN;
    use crate::miner::mine_frequent;
    use crate::transactions::TransactionDatabase;

    fn example_table() -> FrequentItemsetTable {
        let db = TransactionDatabase::from_item_lists(
            [vec![1, 2, 3], vec![1, 2], vec![1, 3], vec![2, 3], vec![1, 2, 3]],
            3,
            2,
        )
        .unwrap();
        mine_frequent(&db, 3, None)
    }

    fn vocab() -> Vocabulary {
        Vocabulary::from_words(UNK_TOKEN, vec!["w".into()]).unwrap()
    }

    fn params(supp: u64, conf: (u64, u64)) -> MiningParams {
        MiningParams {
            supp_min: supp,
            conf_min: Ratio::new(conf.0, conf.1),
            ..Default::default()
        }
    }

    pub(crate) fn rule(ante: &[Item], cons: Item, joint: u64, total: u64, tag: &str) -> (StoredRule, String) {
        (
            StoredRule {
                rule: CrossModalRule {
                    antecedent: ante.to_vec(),
                    consequent: cons,
                    support_count: joint,
                    antecedent_support: total,
                },
                provenance: vec![Provenance {
                    tag: tag.into(),
                    joint,
                    ante: total,
                }],
            },
            format!("w{cons}"),
        )
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence(3, 4).unwrap(), Ratio::new(3, 4));
        assert_eq!(confidence(4, 4).unwrap(), Ratio::from_integer(1));
        assert!(matches!(confidence(3, 0), Err(Error::Domain(_))));
        assert!(matches!(confidence(5, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn generates_vision_to_word_rules() {
        let store = generate_rules(&example_table(), &params(3, (3, 5)), &vocab(), 3, "t").unwrap();
        let keys: Vec<RuleKey> = store.keys().collect();
        assert_eq!(keys, vec![(vec![1], 3), (vec![2], 3)]);
        for r in store.rules() {
            assert_eq!(r.rule.confidence(), Ratio::new(3, 4));
        }
        assert_eq!(store.word(3), Some("w"));
    }

    #[test]
    fn high_confidence_threshold_empties_store() {
        let store = generate_rules(&example_table(), &params(3, (4, 5)), &vocab(), 3, "t").unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn singletons_only_give_no_rules() {
        let mut t = FrequentItemsetTable::new(4);
        t.insert(vec![0], 4);
        t.insert(vec![3], 4);
        assert!(generate_rules(&t, &params(1, (1, 2)), &vocab(), 3, "t").unwrap().is_empty());
    }

    #[test]
    fn strict_thresholds_exclude_equality() {
        let mut p = params(3, (3, 4));
        assert_eq!(generate_rules(&example_table(), &p, &vocab(), 3, "t").unwrap().len(), 2);
        p.strict = true;
        assert!(generate_rules(&example_table(), &p, &vocab(), 3, "t").unwrap().is_empty());
    }

    #[test]
    fn missing_antecedent_is_closure_violation() {
        let mut t = FrequentItemsetTable::new(4);
        t.insert(vec![1, 3], 3);
        assert!(matches!(
            generate_rules(&t, &params(1, (1, 2)), &vocab(), 3, "t"),
            Err(Error::ClosureViolation(ref a)) if a == &vec![1]
        ));
    }

    #[test]
    fn disjoint_merge() {
        let a = RuleStore::from_rules(4, 8, vec![rule(&[0], 4, 3, 4, "a"), rule(&[1], 5, 2, 2, "a")]).unwrap();
        let b = RuleStore::from_rules(
            4,
            8,
            vec![rule(&[2], 4, 3, 4, "b"), rule(&[0, 1], 6, 2, 3, "b"), rule(&[3], 7, 1, 1, "b")],
        )
        .unwrap();
        assert_eq!(merge_stores(&a, &b).unwrap().len(), 5);
    }

    #[test]
    fn collision_keeps_higher_confidence() {
        let a = RuleStore::from_rules(4, 8, vec![rule(&[0], 4, 3, 4, "a")]).unwrap();
        let b = RuleStore::from_rules(4, 8, vec![rule(&[0], 4, 4, 5, "b")]).unwrap();
        for merged in [merge_stores(&a, &b).unwrap(), merge_stores(&b, &a).unwrap()] {
            let r = merged.get(&[0], 4).unwrap();
            assert_eq!(r.rule.confidence(), Ratio::new(4, 5));
            assert_eq!(r.provenance.len(), 2);
        }
    }

    #[test]
    fn equal_confidence_prefers_more_support() {
        let a = RuleStore::from_rules(4, 8, vec![rule(&[0], 4, 3, 6, "a")]).unwrap();
        let b = RuleStore::from_rules(4, 8, vec![rule(&[0], 4, 1, 2, "b")]).unwrap();
        let r = merge_stores(&b, &a).unwrap().get(&[0], 4).unwrap().rule.clone();
        assert_eq!((r.support_count, r.antecedent_support), (3, 6));
    }

    #[test]
    fn empty_store_is_identity() {
        let a = RuleStore::from_rules(4, 8, vec![rule(&[0], 4, 3, 4, "a")]).unwrap();
        let empty = RuleStore::empty(4, 8);
        assert_eq!(merge_stores(&a, &empty).unwrap(), a);
        assert_eq!(merge_stores(&empty, &a).unwrap(), a);
    }

    #[test]
    fn merge_rejects_mismatches() {
        let a = RuleStore::from_rules(4, 8, vec![rule(&[0], 4, 3, 4, "a")]).unwrap();
        assert!(matches!(
            merge_stores(&a, &RuleStore::empty(5, 8)),
            Err(Error::IncompatibleStore(_))
        ));
        assert!(matches!(
            merge_stores(&a, &RuleStore::empty(4, 9)),
            Err(Error::RemapRequired(_))
        ));
        let (mut renamed, _) = rule(&[1], 4, 1, 1, "b");
        renamed.rule.antecedent = vec![1];
        let b = RuleStore::from_rules(4, 8, vec![(renamed, "other".to_string())]).unwrap();
        assert!(matches!(merge_stores(&a, &b), Err(Error::RemapRequired(_))));
    }

    #[test]
    fn store_rejects_invalid_rules() {
        assert!(RuleStore::from_rules(4, 8, vec![rule(&[0], 3, 1, 1, "x")]).is_err());
        assert!(RuleStore::from_rules(4, 8, vec![rule(&[4], 5, 1, 1, "x")]).is_err());
        assert!(RuleStore::from_rules(4, 8, vec![rule(&[0], 5, 2, 1, "x")]).is_err());
        assert!(RuleStore::from_rules(4, 8, vec![rule(&[0], 12, 1, 1, "x")]).is_err());
    }

    #[test]
    fn lookup_by_first_item() {
        let s = RuleStore::from_rules(
            4,
            8,
            vec![rule(&[0], 4, 1, 1, "a"), rule(&[0, 2], 5, 1, 1, "a"), rule(&[1], 4, 1, 1, "a")],
        )
        .unwrap();
        assert_eq!(s.starting_with(0).count(), 2);
        assert_eq!(s.starting_with(3).count(), 0);
        assert!(s.get(&[0, 2], 5).is_some());
        assert!(s.get(&[0, 2], 4).is_none());
    }
}
