//! Frequent-itemset mining.
//!
//! [`mine_frequent`] is FP-Growth: infrequent items are pruned, transactions
//! are reordered by descending item support and folded into a prefix tree,
//! and each header item's conditional pattern base is mined in turn. The
//! recursion runs on an explicit stack, and distinct top-level header items
//! are mined in parallel. [`mine_frequent_bruteforce`] enumerates candidate
//! itemsets directly and exists to cross-check the tree miner.

mod fptree;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_rational::Ratio;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::write_json_line;
use crate::transactions::{Item, TransactionDatabase};

use fptree::{FpTree, PatternBase};

/// Largest item universe [`mine_frequent_bruteforce`] will enumerate.
pub const BRUTEFORCE_ITEM_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequentItemset {
    pub items: Vec<Item>,
    pub support_count: u64,
}

/// Frequent itemsets keyed by their ascending item list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrequentItemsetTable {
    itemsets: HashMap<Vec<Item>, u64>,
    total_transactions: usize,
}

impl FrequentItemsetTable {
    pub fn new(total_transactions: usize) -> Self {
        FrequentItemsetTable {
            itemsets: HashMap::new(),
            total_transactions,
        }
    }

    pub fn insert(&mut self, mut items: Vec<Item>, support_count: u64) {
        items.sort_unstable();
        self.itemsets.insert(items, support_count);
    }

    pub fn support(&self, items: &[Item]) -> Option<u64> {
        self.itemsets.get(items).copied()
    }

    pub fn len(&self) -> usize {
        self.itemsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.itemsets.is_empty()
    }

    pub fn total_transactions(&self) -> usize {
        self.total_transactions
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[Item], u64)> {
        self.itemsets.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Itemsets ordered by size, then lexicographically.
    pub fn sorted(&self) -> Vec<FrequentItemset> {
        let mut out: Vec<FrequentItemset> = self
            .itemsets
            .iter()
            .map(|(items, &support_count)| FrequentItemset {
                items: items.clone(),
                support_count,
            })
            .collect();
        out.sort_unstable_by(|a, b| a.items.len().cmp(&b.items.len()).then_with(|| a.items.cmp(&b.items)));
        out
    }

    /// The sub-table a higher support floor would have produced.
    pub fn with_min_support(&self, support_floor: u64) -> FrequentItemsetTable {
        FrequentItemsetTable {
            itemsets: self
                .itemsets
                .iter()
                .filter(|&(_, &n)| n >= support_floor)
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
            total_transactions: self.total_transactions,
        }
    }

    /// First stored itemset with a missing or less frequent one-smaller subset.
    pub fn closure_violation(&self) -> Option<Vec<Item>> {
        for (items, &n) in &self.itemsets {
            if items.len() < 2 {
                continue;
            }
            for skip in 0..items.len() {
                let sub: Vec<Item> = items
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &x)| x)
                    .collect();
                match self.itemsets.get(&sub) {
                    Some(&m) if m >= n => {}
                    _ => return Some(sub),
                }
            }
        }
        None
    }
}

/// Number of transactions containing every item of `itemset`, and that count
/// as a fraction of the database size (zero for an empty database).
pub fn support(itemset: &[Item], db: &TransactionDatabase) -> (u64, Ratio<u64>) {
    let mut sorted = itemset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let count = db
        .transactions()
        .iter()
        .filter(|t| t.contains_all(&sorted))
        .count() as u64;
    let fraction = if db.is_empty() {
        Ratio::zero()
    } else {
        Ratio::new(count, db.len() as u64)
    };
    (count, fraction)
}

pub fn mine_frequent(db: &TransactionDatabase, supp_min: u64, max_len: Option<usize>) -> FrequentItemsetTable {
    let supp_min = supp_min.max(1);
    let mut table = FrequentItemsetTable::new(db.len());
    if max_len == Some(0) {
        return table;
    }
    let tree = FpTree::build(
        db.transactions().iter().map(|t| (t.items(), 1u64)),
        supp_min,
    );
    let found: Vec<Vec<(Vec<Item>, u64)>> = tree
        .header()
        .par_iter()
        .map(|entry| {
            let mut out = vec![(vec![entry.item], entry.support)];
            if max_len.is_none_or(|m| m > 1) {
                let base = tree.conditional_base(entry);
                mine_conditional(base, vec![entry.item], supp_min, max_len, &mut out);
            }
            out
        })
        .collect();
    for (items, n) in found.into_iter().flatten() {
        table.insert(items, n);
    }
    table
}

/// Depth-first growth of `suffix` over `base`, driven by a work stack.
fn mine_conditional(
    base: PatternBase,
    suffix: Vec<Item>,
    supp_min: u64,
    max_len: Option<usize>,
    out: &mut Vec<(Vec<Item>, u64)>,
) {
    let mut stack: Vec<(PatternBase, Vec<Item>)> = vec![(base, suffix)];
    while let Some((base, suffix)) = stack.pop() {
        if base.is_empty() {
            continue;
        }
        let tree = FpTree::build(base.iter().map(|(p, w)| (p.as_slice(), *w)), supp_min);
        for entry in tree.header() {
            let mut pattern = suffix.clone();
            pattern.push(entry.item);
            let grow = max_len.is_none_or(|m| pattern.len() < m);
            out.push((pattern.clone(), entry.support));
            if grow {
                let cond = tree.conditional_base(entry);
                if !cond.is_empty() {
                    stack.push((cond, pattern));
                }
            }
        }
    }
}

/// Reference miner: counts every itemset drawn from the observed items.
pub fn mine_frequent_bruteforce(
    db: &TransactionDatabase,
    supp_min: u64,
    max_len: Option<usize>,
) -> Result<FrequentItemsetTable> {
    let universe: Vec<Item> = db
        .transactions()
        .iter()
        .flat_map(|t| t.items().iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if universe.len() > BRUTEFORCE_ITEM_LIMIT {
        return Err(Error::UniverseTooLarge {
            distinct: universe.len(),
            limit: BRUTEFORCE_ITEM_LIMIT,
        });
    }
    let supp_min = supp_min.max(1);
    let cap = max_len.unwrap_or(universe.len()) as u32;
    let position: HashMap<Item, usize> = universe.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let masks: Vec<u32> = db
        .transactions()
        .iter()
        .map(|t| t.items().iter().fold(0u32, |m, x| m | 1 << position[x]))
        .collect();

    let mut table = FrequentItemsetTable::new(db.len());
    for candidate in 1u32..(1u32 << universe.len()) {
        if candidate.count_ones() > cap {
            continue;
        }
        let count = masks.iter().filter(|&&m| m & candidate == candidate).count() as u64;
        if count >= supp_min {
            let items = (0..universe.len())
                .filter(|&i| candidate & (1 << i) != 0)
                .map(|i| universe[i])
                .collect();
            table.insert(items, count);
        }
    }
    Ok(table)
}

/// Writes `{"items": [...], "support": n}` lines in [`FrequentItemsetTable::sorted`] order.
pub fn save_itemsets(table: &FrequentItemsetTable, path: impl AsRef<Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        items: &'a [Item],
        support: u64,
    }
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for set in table.sorted() {
        write_json_line(
            &mut out,
            &Line {
                items: &set.items,
                support: set.support_count,
            },
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
