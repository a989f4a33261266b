use std::collections::HashMap;

use crate::transactions::Item;

const NIL: u32 = u32::MAX;

#[derive(Debug)]
struct Node {
    item: Item,
    count: u64,
    parent: u32,
    children: Vec<u32>,
    /// Next node carrying the same item.
    next: u32,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HeaderEntry {
    pub item: Item,
    pub support: u64,
    head: u32,
}

/// Weighted item paths: the whole database at the top level, a conditional
/// pattern base below it.
pub(crate) type PatternBase = Vec<(Vec<Item>, u64)>;

/// Prefix tree over transactions whose items are ordered by descending
/// support, ties by ascending item id. Node 0 is the root.
#[derive(Debug)]
pub(crate) struct FpTree {
    nodes: Vec<Node>,
    header: Vec<HeaderEntry>,
}

impl FpTree {
    pub fn build<'a, I>(paths: I, min_support: u64) -> FpTree
    where
        I: IntoIterator<Item = (&'a [Item], u64)> + Clone,
    {
        let mut counts: HashMap<Item, u64> = HashMap::new();
        for (items, weight) in paths.clone() {
            for &item in items {
                *counts.entry(item).or_default() += weight;
            }
        }
        let mut header: Vec<HeaderEntry> = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_support)
            .map(|(item, support)| HeaderEntry {
                item,
                support,
                head: NIL,
            })
            .collect();
        header.sort_unstable_by(|a, b| b.support.cmp(&a.support).then(a.item.cmp(&b.item)));
        let rank: HashMap<Item, usize> = header
            .iter()
            .enumerate()
            .map(|(r, e)| (e.item, r))
            .collect();

        let mut tree = FpTree {
            nodes: vec![Node {
                item: 0,
                count: 0,
                parent: NIL,
                children: Vec::new(),
                next: NIL,
            }],
            header,
        };
        let mut ranked: Vec<usize> = Vec::new();
        for (items, weight) in paths {
            ranked.clear();
            ranked.extend(items.iter().filter_map(|i| rank.get(i).copied()));
            if ranked.is_empty() {
                continue;
            }
            ranked.sort_unstable();
            tree.insert(&ranked, weight);
        }
        tree
    }

    fn insert(&mut self, ranked: &[usize], weight: u64) {
        let mut cur = 0u32;
        for &r in ranked {
            let item = self.header[r].item;
            let found = self.nodes[cur as usize]
                .children
                .iter()
                .copied()
                .find(|&c| self.nodes[c as usize].item == item);
            cur = match found {
                Some(child) => {
                    self.nodes[child as usize].count += weight;
                    child
                }
                None => {
                    let id = self.nodes.len() as u32;
                    let entry = &mut self.header[r];
                    self.nodes.push(Node {
                        item,
                        count: weight,
                        parent: cur,
                        children: Vec::new(),
                        next: entry.head,
                    });
                    entry.head = id;
                    self.nodes[cur as usize].children.push(id);
                    id
                }
            };
        }
    }

    pub fn header(&self) -> &[HeaderEntry] {
        &self.header
    }

    /// Prefix paths (root side first) of every node holding `entry.item`,
    /// each weighted by that node's count.
    pub fn conditional_base(&self, entry: &HeaderEntry) -> PatternBase {
        let mut base = Vec::new();
        let mut node = entry.head;
        while node != NIL {
            let n = &self.nodes[node as usize];
            let mut path = Vec::new();
            let mut up = n.parent;
            while up != 0 {
                let p = &self.nodes[up as usize];
                path.push(p.item);
                up = p.parent;
            }
            if !path.is_empty() {
                path.reverse();
                base.push((path, n.count));
            }
            node = n.next;
        }
        base
    }

    #[cfg(test)]
    fn chain_total(&self, entry: &HeaderEntry) -> u64 {
        let mut total = 0;
        let mut node = entry.head;
        while node != NIL {
            total += self.nodes[node as usize].count;
            node = self.nodes[node as usize].next;
        }
        total
    }

    #[cfg(test)]
    fn paths_follow_header_order(&self) -> bool {
        let rank: HashMap<Item, usize> = self
            .header
            .iter()
            .enumerate()
            .map(|(r, e)| (e.item, r))
            .collect();
        self.nodes.iter().skip(1).all(|n| {
            n.parent == 0 || rank[&self.nodes[n.parent as usize].item] < rank[&n.item]
        })
    }
}
