//! High-utility sequential pattern search over a lexicographic q-sequence
//! tree.
//!
//! Each tree node is a pattern; its children are the I-concatenations (one
//! more item in the last element, larger than every item already there) and
//! the S-concatenations (a new singleton element). For every input sequence a
//! node keeps a utility chain: the itemset positions where the pattern's last
//! element can end, each with the best utility of an occurrence ending there.
//! Children are derived from the parent's chains without rescanning.
//!
//! A child subtree is entered only while its sequence-weighted utilization
//! (the summed full utility of the sequences containing it) reaches the
//! threshold. SWU never grows along an extension, so this cut is safe.

use rayon::prelude::*;

use super::qseq::{Item, QSequence};
use super::Pattern;

/// Per-sequence data flattened for the search.
struct Prepared {
    /// itemsets[pos] = sorted (item, utility).
    itemsets: Vec<Vec<(Item, u32)>>,
    total: u64,
}

impl Prepared {
    fn utility(&self, pos: usize, item: Item) -> Option<u32> {
        let set = &self.itemsets[pos];
        set.binary_search_by(|(i, _)| i.cmp(&item))
            .ok()
            .map(|k| set[k].1)
    }
}

#[derive(Clone)]
struct Projection {
    seq: usize,
    /// (end position, best utility ending there), positions ascending.
    chain: Vec<(usize, u64)>,
}

struct Node {
    elements: Vec<Vec<Item>>,
    items: usize,
    projections: Vec<Projection>,
}

struct Search<'a> {
    seqs: &'a [Prepared],
    min_utility: u64,
    max_items: usize,
}

impl Search<'_> {
    fn swu(&self, projections: &[Projection]) -> u64 {
        projections.iter().map(|p| self.seqs[p.seq].total).sum()
    }

    fn utility(projections: &[Projection]) -> u64 {
        projections
            .iter()
            .map(|p| p.chain.iter().map(|&(_, u)| u).max().unwrap_or(0))
            .sum()
    }

    fn emit(&self, node: &Node, out: &mut Vec<Pattern>) {
        let utility = Self::utility(&node.projections);
        if utility >= self.min_utility {
            out.push(Pattern {
                elements: node.elements.clone(),
                overall_utility: utility,
                support: node.projections.len(),
                matched_sequences: node.projections.iter().map(|p| p.seq).collect(),
            });
        }
    }

    /// Root children: every item as a one-item pattern.
    fn roots(&self) -> Vec<Node> {
        let mut items: Vec<Item> = self
            .seqs
            .iter()
            .flat_map(|s| s.itemsets.iter().flatten().map(|&(i, _)| i))
            .collect();
        items.sort();
        items.dedup();
        items
            .into_iter()
            .filter_map(|item| {
                let projections: Vec<Projection> = self
                    .seqs
                    .iter()
                    .enumerate()
                    .filter_map(|(seq, s)| {
                        let chain: Vec<(usize, u64)> = (0..s.itemsets.len())
                            .filter_map(|pos| s.utility(pos, item).map(|u| (pos, u as u64)))
                            .collect();
                        (!chain.is_empty()).then_some(Projection { seq, chain })
                    })
                    .collect();
                (self.swu(&projections) >= self.min_utility).then(|| Node {
                    elements: vec![vec![item]],
                    items: 1,
                    projections,
                })
            })
            .collect()
    }

    fn i_extend(&self, node: &Node, item: Item) -> Vec<Projection> {
        node.projections
            .iter()
            .filter_map(|p| {
                let s = &self.seqs[p.seq];
                let chain: Vec<(usize, u64)> = p
                    .chain
                    .iter()
                    .filter_map(|&(pos, u)| s.utility(pos, item).map(|iu| (pos, u + iu as u64)))
                    .collect();
                (!chain.is_empty()).then_some(Projection { seq: p.seq, chain })
            })
            .collect()
    }

    fn s_extend(&self, node: &Node, item: Item) -> Vec<Projection> {
        node.projections
            .iter()
            .filter_map(|p| {
                let s = &self.seqs[p.seq];
                let mut chain = Vec::new();
                let mut best_before: Option<u64> = None;
                let mut k = 0;
                for pos in 0..s.itemsets.len() {
                    if let Some(b) = best_before {
                        if let Some(iu) = s.utility(pos, item) {
                            chain.push((pos, b + iu as u64));
                        }
                    }
                    // Fold in prefix occurrences ending at `pos` for later positions.
                    while k < p.chain.len() && p.chain[k].0 == pos {
                        best_before =
                            Some(best_before.map_or(p.chain[k].1, |b| b.max(p.chain[k].1)));
                        k += 1;
                    }
                }
                (!chain.is_empty()).then_some(Projection { seq: p.seq, chain })
            })
            .collect()
    }

    fn candidates(&self, node: &Node) -> (Vec<Item>, Vec<Item>) {
        let last = *node
            .elements
            .last()
            .and_then(|e| e.last())
            .expect("non-empty pattern");
        let mut i_items = Vec::new();
        let mut s_items = Vec::new();
        for p in &node.projections {
            let s = &self.seqs[p.seq];
            for &(pos, _) in &p.chain {
                i_items.extend(
                    s.itemsets[pos]
                        .iter()
                        .map(|&(i, _)| i)
                        .filter(|&i| i > last),
                );
            }
            let first = p.chain[0].0;
            for set in &s.itemsets[first + 1..] {
                s_items.extend(set.iter().map(|&(i, _)| i));
            }
        }
        i_items.sort();
        i_items.dedup();
        s_items.sort();
        s_items.dedup();
        (i_items, s_items)
    }

    fn grow(&self, node: Node, out: &mut Vec<Pattern>) {
        self.emit(&node, out);
        if node.items >= self.max_items {
            return;
        }
        let (i_items, s_items) = self.candidates(&node);
        for item in i_items {
            let projections = self.i_extend(&node, item);
            if projections.is_empty() || self.swu(&projections) < self.min_utility {
                continue;
            }
            let mut elements = node.elements.clone();
            elements.last_mut().unwrap().push(item);
            self.grow(
                Node {
                    elements,
                    items: node.items + 1,
                    projections,
                },
                out,
            );
        }
        for item in s_items {
            let projections = self.s_extend(&node, item);
            if projections.is_empty() || self.swu(&projections) < self.min_utility {
                continue;
            }
            let mut elements = node.elements.clone();
            elements.push(vec![item]);
            self.grow(
                Node {
                    elements,
                    items: node.items + 1,
                    projections,
                },
                out,
            );
        }
    }
}

/// All patterns (occurring at least once, at most `max_pattern_items` items)
/// whose overall utility reaches `min_utility`, sorted by utility descending
/// and then lexicographically.
pub fn mine(windows: &[QSequence], min_utility: u64, max_pattern_items: usize) -> Vec<Pattern> {
    if max_pattern_items == 0 {
        return Vec::new();
    }
    let seqs: Vec<Prepared> = windows
        .iter()
        .map(|w| Prepared {
            itemsets: w
                .itemsets
                .iter()
                .map(|set| set.items.iter().map(|q| (q.item, q.utility)).collect())
                .collect(),
            total: w.total_utility(),
        })
        .collect();
    let search = Search {
        seqs: &seqs,
        min_utility,
        max_items: max_pattern_items,
    };

    let mut patterns: Vec<Pattern> = search
        .roots()
        .into_par_iter()
        .flat_map_iter(|root| {
            let mut out = Vec::new();
            search.grow(root, &mut out);
            out
        })
        .collect();
    sort_patterns(&mut patterns);
    patterns
}

pub(crate) fn sort_patterns(patterns: &mut [Pattern]) {
    patterns.sort_by(|a, b| {
        b.overall_utility
            .cmp(&a.overall_utility)
            .then_with(|| a.elements.cmp(&b.elements))
    });
}
