//! High-utility sequential behavior patterns.
//!
//! Input sequences are one-minute windows of six slice itemsets seen from one
//! target member; each item's utility is a gold curiosity rating. A pattern's
//! utility in one window is its best occurrence, and its overall utility is
//! the sum over the windows it occurs in.

mod qseq;
mod uspan;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::CodeRegistry;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use qseq::{
    build_windows, Item, QItem, QItemset, QSequence, Role, UtilitySource, WindowOptions, Windowing,
    WINDOW_LEN,
};
pub use uspan::mine;

/// Reporting threshold on overall utility.
pub const DEFAULT_MIN_UTILITY: u64 = 35;
pub const DEFAULT_MAX_PATTERN_ITEMS: usize = 8;

/// Separator between consecutive itemsets in rendered patterns.
pub const SEQUENCE_ARROW: &str = "↠";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    /// Ordered element sets; items inside an element are sorted.
    pub elements: Vec<Vec<Item>>,
    pub overall_utility: u64,
    pub support: usize,
    /// Indices into the window list the pattern was mined from.
    pub matched_sequences: Vec<usize>,
}

impl Pattern {
    pub fn item_count(&self) -> usize {
        self.elements.iter().map(Vec::len).sum()
    }

    /// Table notation, e.g. `J(own), IV(own) ↠ J(other) [92]`.
    pub fn render(&self, registry: &CodeRegistry) -> String {
        format!(
            "{} [{}]",
            render_elements(&self.elements, registry),
            self.overall_utility
        )
    }
}

pub fn render_elements(elements: &[Vec<Item>], registry: &CodeRegistry) -> String {
    elements
        .iter()
        .map(|e| {
            e.iter()
                .map(|i| format!("{}({})", registry.get(i.behavior).abbrev, i.role))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect::<Vec<_>>()
        .join(&format!(" {SEQUENCE_ARROW} "))
}

/// Best utility of `elements` in `seq` over all order-preserving embeddings
/// into distinct itemsets, or 0 when it does not occur.
pub fn pattern_utility_in_sequence(elements: &[Vec<Item>], seq: &QSequence) -> u64 {
    if elements.is_empty() || elements.iter().any(Vec::is_empty) {
        return 0;
    }
    let n = seq.itemsets.len();
    // best[pos] = best utility of the elements so far with the latest one at pos.
    let mut best: Vec<Option<u64>> = vec![Some(0); n];
    for (e_idx, element) in elements.iter().enumerate() {
        let mut next = vec![None; n];
        let mut carry: Option<u64> = None;
        for pos in 0..n {
            let prior = if e_idx == 0 { Some(0) } else { carry };
            if let Some(p) = prior {
                let set = &seq.itemsets[pos];
                let matched: Option<u64> = element
                    .iter()
                    .map(|&i| set.utility_of(i).map(|u| u as u64))
                    .sum();
                next[pos] = matched.map(|m| p + m);
            }
            if e_idx > 0 {
                if let Some(b) = best[pos] {
                    carry = Some(carry.map_or(b, |c| c.max(b)));
                }
            }
        }
        best = next;
    }
    best.into_iter().flatten().max().unwrap_or(0)
}

/// Mining settings shared by every target pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MineConfig {
    pub min_utility: u64,
    pub max_pattern_items: usize,
    pub windows: WindowOptions,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            min_utility: DEFAULT_MIN_UTILITY,
            max_pattern_items: DEFAULT_MAX_PATTERN_ITEMS,
            windows: WindowOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TargetKey {
    pub group_id: String,
    pub member_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetPatterns {
    pub windows: Vec<QSequence>,
    pub patterns: Vec<Pattern>,
}

/// One mining pass per member of every group, each with that member's
/// curiosity as the objective.
pub fn mine_all_targets(
    corpus: &Corpus,
    config: &MineConfig,
) -> Result<BTreeMap<TargetKey, TargetPatterns>> {
    if config.max_pattern_items == 0 {
        return Err(Error::InvalidConfig("max_pattern_items must be ≥ 1".into()));
    }
    let targets: Vec<TargetKey> = corpus
        .groups
        .iter()
        .flat_map(|(gid, g)| {
            g.members.iter().map(move |m| TargetKey {
                group_id: gid.clone(),
                member_id: m.clone(),
            })
        })
        .collect();
    targets
        .into_par_iter()
        .map(|key| {
            let windows = build_windows(corpus, &key.group_id, &key.member_id, config.windows)?;
            let patterns = mine(&windows, config.min_utility, config.max_pattern_items);
            Ok((key, TargetPatterns { windows, patterns }))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternItemRecord {
    pub behavior: String,
    pub role: Role,
}

/// Serializable, registry-resolved form of a mined pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub group_id: String,
    pub target_member: String,
    pub elements: Vec<Vec<PatternItemRecord>>,
    pub overall_utility: u64,
    pub support: usize,
    /// Start slice of each window the pattern occurs in.
    pub window_starts: Vec<usize>,
    pub notation: String,
}

impl PatternRecord {
    pub fn new(
        key: &TargetKey,
        pattern: &Pattern,
        windows: &[QSequence],
        registry: &CodeRegistry,
    ) -> Self {
        PatternRecord {
            group_id: key.group_id.clone(),
            target_member: key.member_id.clone(),
            elements: pattern
                .elements
                .iter()
                .map(|e| {
                    e.iter()
                        .map(|i| PatternItemRecord {
                            behavior: registry.get(i.behavior).id.clone(),
                            role: i.role,
                        })
                        .collect()
                })
                .collect(),
            overall_utility: pattern.overall_utility,
            support: pattern.support,
            window_starts: pattern
                .matched_sequences
                .iter()
                .map(|&s| windows[s].window_start)
                .collect(),
            notation: pattern.render(registry),
        }
    }

    /// Resolves the record back to registry items.
    pub fn items(&self, registry: &CodeRegistry) -> Result<Vec<Vec<Item>>> {
        self.elements
            .iter()
            .map(|e| {
                e.iter()
                    .map(|r| {
                        registry
                            .lookup(&r.behavior)
                            .map(|b| Item::new(b, r.role))
                            .ok_or_else(|| Error::UnknownBehaviorCode(r.behavior.clone()))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Flattens per-target mining results into records, targets in key order.
pub fn pattern_records(
    results: &BTreeMap<TargetKey, TargetPatterns>,
    registry: &CodeRegistry,
) -> Vec<PatternRecord> {
    results
        .iter()
        .flat_map(|(key, tp)| {
            tp.patterns
                .iter()
                .map(move |p| PatternRecord::new(key, p, &tp.windows, registry))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::CodeId;

    fn item(b: u16) -> Item {
        Item::new(CodeId(b), Role::Own)
    }

    fn seq(sets: &[&[(u16, u32)]]) -> QSequence {
        let mut itemsets: Vec<QItemset> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                QItemset::new(
                    i,
                    s.iter().map(|&(b, u)| QItem {
                        item: item(b),
                        utility: u,
                    }),
                )
            })
            .collect();
        while itemsets.len() < WINDOW_LEN {
            itemsets.push(QItemset::new(itemsets.len(), []));
        }
        QSequence::new("g", "t", 0, itemsets).unwrap()
    }

    const A: u16 = 0;
    const B: u16 = 1;

    #[test]
    fn utility_of_simple_sequence() {
        let s = seq(&[&[(A, 2)], &[(B, 1)]]);
        assert_eq!(
            pattern_utility_in_sequence(&[vec![item(A)], vec![item(B)]], &s),
            3
        );
    }

    #[test]
    fn utility_takes_best_embedding() {
        let s = seq(&[&[(A, 1)], &[(A, 2)], &[(A, 0)]]);
        assert_eq!(
            pattern_utility_in_sequence(&[vec![item(A)], vec![item(A)]], &s),
            3
        );
    }

    #[test]
    fn absent_pattern_has_zero_utility() {
        let s = seq(&[&[(A, 1)]]);
        assert_eq!(pattern_utility_in_sequence(&[vec![item(B)]], &s), 0);
        assert_eq!(
            pattern_utility_in_sequence(&[vec![item(A)], vec![item(A)]], &s),
            0
        );
        assert_eq!(
            pattern_utility_in_sequence(&[vec![item(A), item(B)]], &s),
            0
        );
    }

    #[test]
    fn mine_two_sequence_fixture() {
        let s1 = seq(&[&[(A, 2)], &[(B, 1)]]);
        let s2 = seq(&[&[(A, 1)], &[(B, 3)]]);
        let out = mine(&[s1, s2], 7, 8);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].elements, vec![vec![item(A)], vec![item(B)]]);
        assert_eq!(out[0].overall_utility, 7);
        assert_eq!(out[0].support, 2);
    }

    #[test]
    fn mine_empty_windows_yields_nothing() {
        let empty = seq(&[]);
        assert!(mine(&[empty.clone(), empty], 0, 8).is_empty());
        assert!(mine(&[], 0, 8).is_empty());
    }

    #[test]
    fn extension_can_beat_its_prefix() {
        // ⟨{a}⟩ occurs with low utility, ⟨{a},{b}⟩ picks up the large b.
        let s = seq(&[&[(A, 1)], &[(B, 9)]]);
        let out = mine(&[s], 0, 8);
        let u = |els: Vec<Vec<Item>>| {
            out.iter()
                .find(|p| p.elements == els)
                .unwrap()
                .overall_utility
        };
        assert!(u(vec![vec![item(A)], vec![item(B)]]) > u(vec![vec![item(A)]]));
    }

    #[test]
    fn render_matches_table_notation() {
        let reg = CodeRegistry::builtin();
        let joy = Item::new(reg.lookup("joy").unwrap(), Role::Own);
        let p = Pattern {
            elements: vec![vec![joy], vec![joy]],
            overall_utility: 80,
            support: 3,
            matched_sequences: vec![0, 1, 2],
        };
        assert_eq!(p.render(&reg), "Joy(own) ↠ Joy(own) [80]");

        let j = reg.lookup("justification").unwrap();
        let iv = reg.lookup("idea_verbalization").unwrap();
        let p = Pattern {
            elements: vec![
                vec![Item::new(j, Role::Own), Item::new(iv, Role::Own)],
                vec![Item::new(j, Role::Own)],
                vec![Item::new(j, Role::Other)],
            ],
            overall_utility: 92,
            support: 1,
            matched_sequences: vec![0],
        };
        assert_eq!(p.render(&reg), "J(own), IV(own) ↠ J(own) ↠ J(other) [92]");
    }

    #[test]
    fn max_items_bounds_pattern_size() {
        let s = seq(&[&[(A, 1), (B, 1)], &[(A, 1), (B, 1)], &[(A, 1)]]);
        let out = mine(&[s], 0, 2);
        assert!(out.iter().all(|p| p.item_count() <= 2));
        assert!(out.iter().any(|p| p.item_count() == 2));
    }
}
