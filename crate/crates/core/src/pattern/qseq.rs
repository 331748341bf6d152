use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codes::CodeId;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Itemsets per input sequence: six 10-second slices, one minute.
pub const WINDOW_LEN: usize = 6;

/// Actor of a behavior relative to the window's target member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Own,
    Other,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Own => "own",
            Role::Other => "other",
        })
    }
}

/// Miner alphabet symbol. Ordered by registry index, then role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Item {
    pub behavior: CodeId,
    pub role: Role,
}

impl Item {
    pub fn new(behavior: CodeId, role: Role) -> Self {
        Item { behavior, role }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QItem {
    pub item: Item,
    pub utility: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QItemset {
    pub slice_index: usize,
    /// Sorted by item, no duplicates.
    pub items: Vec<QItem>,
}

impl QItemset {
    /// Collapses repeated items, keeping the largest utility.
    pub fn new(slice_index: usize, items: impl IntoIterator<Item = QItem>) -> Self {
        let mut items: Vec<QItem> = items.into_iter().collect();
        items.sort_by(|a, b| a.item.cmp(&b.item).then(b.utility.cmp(&a.utility)));
        items.dedup_by_key(|q| q.item);
        QItemset { slice_index, items }
    }

    pub fn utility_of(&self, item: Item) -> Option<u32> {
        self.items
            .binary_search_by(|q| q.item.cmp(&item))
            .ok()
            .map(|i| self.items[i].utility)
    }

    pub fn total_utility(&self) -> u64 {
        self.items.iter().map(|q| q.utility as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QSequence {
    pub group_id: String,
    pub target_member: String,
    pub window_start: usize,
    pub itemsets: Vec<QItemset>,
}

impl QSequence {
    pub fn new(
        group_id: &str,
        target_member: &str,
        window_start: usize,
        itemsets: Vec<QItemset>,
    ) -> Result<Self> {
        if itemsets.len() != WINDOW_LEN {
            return Err(Error::InsufficientData(format!(
                "q-sequence needs {WINDOW_LEN} itemsets, got {}",
                itemsets.len()
            )));
        }
        Ok(QSequence {
            group_id: group_id.to_owned(),
            target_member: target_member.to_owned(),
            window_start,
            itemsets,
        })
    }

    pub fn total_utility(&self) -> u64 {
        self.itemsets.iter().map(QItemset::total_utility).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Windowing {
    #[default]
    Tumbling,
    Sliding(usize),
}

impl FromStr for Windowing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tumbling" => Ok(Windowing::Tumbling),
            _ => s
                .strip_prefix("sliding:")
                .and_then(|n| n.parse().ok())
                .filter(|&n| n > 0)
                .map(Windowing::Sliding)
                .ok_or_else(|| Error::UnsupportedFormat(s.to_owned())),
        }
    }
}

impl fmt::Display for Windowing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Windowing::Tumbling => f.write_str("tumbling"),
            Windowing::Sliding(n) => write!(f, "sliding:{n}"),
        }
    }
}

impl Windowing {
    pub fn starts(self, slices: usize) -> Vec<usize> {
        let stride = match self {
            Windowing::Tumbling => WINDOW_LEN,
            Windowing::Sliding(s) => s,
        };
        if slices < WINDOW_LEN {
            return Vec::new();
        }
        (0..=slices - WINDOW_LEN).step_by(stride).collect()
    }
}

/// Whose curiosity is attached to an item as its utility.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilitySource {
    /// The window's target member.
    #[default]
    Target,
    /// The member who performed the behavior.
    Actor,
}

impl FromStr for UtilitySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(UtilitySource::Target),
            "actor" => Ok(UtilitySource::Actor),
            _ => Err(Error::UnsupportedFormat(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOptions {
    pub windowing: Windowing,
    pub utility_source: UtilitySource,
}

/// Cuts one target member's view of a group into one-minute q-sequences.
///
/// Every behavior of every member in a slice becomes an item tagged with its
/// role relative to `target`. Missing gold ratings count as 0.
pub fn build_windows(
    corpus: &Corpus,
    group_id: &str,
    target: &str,
    options: WindowOptions,
) -> Result<Vec<QSequence>> {
    let group = corpus.group(group_id)?;
    let target_idx = group
        .member_index(target)
        .ok_or_else(|| Error::UnknownMember {
            group: group_id.to_owned(),
            member: target.to_owned(),
        })?;

    let mut missing = 0usize;
    let mut curiosity = |member: usize, slice: usize| -> u32 {
        match group.annotation(member, slice).curiosity {
            Some(c) => c as u32,
            None => {
                missing += 1;
                0
            }
        }
    };

    let starts = options.windowing.starts(group.slices);
    let mut windows = Vec::with_capacity(starts.len());
    for start in starts {
        let mut itemsets = Vec::with_capacity(WINDOW_LEN);
        for slice in start..start + WINDOW_LEN {
            let target_curiosity = curiosity(target_idx, slice);
            let mut items = Vec::new();
            for m in 0..group.members.len() {
                let ann = group.annotation(m, slice);
                if ann.behaviors.is_empty() {
                    continue;
                }
                let role = if m == target_idx {
                    Role::Own
                } else {
                    Role::Other
                };
                let utility = match options.utility_source {
                    UtilitySource::Target => target_curiosity,
                    UtilitySource::Actor => curiosity(m, slice),
                };
                for code in ann.behaviors.keys() {
                    let behavior = corpus
                        .registry
                        .lookup(code)
                        .ok_or_else(|| Error::UnknownBehaviorCode(code.clone()))?;
                    items.push(QItem {
                        item: Item::new(behavior, role),
                        utility,
                    });
                }
            }
            itemsets.push(QItemset::new(slice, items));
        }
        windows.push(QSequence::new(group_id, target, start, itemsets)?);
    }
    if missing > 0 {
        log::warn!("{group_id}/{target}: {missing} slice(s) without gold curiosity treated as 0");
    }
    Ok(windows)
}
