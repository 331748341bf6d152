use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Per-slice encoding of behavior occurrences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// Clause-level occurrence counts.
    #[default]
    Count,
    /// 1 if the behavior occurred in the slice at all.
    Binary,
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(Encoding::Count),
            "binary" => Ok(Encoding::Binary),
            _ => Err(Error::UnsupportedFormat(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub member_id: String,
    pub behavior: String,
}

impl SeriesKey {
    pub fn new(member_id: &str, behavior: &str) -> Self {
        SeriesKey {
            member_id: member_id.to_owned(),
            behavior: behavior.to_owned(),
        }
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.member_id, self.behavior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSeries {
    pub group_id: String,
    pub key: SeriesKey,
    pub values: Vec<f64>,
    /// Constant series (all zero in particular) cannot enter a Granger test.
    pub degenerate: bool,
}

impl BehaviorSeries {
    pub fn new(group_id: &str, key: SeriesKey, values: Vec<f64>) -> Self {
        let degenerate = is_constant(&values);
        BehaviorSeries {
            group_id: group_id.to_owned(),
            key,
            values,
            degenerate,
        }
    }

    /// First differences, one value shorter.
    pub fn differenced(&self) -> Self {
        let values = self.values.windows(2).map(|w| w[1] - w[0]).collect();
        BehaviorSeries::new(&self.group_id, self.key.clone(), values)
    }
}

pub(crate) fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// One series per (member, registry code) of a group, members in order and
/// codes in registry order.
pub fn build_series(
    corpus: &Corpus,
    group_id: &str,
    encoding: Encoding,
) -> Result<Vec<BehaviorSeries>> {
    let group = corpus.group(group_id)?;
    let mut out = Vec::with_capacity(group.members.len() * corpus.registry.len());
    for (m, member) in group.members.iter().enumerate() {
        let anns = group.member_annotations(m);
        for (_, code) in corpus.registry.iter() {
            let values = anns
                .iter()
                .map(|a| {
                    let c = a.count(&code.id);
                    match encoding {
                        Encoding::Count => c as f64,
                        Encoding::Binary => c.min(1) as f64,
                    }
                })
                .collect();
            out.push(BehaviorSeries::new(
                group_id,
                SeriesKey::new(member, &code.id),
                values,
            ));
        }
    }
    Ok(out)
}
