//! Behavior code registry.
//!
//! Verbal and facial codes share one namespace. The position of a code in the
//! registry fixes its rank in the item order used by the pattern miner, so the
//! built-ins always come first and in a stable order.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Verbal,
    Facial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorCode {
    pub id: String,
    pub channel: Channel,
    pub display_name: String,
    /// Short label used in pattern tables (`J`, `IV`, `Joy`, ...).
    pub abbrev: String,
}

impl BehaviorCode {
    fn new(id: &str, channel: Channel, display_name: &str, abbrev: &str) -> Self {
        BehaviorCode {
            id: id.to_owned(),
            channel,
            display_name: display_name.to_owned(),
            abbrev: abbrev.to_owned(),
        }
    }
}

/// Index of a code inside a [`CodeRegistry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CodeId(pub u16);

impl fmt::Display for CodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

const BUILTINS: [(&str, Channel, &str, &str); 19] = [
    ("uncertainty", Channel::Verbal, "Uncertainty", "U"),
    ("argument", Channel::Verbal, "Argument", "A"),
    ("justification", Channel::Verbal, "Justification", "J"),
    ("suggestion", Channel::Verbal, "Suggestion", "S"),
    (
        "question_task",
        Channel::Verbal,
        "Question Asking Task",
        "QAT",
    ),
    (
        "question_social",
        Channel::Verbal,
        "Question Asking Social",
        "QAS",
    ),
    (
        "idea_verbalization",
        Channel::Verbal,
        "Idea Verbalization",
        "IV",
    ),
    (
        "sharing_findings",
        Channel::Verbal,
        "Sharing Findings",
        "SF",
    ),
    (
        "hypothesis_generation",
        Channel::Verbal,
        "Hypothesis Generation",
        "HG",
    ),
    (
        "sentiment_positive",
        Channel::Verbal,
        "Positive Task Sentiment",
        "PTS",
    ),
    (
        "sentiment_negative",
        Channel::Verbal,
        "Negative Task Sentiment",
        "NTS",
    ),
    (
        "evaluation_positive",
        Channel::Verbal,
        "Positive Evaluation",
        "PE",
    ),
    (
        "evaluation_negative",
        Channel::Verbal,
        "Negative Evaluation",
        "NE",
    ),
    ("agreement", Channel::Verbal, "Agreement", "AG"),
    ("joy", Channel::Facial, "Joy", "Joy"),
    ("delight", Channel::Facial, "Delight", "Delight"),
    ("surprise", Channel::Facial, "Surprise", "Surprise"),
    ("confusion", Channel::Facial, "Confusion", "Confusion"),
    ("flow", Channel::Facial, "Flow", "Flow"),
];

/// Number of codes every registry starts with.
pub const BUILTIN_COUNT: usize = BUILTINS.len();

/// User-declared code added on top of the built-ins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExtraCode {
    Id(String),
    Full {
        id: String,
        #[serde(default = "default_channel")]
        channel: Channel,
        display_name: Option<String>,
        abbrev: Option<String>,
    },
}

fn default_channel() -> Channel {
    Channel::Verbal
}

impl ExtraCode {
    fn into_code(self) -> BehaviorCode {
        match self {
            ExtraCode::Id(id) => BehaviorCode::new(&id, Channel::Verbal, &id, &id),
            ExtraCode::Full {
                id,
                channel,
                display_name,
                abbrev,
            } => BehaviorCode {
                display_name: display_name.unwrap_or_else(|| id.clone()),
                abbrev: abbrev.unwrap_or_else(|| id.clone()),
                channel,
                id,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<BehaviorCode>", into = "Vec<BehaviorCode>")]
pub struct CodeRegistry {
    codes: Vec<BehaviorCode>,
    by_id: HashMap<String, CodeId>,
}

impl Default for CodeRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl From<Vec<BehaviorCode>> for CodeRegistry {
    fn from(codes: Vec<BehaviorCode>) -> Self {
        let mut reg = CodeRegistry::builtin();
        for code in codes {
            // Built-ins cannot be shadowed; anything else is appended in order.
            let _ = reg.register(code);
        }
        reg
    }
}

impl From<CodeRegistry> for Vec<BehaviorCode> {
    fn from(reg: CodeRegistry) -> Self {
        reg.codes
    }
}

impl CodeRegistry {
    pub fn builtin() -> Self {
        let codes: Vec<BehaviorCode> = BUILTINS
            .iter()
            .map(|&(id, ch, name, ab)| BehaviorCode::new(id, ch, name, ab))
            .collect();
        let by_id = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), CodeId(i as u16)))
            .collect();
        CodeRegistry { codes, by_id }
    }

    /// Builds the registry from the built-ins plus `extras`, in order.
    pub fn with_extras(extras: &[ExtraCode]) -> Result<Self> {
        let mut reg = Self::builtin();
        for extra in extras {
            reg.register(extra.clone().into_code())?;
        }
        Ok(reg)
    }

    /// Appends a code. Re-registering an identical id is a no-op; ids may not
    /// be empty.
    pub fn register(&mut self, code: BehaviorCode) -> Result<CodeId> {
        if let Some(&id) = self.by_id.get(&code.id) {
            return Ok(id);
        }
        if code.id.is_empty() || code.id.contains(',') {
            return Err(Error::UnknownBehaviorCode(code.id));
        }
        let id = CodeId(self.codes.len() as u16);
        self.by_id.insert(code.id.clone(), id);
        self.codes.push(code);
        Ok(id)
    }

    pub fn register_id(&mut self, id: &str) -> Result<CodeId> {
        self.register(BehaviorCode::new(id, Channel::Verbal, id, id))
    }

    pub fn lookup(&self, id: &str) -> Option<CodeId> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: CodeId) -> &BehaviorCode {
        &self.codes[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CodeId, &BehaviorCode)> {
        self.codes
            .iter()
            .enumerate()
            .map(|(i, c)| (CodeId(i as u16), c))
    }

    /// Rank of a code id string; unknown ids sort after every registered code.
    pub fn rank(&self, id: &str) -> usize {
        self.lookup(id).map_or(usize::MAX, |c| c.0 as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_registry_has_fourteen_verbal_and_five_facial() {
        let reg = CodeRegistry::builtin();
        assert_eq!(reg.len(), 19);
        let verbal = reg
            .iter()
            .filter(|(_, c)| c.channel == Channel::Verbal)
            .count();
        let facial = reg
            .iter()
            .filter(|(_, c)| c.channel == Channel::Facial)
            .count();
        assert_eq!((verbal, facial), (14, 5));
        for id in ["joy", "delight", "surprise", "confusion", "flow"] {
            assert_eq!(reg.get(reg.lookup(id).unwrap()).channel, Channel::Facial);
        }
    }

    #[test]
    fn ids_are_unique() {
        let reg = CodeRegistry::builtin();
        let mut ids: Vec<_> = reg.iter().map(|(_, c)| c.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), reg.len());
    }

    #[test]
    fn extras_extend_without_shrinking() {
        let extras = vec![
            ExtraCode::Id("laughter".into()),
            ExtraCode::Id("joy".into()),
            ExtraCode::Full {
                id: "gaze".into(),
                channel: Channel::Facial,
                display_name: Some("Mutual Gaze".into()),
                abbrev: Some("MG".into()),
            },
        ];
        let reg = CodeRegistry::with_extras(&extras).unwrap();
        assert_eq!(reg.len(), 21);
        assert_eq!(reg.lookup("laughter"), Some(CodeId(19)));
        assert_eq!(reg.get(CodeId(20)).abbrev, "MG");
        assert_eq!(reg.get(reg.lookup("joy").unwrap()).channel, Channel::Facial);
    }

    #[test]
    fn serde_round_trip_keeps_order() {
        let mut reg = CodeRegistry::builtin();
        reg.register_id("zeta").unwrap();
        reg.register_id("alpha").unwrap();
        let json = serde_json::to_string(&reg).unwrap();
        let back: CodeRegistry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, reg);
        assert_eq!(back.lookup("alpha"), Some(CodeId(20)));
    }
}
