use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("unknown behavior code `{0}`")]
    UnknownBehaviorCode(String),

    #[error("inconsistent members in group `{group}`: {reason}")]
    InconsistentMembers { group: String, reason: String },

    #[error("no slice ({group}, {member}, {slice}) in corpus")]
    UnknownKey {
        group: String,
        member: String,
        slice: usize,
    },

    #[error("rating {0} is outside {{0, 1, 2}}")]
    RatingOutOfRange(i64),

    #[error("unknown member `{member}` in group `{group}`")]
    UnknownMember { group: String, member: String },

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("empty input")]
    EmptyInput,

    #[error("HIT `{hit}` has {available} rater(s) with complete ratings; at least 2 required")]
    InsufficientRaters { hit: String, available: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("perfect fit (residual sum of squares is zero, k = {k}, n = {n_used})")]
    PerfectFit { k: usize, n_used: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),

    #[error("unsupported format `{0}`")]
    UnsupportedFormat(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerically degenerate inputs rather than
    /// malformed data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PerfectFit { .. } | Error::DegenerateSeries(_) | Error::InsufficientData(_)
        )
    }
}
