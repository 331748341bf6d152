//! Mining curiosity-related behavior in coded small-group interaction.
//!
//! The crate covers the whole analysis path: ingesting per-slice behavior
//! annotations, aggregating crowd ratings into gold curiosity labels, mining
//! high-utility sequential patterns with curiosity as the utility, testing
//! pairwise and conditional Granger causality between behavior series, and
//! aggregating the results across groups. [`simulate`] produces synthetic
//! corpora with known ground truth.

pub mod causality;
pub mod codes;
pub mod corpus;
pub mod error;
pub mod pattern;
pub mod rating;
pub mod simulate;
pub mod stats;
pub mod synthesis;

pub use codes::{BehaviorCode, Channel, CodeId, CodeRegistry};
pub use corpus::{load_corpus, Corpus, GoldRating, Group, IngestConfig, SliceAnnotation};
pub use error::{Error, Result};
