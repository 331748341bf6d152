//! Pairwise and conditional Granger causality between behavior series.

mod ar;
mod granger;
mod series;

pub use ar::{fit_ar, select_lag, ARFit, DEFAULT_MAX_LAG};
pub use granger::{
    granger_conditional, granger_pairwise, granger_test, read_edges_csv, scan_group, scan_series,
    write_edges_csv, GrangerEdge, GrangerStat, Mediation, ScanOptions, DEFAULT_ALPHA,
};
pub use series::{build_series, BehaviorSeries, Encoding, SeriesKey};

/// Arrow used for causal influence in rendered tables.
pub const INFLUENCE_ARROW: &str = "⇝";
