//! Offline coding and statistics for installation deployments: record
//! ingestion, tabulation, inter-rater agreement and trait correlations.

pub mod agreement;
pub mod correlate;
pub mod records;
pub mod stats;
pub mod synthetic;
pub mod tabulate;

pub use agreement::{agreement_by_variable, read_ratings, Agreement, Rating, REFERENCE_KAPPA};
pub use correlate::{correlate_choices, PairResult, CHOICES};
pub use records::{load_records, read_records, write_records, SessionRecord};
pub use stats::{
    cohen_d_from_r, fleiss_kappa, mid_ranks, pearson, permutation_p, spearman, t_approx_p, CorrelationResult,
    RatingMatrix, StatsError,
};
pub use tabulate::{tabulate, Tabulation};

use serde::Serialize;

/// Everything `analyze` writes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tabulation: Tabulation,
    pub correlations: Vec<PairResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub agreement: Vec<Agreement>,
}

pub fn build_report(records: &[SessionRecord], ratings: &[Rating], permutation: Option<(usize, u64)>) -> Report {
    Report {
        tabulation: tabulate(records),
        correlations: correlate_choices(records, permutation),
        agreement: agreement_by_variable(ratings),
    }
}
