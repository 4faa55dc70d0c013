//! Agreement and consistency statistics over rating codes.
//!
//! Weighted percentage agreement (WPA) between two annotation sequences
//! `a` and `b` of length `n` under penalty matrix `w` is
//!
//! ```text
//! WPA = 1 - Σ w[a_i][b_i] / (n · w_max)
//! ```
//!
//! All functions are pure; results never depend on evaluation order beyond
//! the fixed pair enumeration `i < j`.

mod agreement;
mod consistency;
mod wpa;

use thiserror::Error;

pub use agreement::{
    agreement_label, annotator_agreement, expert_agreement_report, AgreementLabel, AgreementReport,
    AnnotatorRatings, PairAgreement, PairKind, VariableAgreement, BETWEEN_EXPERTS, EXPERTS_WITH_LLM,
};
pub use consistency::{
    annotation_range, cell_stats, consistency_table, mode_annotation, proportion_in_proximity,
    proportion_of_mode, CellStats, ConsistencyStats,
};
pub use wpa::{pairwise_mean_wpa, pairwise_mean_wpa_observed, wpa, wpa_observed, PairwiseWpa, WpaResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("sequence lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("no ratings to compare")]
    Empty,
    #[error("code {code} is not covered by the {size}x{size} weight matrix")]
    InvalidCode { code: u8, size: usize },
    #[error("need at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("need at least 2 expert annotators, got {0}")]
    TooFewAnnotators(usize),
    #[error("agreement value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("{0}")]
    Shape(String),
}
