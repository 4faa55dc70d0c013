//! Technology-acceptance annotation of product reviews with LLMs, and the
//! agreement statistics used to check those annotations.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: rating codes, reviews, variables and the annotation matrix.
//! - [`weights`]: the disagreement penalty matrix.
//! - [`metrics`]: weighted percentage agreement, per-cell consistency
//!   statistics and expert comparison.
//! - [`prompt`]: the annotation prompt and its rendering.
//! - [`parse`]: rating extraction from model output.
//! - [`gateway`]: hosted and mock completion backends.
//! - [`pipeline`]: multi-run experiments, persistence and reports.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod gateway;
pub mod metrics;
pub mod model;
pub mod parse;
pub mod pipeline;
pub mod prompt;
pub mod weights;

pub use model::{AnnotationMatrix, AnnotationVector, Rating, Review, ReviewSet, VariableSet};
pub use weights::{default_weight_matrix, WeightMatrix};
