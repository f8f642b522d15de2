//! Abstention engine for LLM question answering.
//!
//! The central method elicits a reasoning trace, reconstructs from the trace
//! alone the query the model actually answered, and abstains when that query
//! is misaligned with the user's. Five confidence/prompting baselines, the
//! shared threshold calibration, and the evaluation harness (A-Acc / R-Acc,
//! seeded runs, table aggregation) live alongside it.
//!
//! Numeric kernels are generic over [`Scalar`] (anything `num-traits` can
//! count with: `f32`, `f64`, or an exact [`Exact`] ratio) and, where
//! transcendental functions are needed, over [`num_traits::Float`]. The
//! concrete aliases below pin the types the rest of the crate uses.

pub mod backend;
pub mod baselines;
pub mod config;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod parsing;
pub mod prompts;
pub mod scalar;
pub mod scorers;
pub mod trace_inversion;
pub mod types;

pub use error::{BackendError, Error, Result};
pub use scalar::Scalar;
pub use types::{
    AbstainDecision, ConfusionCounts, Dataset, DomainGroup, Method, ModelAnswer, PositionLogprobs,
    QuerySample, Scenario, ScorerKind, TopLogprob,
};

/// Working real type for scores, confidences and table cells.
pub type Real = f64;

/// Exact rational arithmetic, used where a result must be reproducible bit for bit.
pub type Exact = num_rational::Ratio<i64>;

/// Confidence record over the working real type.
pub type ConfidenceRecord = baselines::calibration::ConfidenceRecord<Real>;

/// Dense sentence embedding.
pub type Embedding = Vec<Real>;
