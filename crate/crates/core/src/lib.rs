//! State-dependent mixture importance sampling for ruin probabilities of
//! heavy-tailed random walks with negative drift.

// `!(x > 0.0)` is the NaN-rejecting guard used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod engine;
pub mod error;
pub mod hazard;
pub mod limits;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod tuning;

#[cfg(test)]
pub(crate) mod oracle;

pub use engine::{EstimateSummary, Estimator, ReplicationResult};
pub use error::{Result, RuinError};
pub use hazard::{IncrementModel, ModelSpec, TailClass};
pub use limits::{CouplingReport, CouplingResult, DiagnosticsReport, LimitLaw};
pub use sampler::{CutoffRule, MixturePlan};
pub use tuning::{Mode, Overrides, TuningParams};
