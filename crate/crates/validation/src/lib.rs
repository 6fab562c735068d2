//! Validation harness for correspondence solvers.
//!
//! Synthetic raters from `kalos-noise` carry a ground-truth map from each
//! synthetic annotation to the reference annotation it came from. Predicted
//! units are scored against it with a filtered Rand index and pairwise
//! precision, recall and F1; [`suite::run_suite`] sweeps noise magnitude,
//! rater count, solver and cost function.

pub mod fixtures;
pub mod metrics;
pub mod stability;
pub mod suite;

use kalos_core::pipeline::PipelineError;
use kalos_noise::NoiseError;
use thiserror::Error;

pub use metrics::{adjusted_rand_index, filtered_rand_index, pair_metrics, PairMetrics, PairOutcome, Truth};
pub use stability::{permutation_stability, StabilityResult};
pub use suite::{run_suite, write_tables, ExperimentReport, SuiteConfig};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("permutation stability needs at least 2 permutations, got {0}")]
    TooFewPermutations(usize),
}
