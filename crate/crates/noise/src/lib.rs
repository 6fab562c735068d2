//! Empirical annotation-noise model.
//!
//! ```text
//! multi-rater dataset ──extract_errors──▶ ErrorCorpus ──fit_noise_model──▶ NoiseModel
//!                                                                             │
//! reference dataset ───────────────────────generate(λ, raters, seed)◀─────────┘
//!                                              │
//!                                              ▼
//!                  SynthesisResult (dataset + ground-truth map + signal loss)
//! ```
//!
//! Generation applies four stages per synthetic rater and image, in order:
//! unmatched (false negatives and positives), topology (fragment and merge),
//! category flips, and localization jitter. A consumed reference annotation
//! cannot be touched by a later stage.

pub mod corpus;
pub mod externals;
pub mod fixture;
pub mod generate;
pub mod model;

use kalos_core::dataset::GeometryKind;
use kalos_core::stats::StatsError;
use thiserror::Error;

pub use corpus::{extract_errors, ErrorCorpus, MATCH_IOU};
pub use externals::{ProposalPool, SimilarityMatrix};
pub use fixture::{synthetic_reference, ReferenceSpec};
pub use generate::{generate, generate_collaboration, perturb_style, SignalLoss, SynthesisResult};
pub use model::{fit_noise_model, NoiseModel};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("noise modelling supports bbox datasets only, got {0}")]
    UnsupportedGeometry(GeometryKind),
    #[error("no image is shared by two or more raters")]
    NoSharedImages,
    #[error("fitting {component}: {source}")]
    Fit {
        component: &'static str,
        #[source]
        source: StatsError,
    },
    #[error("noise magnitude must be finite and non-negative, got {0}")]
    Magnitude(f64),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("invalid similarity matrix: {0}")]
    Similarity(String),
    #[error("invalid proposal pool: {0}")]
    Proposals(String),
}

impl NoiseError {
    pub(crate) fn fit(component: &'static str) -> impl FnOnce(StatsError) -> NoiseError {
        move |source| NoiseError::Fit { component, source }
    }
}
