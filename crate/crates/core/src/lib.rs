//! Inter-annotator agreement for instance-based vision annotations.
//!
//! The pipeline calibrates a localization distance against chance, groups
//! annotations from different raters into units, builds a nominal
//! reliability matrix per image and scores it with Krippendorff's alpha.
//!
//! ```text
//! Dataset ─► geometry::distance ─► correspondence (units) ─► reliability (alpha)
//!                 │                                               │
//!                 └──► calibration (KS, tau*)          diagnostics ◄┘
//! ```

pub mod calibration;
pub mod correspondence;
pub mod dataset;
pub mod diagnostics;
pub mod geometry;
pub mod pipeline;
pub mod reliability;
pub mod report;
pub mod rng;
pub mod stats;

pub use correspondence::{CostFunction, KalosConfig, SolverKind, UnitSet};
pub use dataset::{Annotation, Dataset, Geometry};
pub use geometry::DistanceMetric;
pub use pipeline::{run_pipeline, score_dataset, Scores};
pub use reliability::{AlphaScore, ReliabilityMatrix};
