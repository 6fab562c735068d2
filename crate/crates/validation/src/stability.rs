//! Solver stability under permuted input order.

use kalos_core::correspondence::{KalosConfig, SolverKind};
use kalos_core::dataset::Dataset;
use kalos_core::pipeline::run_pipeline;
use kalos_core::rng::SeedPath;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::metrics::clustering_ari;
use crate::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub solver: SolverKind,
    /// ARI of each permuted run against the unpermuted run.
    pub aris: Vec<f64>,
    pub mean: f64,
    pub min: f64,
}

/// The dataset with images, raters, assignments and annotations shuffled.
pub fn permuted(d: &Dataset, seed: SeedPath) -> Dataset {
    let mut rng = seed.rng();
    let mut p = d.clone();
    p.images.shuffle(&mut rng);
    p.raters.shuffle(&mut rng);
    p.assignments.shuffle(&mut rng);
    p.annotations.shuffle(&mut rng);
    p
}

/// Re-runs the pipeline on `n_perms` shuffled copies and compares each clustering
/// with the unshuffled one.
pub fn permutation_stability(d: &Dataset, cfg: &KalosConfig, n_perms: usize, seed: u64) -> Result<StabilityResult, ValidationError> {
    if n_perms < 2 {
        return Err(ValidationError::TooFewPermutations(n_perms));
    }
    let base = run_pipeline(d, cfg)?.units;
    let root = SeedPath::new(seed).with_str("permutation");
    let aris = (0..n_perms)
        .map(|p| Ok(clustering_ari(&base, &run_pipeline(&permuted(d, root.with_u64(p as u64)), cfg)?.units)))
        .collect::<Result<Vec<f64>, ValidationError>>()?;
    let mean = aris.iter().sum::<f64>() / aris.len() as f64;
    let min = aris.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(StabilityResult { solver: cfg.solver, aris, mean, min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use kalos_core::geometry::DistanceMetric;
    use kalos_noise::{generate, synthetic_reference, NoiseModel, ReferenceSpec};

    #[test]
    fn greedy_is_order_free() {
        let r = synthetic_reference(&ReferenceSpec { images: 8, ..ReferenceSpec::default() });
        let d = generate(&r, &NoiseModel::reference(), 1.5, 3, 2).unwrap().dataset;
        let s = permutation_stability(&d, &KalosConfig::new(DistanceMetric::BoxIou, 0.5), 4, 1).unwrap();
        assert!(s.aris.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn needs_two_permutations() {
        let r = synthetic_reference(&ReferenceSpec { images: 1, ..ReferenceSpec::default() });
        let cfg = KalosConfig::new(DistanceMetric::BoxIou, 0.5);
        assert!(matches!(permutation_stability(&r, &cfg, 1, 0), Err(ValidationError::TooFewPermutations(1))));
    }
}
