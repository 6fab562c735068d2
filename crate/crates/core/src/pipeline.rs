//! End-to-end scoring: correspondence per image, reliability matrices, alpha.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspondence::{solve_image, CorrespondenceError, KalosConfig, UnitSet};
use crate::dataset::Dataset;
use crate::reliability::{
    build_reliability_matrix, global_alpha, image_alpha, AlphaScore, Band, ImageAlpha, ReliabilityError,
    ReliabilityMatrix,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Correspondence(#[from] CorrespondenceError),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
}

/// Units and reliability matrices for every image, in image-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub config: KalosConfig,
    pub units: Vec<UnitSet>,
    pub matrices: Vec<ReliabilityMatrix>,
}

/// Mean and global alpha with per-image detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    /// Mean of the defined per-image alphas; `None` if every image is undefined.
    pub mean_alpha: Option<f64>,
    pub mean_band: Option<Band>,
    pub global_alpha: AlphaScore,
    pub per_image: Vec<ImageAlpha>,
    pub undefined_count: usize,
    pub empty_count: usize,
}

/// Runs correspondence and matrix construction on every image in parallel.
pub fn run_pipeline(d: &Dataset, cfg: &KalosConfig) -> Result<PipelineRun, PipelineError> {
    let index = d.index();
    let mut image_ids: Vec<&str> = d.images.iter().map(|i| i.id.as_str()).collect();
    image_ids.sort_unstable();
    let results: Vec<Result<(UnitSet, ReliabilityMatrix), PipelineError>> = image_ids
        .par_iter()
        .map(|&img| {
            let anns = index.annotations(img);
            let units = solve_image(img, anns, cfg)?;
            let empty = Default::default();
            let assigned = index.assigned.get(img).unwrap_or(&empty);
            let matrix = build_reliability_matrix(&units, anns, assigned)?;
            Ok((units, matrix))
        })
        .collect();
    let mut units = Vec::with_capacity(results.len());
    let mut matrices = Vec::with_capacity(results.len());
    for r in results {
        let (u, m) = r?;
        units.push(u);
        matrices.push(m);
    }
    Ok(PipelineRun { config: *cfg, units, matrices })
}

pub fn score_matrices(matrices: &[ReliabilityMatrix]) -> Scores {
    let per_image: Vec<ImageAlpha> = matrices
        .iter()
        .map(|m| ImageAlpha { image_id: m.image_id.clone(), alpha: image_alpha(m).value, empty: m.is_empty_image() })
        .collect();
    let defined: Vec<f64> = per_image.iter().filter_map(|p| p.alpha).collect();
    let mean_alpha = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Scores {
        mean_alpha,
        mean_band: mean_alpha.map(Band::of),
        global_alpha: global_alpha(matrices),
        undefined_count: per_image.len() - defined.len(),
        empty_count: per_image.iter().filter(|p| p.empty).count(),
        per_image,
    }
}

/// Convenience: full pipeline followed by scoring.
pub fn score_dataset(d: &Dataset, cfg: &KalosConfig) -> Result<Scores, PipelineError> {
    Ok(score_matrices(&run_pipeline(d, cfg)?.matrices))
}

/// Mean alpha of a dataset under `cfg`, or `None` when undefined everywhere.
pub fn mean_alpha_of(d: &Dataset, cfg: &KalosConfig) -> Result<Option<f64>, PipelineError> {
    Ok(score_dataset(d, cfg)?.mean_alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_dataset_str;
    use crate::geometry::DistanceMetric;

    const DOC: &str = r#"{
  "format_version": "1", "coordinate_mode": "relative",
  "images": [{"id": "i1", "width": 100, "height": 100}, {"id": "i2", "width": 100, "height": 100}],
  "raters": [{"id": "A"}, {"id": "B"}, {"id": "C"}],
  "assignments": [
    {"image_id": "i1", "rater_id": "A"}, {"image_id": "i1", "rater_id": "B"},
    {"image_id": "i2", "rater_id": "A"}, {"image_id": "i2", "rater_id": "B"}, {"image_id": "i2", "rater_id": "C"}],
  "categories": [{"id": "a", "name": "a"}, {"id": "b", "name": "b"}],
  "annotations": [
    {"id": "x1", "image_id": "i1", "rater_id": "A", "category_id": "a", "geometry": {"type": "bbox", "coordinates": [0.1, 0.1, 0.2, 0.2]}},
    {"id": "x2", "image_id": "i1", "rater_id": "B", "category_id": "a", "geometry": {"type": "bbox", "coordinates": [0.1, 0.1, 0.2, 0.2]}},
    {"id": "x3", "image_id": "i1", "rater_id": "B", "category_id": "b", "geometry": {"type": "bbox", "coordinates": [0.6, 0.6, 0.2, 0.2]}}]
}"#;

    #[test]
    fn empty_image_and_no_object() {
        let d = parse_dataset_str(DOC).unwrap();
        let run = run_pipeline(&d, &KalosConfig::new(DistanceMetric::BoxIou, 0.5)).unwrap();
        assert_eq!(run.units[0].units.len(), 2);
        assert!(run.matrices[1].is_empty_image());
        let s = score_matrices(&run.matrices);
        assert_eq!(s.empty_count, 1);
        assert_eq!(s.per_image[1].alpha, Some(1.0));
        assert_eq!(s.undefined_count, 0);
        // Image 1 columns: (a, a) and (NoObject, b).
        let i1 = s.per_image[0].alpha.unwrap();
        assert!(i1 < 1.0);
        assert!((s.mean_alpha.unwrap() - (i1 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn notation_string() {
        let cfg = KalosConfig::new(DistanceMetric::BoxIou, 0.5);
        assert_eq!(cfg.notation(), "KaLOS(d=box_iou, tau=0.5, S=greedy, psi=soft)");
    }
}
