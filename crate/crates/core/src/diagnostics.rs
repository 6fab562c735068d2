//! Downstream analyses that recompute alpha on filtered, restricted or
//! re-solved views of a dataset.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspondence::KalosConfig;
use crate::dataset::{Annotation, Assignment, Dataset, RaterRecord};
use crate::pipeline::{run_pipeline, score_matrices, PipelineError};
use crate::reliability::{image_alpha, krippendorff_alpha, AlphaScore, Cell, CoincidenceCounts, ReliabilityMatrix};
use crate::stats::{mean, quantile_sorted};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("threshold list must be non-empty, strictly increasing and inside (0, 1]")]
    BadThresholds,
    #[error("unknown rater '{0}'")]
    UnknownRater(String),
    #[error("removing rater '{0}' leaves fewer than two raters on every image")]
    TooFewRaters(String),
    #[error("rater '{0}' has no image in common across the two sessions")]
    NoOverlap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsaPoint {
    /// Similarity threshold; the matching distance threshold is `1 − tau_s`.
    pub tau_s: f64,
    pub mean_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsaCurve {
    pub points: Vec<LsaPoint>,
    pub anchor_tau_s: f64,
    pub strict_tau_s: f64,
    /// `α(anchor) − α(strictest)`.
    pub delta: Option<f64>,
}

/// Agreement as a function of matching strictness.
///
/// The anchor is the entry matching `cfg.tau` (or the loosest entry if none
/// does); the strict entry is the largest `tau_s`.
pub fn localization_sensitivity(d: &Dataset, cfg: &KalosConfig, tau_s: &[f64]) -> Result<LsaCurve, DiagnosticsError> {
    if tau_s.is_empty() || tau_s.windows(2).any(|w| w[0] >= w[1]) || tau_s.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(DiagnosticsError::BadThresholds);
    }
    let points: Result<Vec<LsaPoint>, DiagnosticsError> = tau_s
        .par_iter()
        .map(|&t| {
            let run = run_pipeline(d, &cfg.with_tau(1.0 - t))?;
            Ok(LsaPoint { tau_s: t, mean_alpha: score_matrices(&run.matrices).mean_alpha })
        })
        .collect();
    let points = points?;
    let anchor_tau_s = 1.0 - cfg.tau;
    let anchor = points.iter().find(|p| (p.tau_s - anchor_tau_s).abs() < 1e-9).unwrap_or(&points[0]);
    let strict = points.last().unwrap();
    let delta = match (anchor.mean_alpha, strict.mean_alpha) {
        (Some(a), Some(s)) => Some(a - s),
        _ => None,
    };
    Ok(LsaCurve { anchor_tau_s: anchor.tau_s, strict_tau_s: strict.tau_s, delta, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub category: String,
    pub alpha: AlphaScore,
    /// Columns whose consensus category is the target.
    pub support: usize,
}

/// Alpha restricted to units of one consensus category, recoded as
/// target-versus-absent.
pub fn class_difficulty(matrices: &[ReliabilityMatrix], category: &str) -> ClassScore {
    let mut counts = CoincidenceCounts::default();
    let mut support = 0;
    for m in matrices {
        for (u, cons) in m.consensus.iter().enumerate() {
            if cons != category {
                continue;
            }
            support += 1;
            let column: Vec<Cell> = m
                .cells
                .iter()
                .map(|row| match &row[u] {
                    Cell::Missing => Cell::Missing,
                    Cell::Category(c) if c == category => Cell::Category(c.clone()),
                    _ => Cell::NoObject,
                })
                .collect();
            counts.add_column(&column);
        }
    }
    let alpha = if support == 0 { AlphaScore::undefined(0.0) } else { krippendorff_alpha(&counts) };
    ClassScore { category: category.to_string(), alpha, support }
}

/// Class scores for every category present in a consensus, sorted by id.
pub fn class_table(matrices: &[ReliabilityMatrix]) -> Vec<ClassScore> {
    let cats: BTreeSet<&str> = matrices.iter().flat_map(|m| m.consensus.iter().map(String::as_str)).collect();
    cats.into_iter().map(|c| class_difficulty(matrices, c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VitalityMode {
    /// Remove the rater before correspondence and re-run the pipeline.
    #[default]
    Rerun,
    /// Delete the rater's rows from the existing matrices.
    MaskRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vitality {
    pub rater: String,
    pub alpha_full: Option<f64>,
    pub alpha_without: Option<f64>,
    /// `alpha_full − alpha_without`; positive means the rater builds consensus.
    pub vitality: Option<f64>,
}

fn mask_rows(matrices: &[ReliabilityMatrix], rater: &str) -> Vec<ReliabilityMatrix> {
    matrices
        .iter()
        .map(|m| {
            let keep: Vec<usize> = (0..m.raters.len()).filter(|&r| m.raters[r] != rater).collect();
            let cells: Vec<Vec<Cell>> = keep.iter().map(|&r| m.cells[r].clone()).collect();
            // Units that only this rater held disappear with the row.
            let live: Vec<usize> =
                (0..m.n_units()).filter(|&u| cells.iter().any(|row| matches!(row[u], Cell::Category(_)))).collect();
            ReliabilityMatrix {
                image_id: m.image_id.clone(),
                raters: keep.iter().map(|&r| m.raters[r].clone()).collect(),
                units: live.iter().map(|&u| m.units[u].clone()).collect(),
                consensus: live.iter().map(|&u| m.consensus[u].clone()).collect(),
                cells: cells.iter().map(|row| live.iter().map(|&u| row[u].clone()).collect()).collect(),
            }
        })
        .collect()
}

/// Change in mean alpha when `rater` is removed.
pub fn annotator_vitality(d: &Dataset, cfg: &KalosConfig, rater: &str, mode: VitalityMode) -> Result<Vitality, DiagnosticsError> {
    if !d.raters.iter().any(|r| r.id == rater) {
        return Err(DiagnosticsError::UnknownRater(rater.to_string()));
    }
    let index = d.index();
    if !index.assigned.values().any(|rs| rs.keys().filter(|r| **r != rater).count() >= 2) {
        return Err(DiagnosticsError::TooFewRaters(rater.to_string()));
    }
    let full = run_pipeline(d, cfg)?;
    let alpha_full = score_matrices(&full.matrices).mean_alpha;
    let alpha_without = match mode {
        VitalityMode::Rerun => {
            let keep: BTreeSet<String> = d.raters.iter().filter(|r| r.id != rater).map(|r| r.id.clone()).collect();
            score_matrices(&run_pipeline(&d.restrict_raters(&keep), cfg)?.matrices).mean_alpha
        }
        VitalityMode::MaskRows => score_matrices(&mask_rows(&full.matrices, rater)).mean_alpha,
    };
    let vitality = match (alpha_full, alpha_without) {
        (Some(f), Some(w)) => Some(f - w),
        _ => None,
    };
    Ok(Vitality { rater: rater.to_string(), alpha_full, alpha_without, vitality })
}

pub fn vitality_table(d: &Dataset, cfg: &KalosConfig, mode: VitalityMode) -> Result<Vec<Vitality>, DiagnosticsError> {
    let mut raters: Vec<&str> = d.raters.iter().map(|r| r.id.as_str()).collect();
    raters.sort_unstable();
    raters.par_iter().map(|r| annotator_vitality(d, cfg, r, mode)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollaborationEntry {
    pub rater_a: String,
    pub rater_b: String,
    pub shared_images: usize,
    /// Mean alpha of the two-rater sub-dataset; `None` without shared images
    /// or when alpha is undefined on all of them.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollaborationMatrix {
    pub raters: Vec<String>,
    /// Upper triangle, `rater_a < rater_b`.
    pub entries: Vec<CollaborationEntry>,
}

impl CollaborationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.entries.iter().find(|e| e.rater_a == a && e.rater_b == b).and_then(|e| e.alpha)
    }
}

/// Two-rater sub-dataset on the images both raters were assigned.
pub fn pair_subset(d: &Dataset, a: &str, b: &str) -> Dataset {
    let index = d.index();
    let shared: BTreeSet<String> = index
        .assigned
        .iter()
        .filter(|(_, rs)| rs.contains_key(a) && rs.contains_key(b))
        .map(|(img, _)| img.to_string())
        .collect();
    let keep: BTreeSet<String> = [a.to_string(), b.to_string()].into();
    d.restrict_raters(&keep).restrict_images(&shared)
}

/// Pairwise mean alpha for every rater pair that shares at least one image.
pub fn collaboration_matrix(d: &Dataset, cfg: &KalosConfig) -> Result<CollaborationMatrix, DiagnosticsError> {
    let mut raters: Vec<String> = d.raters.iter().map(|r| r.id.clone()).collect();
    raters.sort();
    let pairs: Vec<(usize, usize)> = (0..raters.len()).flat_map(|i| (i + 1..raters.len()).map(move |j| (i, j))).collect();
    let entries: Result<Vec<CollaborationEntry>, DiagnosticsError> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let sub = pair_subset(d, &raters[i], &raters[j]);
            let alpha = if sub.images.is_empty() { None } else { score_matrices(&run_pipeline(&sub, cfg)?.matrices).mean_alpha };
            Ok(CollaborationEntry { rater_a: raters[i].clone(), rater_b: raters[j].clone(), shared_images: sub.images.len(), alpha })
        })
        .collect();
    Ok(CollaborationMatrix { raters, entries: entries? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraResult {
    pub rater: String,
    pub shared_images: usize,
    pub alpha: AlphaScore,
}

/// Self-agreement of one rater across two sessions, treated as two pseudo-raters.
pub fn intra_annotator(d0: &Dataset, d1: &Dataset, rater: &str, cfg: &KalosConfig) -> Result<IntraResult, DiagnosticsError> {
    let assigned = |d: &Dataset| -> BTreeSet<String> {
        d.assignments.iter().filter(|a| a.rater_id == rater).map(|a| a.image_id.clone()).collect()
    };
    let shared: BTreeSet<String> = assigned(d0).intersection(&assigned(d1)).cloned().collect();
    if shared.is_empty() {
        return Err(DiagnosticsError::NoOverlap(rater.to_string()));
    }
    let sessions = [(d0, format!("{rater}@t0")), (d1, format!("{rater}@t1"))];
    let mut combined = Dataset {
        images: d0.images.iter().filter(|i| shared.contains(&i.id)).cloned().collect(),
        raters: sessions.iter().map(|(_, id)| RaterRecord { id: id.clone(), name: None }).collect(),
        assignments: Vec::new(),
        categories: d0.categories.clone(),
        annotations: Vec::new(),
    };
    for (k, (d, pseudo)) in sessions.iter().enumerate() {
        for a in d.assignments.iter().filter(|a| a.rater_id == rater && shared.contains(&a.image_id)) {
            combined.assignments.push(Assignment { rater_id: pseudo.clone(), ..a.clone() });
        }
        for a in d.annotations.iter().filter(|a| a.rater_id == rater && shared.contains(&a.image_id)) {
            combined.annotations.push(Annotation { id: format!("t{k}:{}", a.id), rater_id: pseudo.clone(), ..a.clone() });
        }
    }
    for c in &d1.categories {
        if !combined.categories.iter().any(|x| x.id == c.id) {
            combined.categories.push(c.clone());
        }
    }
    let run = run_pipeline(&combined, cfg)?;
    let s = score_matrices(&run.matrices);
    let alpha = match s.mean_alpha {
        Some(v) => AlphaScore::defined(v, s.global_alpha.n_pairable),
        None => AlphaScore::undefined(s.global_alpha.n_pairable),
    };
    Ok(IntraResult { rater: rater.to_string(), shared_images: shared.len(), alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaDistribution {
    /// Defined per-image alphas in ascending order.
    pub sorted: Vec<f64>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub undefined_count: usize,
}

pub fn per_image_distribution(matrices: &[ReliabilityMatrix]) -> AlphaDistribution {
    let mut sorted: Vec<f64> = matrices.iter().filter_map(|m| image_alpha(m).value).collect();
    sorted.sort_by(f64::total_cmp);
    let undefined_count = matrices.len() - sorted.len();
    let stat = |q: f64| (!sorted.is_empty()).then(|| quantile_sorted(&sorted, q));
    AlphaDistribution {
        mean: (!sorted.is_empty()).then(|| mean(&sorted)),
        median: stat(0.5),
        q1: stat(0.25),
        q3: stat(0.75),
        undefined_count,
        sorted,
    }
}

/// Equal-width histogram of values in `[lo, hi]`; returns (bin start, count).
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, usize)> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts.into_iter().enumerate().map(|(k, c)| (lo + k as f64 * width, c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiagnosticsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<AlphaDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lsa: Option<LsaCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<ClassScore>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vitality: Option<Vec<Vitality>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collaboration: Option<CollaborationMatrix>,
}

/// Per-image alpha as a map, convenient for comparisons.
pub fn alpha_by_image(matrices: &[ReliabilityMatrix]) -> BTreeMap<String, Option<f64>> {
    matrices.iter().map(|m| (m.image_id.clone(), image_alpha(m).value)).collect()
}
