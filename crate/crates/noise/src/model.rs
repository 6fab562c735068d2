//! The fitted noise model and its sub-models.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use kalos_core::report::to_canonical_json;
use kalos_core::rng::SeedPath;
use kalos_core::stats::{
    fit_beta, fit_linear_t, fit_logistic, fit_poisson, fit_vonmises_mixture, median, quantile, BetaFit,
    LinearTModel, LogisticModel, MixtureMode, PoissonModel, StudentTFit, VonMisesComponent, VonMisesMixture,
    WINSOR_HI, WINSOR_LO,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{ChildRecord, ErrorCorpus, MatchedPair, SiblingPair};
use crate::externals::{ProposalPool, SimilarityMatrix};
use crate::NoiseError;

pub const MIN_LINEAR: usize = 20;
pub const MIN_ANGLES: usize = 50;
pub const MIN_TOPOLOGY: usize = 20;
/// Quantile of sibling merge scores used as the merge threshold.
pub const MERGE_QUANTILE: f64 = 0.99;
pub const SEMANTIC_TEMPERATURE: f64 = 0.1;
pub const SEMANTIC_TOP_K: usize = 10;
pub const FP_SHARE: f64 = 0.5;
/// False-positive proposals must overlap existing boxes below this IoU.
pub const ADMISSIBLE_IOU: f64 = 0.1;
pub const SIGN_FLIP: f64 = 0.5;
const KAPPA_DRAWS: usize = 4000;
const KAPPA_SEED: u64 = 0x006b_6170_7061;

/// Translation magnitude, direction and per-axis log-scale models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationModel {
    /// Centroid shift magnitude against mean relative area.
    pub translation: LinearTModel,
    pub direction: VonMisesMixture,
    /// Absolute log width ratio against mean relative area.
    pub scale_w: LinearTModel,
    pub scale_h: LinearTModel,
    pub sign_flip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryModel {
    pub p_global: f64,
    pub temperature: f64,
    pub top_k: usize,
    /// Uniform transitions are used when absent.
    pub similarity: Option<SimilarityMatrix>,
    /// Localization applied to relabelled instances.
    pub misclassified: LocalizationModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedModel {
    /// Event count against the per-rater annotation count of the image.
    pub rate: PoissonModel,
    /// Probability of being involved in an unmatched event against ln area.
    pub select: LogisticModel,
    pub fp_share: f64,
    pub admissible_iou: f64,
    /// Random boxes are proposed when absent.
    pub proposals: Option<ProposalPool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyModel {
    /// Probability of fragmenting against ln area.
    pub parent: LogisticModel,
    /// Child centroid offset magnitude against parent area.
    pub child_translation: LinearTModel,
    /// Absolute child-to-parent log width ratio against parent area.
    pub child_scale_w: LinearTModel,
    pub child_scale_h: LinearTModel,
    /// Offset added to child log scales.
    pub kappa: f64,
    /// Angle between the two children as a fraction of π.
    pub child_angle: BetaFit,
    /// Log merge score above which two same-category boxes are combined; `None` disables merging.
    pub merge_threshold: Option<f64>,
}

impl TopologyModel {
    /// Log likelihood that two boxes are fragments of their union.
    pub fn merge_score(&self, pair: &SiblingPair) -> f64 {
        let child = |c: &ChildRecord| {
            let t = self.child_translation.residual.ln_pdf(c.magnitude() - self.child_translation.trend(pair.union_area));
            let w = self.child_scale_w.residual.ln_pdf(self.kappa - c.log_scale[0] - self.child_scale_w.trend(pair.union_area));
            let h = self.child_scale_h.residual.ln_pdf(self.kappa - c.log_scale[1] - self.child_scale_h.trend(pair.union_area));
            t + w + h
        };
        let angle = pair.angle.map_or(self.child_angle.ln_pdf(0.5), |a| self.child_angle.ln_pdf(a));
        child(&pair.children[0]) + child(&pair.children[1]) + angle
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub matched: usize,
    pub mismatched_category: usize,
    pub unmatched: usize,
    pub topology: usize,
    pub siblings: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the corpus the model was fitted on; empty for built-in models.
    pub corpus_hash: String,
    pub counts: CorpusCounts,
    /// Sub-models that fell back to a default.
    pub fallbacks: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub localization: LocalizationModel,
    pub category: CategoryModel,
    pub unmatched: UnmatchedModel,
    pub topology: Option<TopologyModel>,
    pub provenance: Provenance,
}

fn t_model(intercept: f64, slope: f64, nu: f64, sigma: f64) -> LinearTModel {
    let residual = StudentTFit { nu, mu: 0.0, sigma, loglik: 0.0, ks_gof: 0.0, converged: true };
    LinearTModel {
        intercept,
        slope,
        residual,
        winsor_lo: residual.quantile(WINSOR_LO),
        winsor_hi: residual.quantile(WINSOR_HI),
    }
}

fn cardinal_mixture(weights: [f64; 4], kappa: f64) -> VonMisesMixture {
    VonMisesMixture {
        mode: MixtureMode::AxisCentered,
        components: (0..4)
            .map(|k| VonMisesComponent { mu: k as f64 * FRAC_PI_2, kappa, weight: weights[k] })
            .collect(),
        loglik: 0.0,
        aic: 0.0,
        converged: true,
    }
}

fn logistic(intercept: f64, slope: f64) -> LogisticModel {
    LogisticModel { intercept, slope, separated: false, converged: true }
}

impl NoiseModel {
    /// Built-in model with desk-scale parameters for bbox data in relative coordinates.
    pub fn reference() -> Self {
        NoiseModel {
            localization: LocalizationModel {
                translation: t_model(0.012, 0.09, 4.0, 0.0045),
                direction: cardinal_mixture([0.3, 0.2, 0.3, 0.2], 8.0),
                scale_w: t_model(0.06, 0.4, 5.0, 0.04),
                scale_h: t_model(0.06, 0.4, 5.0, 0.04),
                sign_flip: SIGN_FLIP,
            },
            category: CategoryModel {
                p_global: 0.026,
                temperature: SEMANTIC_TEMPERATURE,
                top_k: SEMANTIC_TOP_K,
                similarity: None,
                misclassified: LocalizationModel {
                    translation: t_model(0.018, 0.12, 4.0, 0.006),
                    direction: VonMisesMixture {
                        mode: MixtureMode::UnimodalDoubled,
                        components: vec![VonMisesComponent { mu: 0.0, kappa: 2.0, weight: 1.0 }],
                        loglik: 0.0,
                        aic: 0.0,
                        converged: true,
                    },
                    scale_w: t_model(0.08, 0.5, 5.0, 0.05),
                    scale_h: t_model(0.08, 0.5, 5.0, 0.05),
                    sign_flip: SIGN_FLIP,
                },
            },
            unmatched: UnmatchedModel {
                rate: PoissonModel { intercept: -2.5, slope: 0.05, loglik: 0.0, converged: true },
                select: logistic(-2.0, -0.4),
                fp_share: FP_SHARE,
                admissible_iou: ADMISSIBLE_IOU,
                proposals: None,
            },
            topology: Some(TopologyModel {
                parent: logistic(-3.5, 0.5),
                child_translation: t_model(0.01, 0.2, 5.0, 0.005),
                child_scale_w: t_model(0.9, 0.0, 6.0, 0.15),
                child_scale_h: t_model(0.9, 0.0, 6.0, 0.15),
                kappa: 0.5 * (0.088f64 / 0.059).ln(),
                child_angle: BetaFit { alpha: 4.53, beta: 0.53, loglik: 0.0, boundary: false },
                merge_threshold: Some(8.0),
            }),
            provenance: Provenance::default(),
        }
    }

    pub fn to_json(&self) -> String {
        to_canonical_json(self).expect("noise model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NoiseError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|e| NoiseError::Input { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NoiseError> {
        let path = path.as_ref();
        let err = |message: String| NoiseError::Input { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

/// Hex SHA-256 of the corpus in canonical JSON.
pub fn corpus_hash(corpus: &ErrorCorpus) -> String {
    let text = to_canonical_json(corpus).expect("corpus serializes");
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn fit_localization(
    pairs: &[&MatchedPair],
    mode: MixtureMode,
    names: [&'static str; 4],
) -> Result<LocalizationModel, NoiseError> {
    let x: Vec<f64> = pairs.iter().map(|p| p.area_avg).collect();
    let mag: Vec<f64> = pairs.iter().map(|p| p.translation[0].hypot(p.translation[1])).collect();
    let sw: Vec<f64> = pairs.iter().map(|p| p.log_scale[0].abs()).collect();
    let sh: Vec<f64> = pairs.iter().map(|p| p.log_scale[1].abs()).collect();
    let angles: Vec<f64> = pairs
        .iter()
        .filter(|p| p.translation[0].hypot(p.translation[1]) > 1e-12)
        .map(|p| p.direction)
        .collect();
    Ok(LocalizationModel {
        translation: fit_linear_t(&x, &mag).map_err(NoiseError::fit(names[0]))?,
        direction: fit_vonmises_mixture(&angles, mode).map_err(NoiseError::fit(names[1]))?,
        scale_w: fit_linear_t(&x, &sw).map_err(NoiseError::fit(names[2]))?,
        scale_h: fit_linear_t(&x, &sh).map_err(NoiseError::fit(names[3]))?,
        sign_flip: SIGN_FLIP,
    })
}

/// Fits every sub-model from an error corpus. Missing externals and thin
/// sub-corpora fall back to defaults, recorded in the provenance.
pub fn fit_noise_model(
    corpus: &ErrorCorpus,
    similarity: Option<SimilarityMatrix>,
    proposals: Option<ProposalPool>,
) -> Result<NoiseModel, NoiseError> {
    let mut prov = Provenance {
        corpus_hash: corpus_hash(corpus),
        counts: CorpusCounts {
            matched: corpus.matched.len(),
            mismatched_category: corpus.matched.iter().filter(|m| !m.same_category).count(),
            unmatched: corpus.unmatched.len(),
            topology: corpus.topology.len(),
            siblings: corpus.siblings.len(),
        },
        ..Provenance::default()
    };

    let all: Vec<&MatchedPair> = corpus.matched.iter().collect();
    let same: Vec<&MatchedPair> = corpus.matched.iter().filter(|m| m.same_category).collect();
    let base = if same.len() >= MIN_ANGLES { &same } else { &all };
    let localization = fit_localization(
        base,
        MixtureMode::AxisCentered,
        ["localization.translation", "localization.direction", "localization.scale_w", "localization.scale_h"],
    )?;

    let mis: Vec<&MatchedPair> = corpus.matched.iter().filter(|m| !m.same_category).collect();
    let misclassified = if mis.len() >= MIN_ANGLES {
        fit_localization(
            &mis,
            MixtureMode::UnimodalDoubled,
            ["category.translation", "category.direction", "category.scale_w", "category.scale_h"],
        )?
    } else {
        prov.fallbacks.push("category.misclassified: too few relabelled pairs, reusing the localization model".into());
        localization.clone()
    };
    if similarity.is_none() {
        prov.warnings.push("no similarity matrix: category transitions are uniform".into());
    }
    let p_global = if corpus.matched.is_empty() { 0.0 } else { mis.len() as f64 / corpus.matched.len() as f64 };

    let x_count: Vec<f64> = corpus.pair_images.iter().map(|p| p.mean_count).collect();
    let counts: Vec<u64> = corpus.pair_images.iter().map(|p| p.unmatched).collect();
    let rate = fit_poisson(&x_count, &counts).unwrap_or_else(|e| {
        prov.fallbacks.push(format!("unmatched.rate: {e}; using a constant rate"));
        let total: u64 = counts.iter().sum();
        let mean = if counts.is_empty() { 0.0 } else { total as f64 / counts.len() as f64 };
        PoissonModel { intercept: mean.max(1e-9).ln(), slope: 0.0, loglik: 0.0, converged: false }
    });
    let ln_area: Vec<f64> = corpus.instances.iter().map(|r| r.relative_area.ln()).collect();
    let is_unmatched: Vec<bool> = corpus.instances.iter().map(|r| r.unmatched).collect();
    let select = fit_logistic(&ln_area, &is_unmatched).unwrap_or_else(|e| {
        prov.fallbacks.push(format!("unmatched.select: {e}; selecting uniformly"));
        logistic(0.0, 0.0)
    });
    if proposals.is_none() {
        prov.warnings.push("no proposal pool: false positives are random boxes".into());
    }

    let topology = if corpus.topology.len() < MIN_TOPOLOGY {
        prov.fallbacks
            .push(format!("topology: {} records (< {MIN_TOPOLOGY}), fragmentation and merging disabled", corpus.topology.len()));
        None
    } else {
        let is_parent: Vec<bool> = corpus.instances.iter().map(|r| r.parent).collect();
        fit_topology(corpus, &ln_area, &is_parent, &mut prov)?
    };

    Ok(NoiseModel {
        localization,
        category: CategoryModel {
            p_global,
            temperature: SEMANTIC_TEMPERATURE,
            top_k: SEMANTIC_TOP_K,
            similarity,
            misclassified,
        },
        unmatched: UnmatchedModel { rate, select, fp_share: FP_SHARE, admissible_iou: ADMISSIBLE_IOU, proposals },
        topology,
        provenance: prov,
    })
}

fn fit_topology(
    corpus: &ErrorCorpus,
    ln_area: &[f64],
    is_parent: &[bool],
    prov: &mut Provenance,
) -> Result<Option<TopologyModel>, NoiseError> {
    let parent = fit_logistic(ln_area, is_parent).map_err(NoiseError::fit("topology.parent"))?;
    let mut x = Vec::new();
    let (mut mag, mut sw, mut sh, mut ratios) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in &corpus.topology {
        for c in &t.child_geometry {
            x.push(t.parent_area);
            mag.push(c.magnitude());
            sw.push(c.log_scale[0].min(0.0).abs());
            sh.push(c.log_scale[1].min(0.0).abs());
            ratios.push(c.area_ratio);
        }
    }
    let child_translation = fit_linear_t(&x, &mag).map_err(NoiseError::fit("topology.child_translation"))?;
    let child_scale_w = fit_linear_t(&x, &sw).map_err(NoiseError::fit("topology.child_scale_w"))?;
    let child_scale_h = fit_linear_t(&x, &sh).map_err(NoiseError::fit("topology.child_scale_h"))?;
    let angles: Vec<f64> = corpus.topology.iter().filter_map(|t| t.child_angle).collect();
    let child_angle = fit_beta(&angles).map_err(NoiseError::fit("topology.child_angle"))?;

    let mut rng = SeedPath::new(KAPPA_SEED).rng();
    let synthetic: Vec<f64> = (0..KAPPA_DRAWS)
        .map(|i| {
            let a = x[i % x.len()];
            let lw = -child_scale_w.sample(a, &mut rng).abs();
            let lh = -child_scale_h.sample(a, &mut rng).abs();
            (lw + lh).exp()
        })
        .collect();
    let kappa = 0.5 * (median(&ratios) / median(&synthetic)).ln();

    let mut model = TopologyModel {
        parent,
        child_translation,
        child_scale_w,
        child_scale_h,
        kappa,
        child_angle,
        merge_threshold: None,
    };
    if corpus.siblings.len() >= MIN_LINEAR {
        let scores: Vec<f64> = corpus.siblings.iter().map(|s| model.merge_score(s)).filter(|s| s.is_finite()).collect();
        model.merge_threshold = (!scores.is_empty()).then(|| quantile(&scores, MERGE_QUANTILE));
    } else {
        prov.fallbacks.push("topology.merge_threshold: too few sibling pairs, merging disabled".into());
    }
    Ok(Some(model))
}
