//! Threshold calibration: observed vs chance disagreement, KS separation,
//! the density crossover anchor and bootstrap confidence intervals.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Annotation, Dataset, DatasetIndex, GeometryKind, SizeClass};
use crate::geometry::{distance, DistanceMetric, GeometryError};
use crate::rng::SeedPath;
use crate::stats::{ks_with_location, linspace, mean, quantile, Bandwidth, Kde, StatsError};

pub const DEFAULT_GRID_SIZE: usize = 1001;
pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    /// Every cross-rater pair contributes one distance.
    #[default]
    AllPairs,
    /// Each annotation contributes its nearest annotation per other rater.
    BestMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    All,
    Small,
    Medium,
    Large,
}

impl Stratum {
    fn admits(self, sizes: [SizeClass; 2]) -> bool {
        let target = match self {
            Stratum::All => return true,
            Stratum::Small => SizeClass::Small,
            Stratum::Medium => SizeClass::Medium,
            Stratum::Large => SizeClass::Large,
        };
        sizes.contains(&target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stratify {
    #[default]
    None,
    Size,
}

impl Stratify {
    pub fn strata(self) -> &'static [Stratum] {
        match self {
            Stratify::None => &[Stratum::All],
            Stratify::Size => &[Stratum::All, Stratum::Small, Stratum::Medium, Stratum::Large],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("no image has two or more assigned raters, so there is no observed signal")]
    NoSignal,
    #[error("the chance model needs at least two distinct images")]
    NoChance,
    #[error("metric {metric} does not accept {kind} geometry")]
    Incompatible { metric: DistanceMetric, kind: GeometryKind },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Sampling configuration shared by the observed and chance samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub pairing: PairingMode,
    pub images_per_anchor: usize,
    pub seed: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { pairing: PairingMode::AllPairs, images_per_anchor: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementSamples {
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    pub metric: DistanceMetric,
    pub pairing: PairingMode,
    pub seed: u64,
}

/// A distance tagged with the size classes of the two annotations involved.
#[derive(Debug, Clone, Copy)]
struct Tagged {
    d: f64,
    sizes: [SizeClass; 2],
}

fn filter(samples: &[Tagged], s: Stratum) -> Vec<f64> {
    samples.iter().filter(|t| s.admits(t.sizes)).map(|t| t.d).collect()
}

/// Distances from `left` annotations to `right` annotations of other raters.
fn cross_samples(left: &[&Annotation], right: &[&Annotation], m: DistanceMetric, mode: PairingMode, symmetric: bool) -> Result<Vec<Tagged>, GeometryError> {
    let mut out = Vec::new();
    match mode {
        PairingMode::AllPairs => {
            for (i, a) in left.iter().enumerate() {
                let start = if symmetric { i + 1 } else { 0 };
                for b in &right[start..] {
                    if a.rater_id != b.rater_id {
                        let d = distance(&a.geometry, &b.geometry, m)?;
                        out.push(Tagged { d, sizes: [a.geometry.size_class(), b.geometry.size_class()] });
                    }
                }
            }
        }
        PairingMode::BestMatch => {
            let directions: &[(&[&Annotation], &[&Annotation])] =
                if symmetric { &[(left, right)] } else { &[(left, right), (right, left)] };
            for &(from, to) in directions {
                let mut by_rater: BTreeMap<&str, Vec<&Annotation>> = BTreeMap::new();
                for b in to {
                    by_rater.entry(b.rater_id.as_str()).or_default().push(b);
                }
                for a in from {
                    for (rater, anns) in &by_rater {
                        if *rater == a.rater_id {
                            continue;
                        }
                        let mut best = f64::INFINITY;
                        for b in anns {
                            best = best.min(distance(&a.geometry, &b.geometry, m)?);
                        }
                        let s = a.geometry.size_class();
                        out.push(Tagged { d: best, sizes: [s, s] });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_metric(d: &Dataset, m: DistanceMetric) -> Result<(), CalibrationError> {
    match d.geometry_kind() {
        Some(kind) if !m.accepts(kind) => Err(CalibrationError::Incompatible { metric: m, kind }),
        _ => Ok(()),
    }
}

fn observed_view(index: &DatasetIndex, view: &[&str], m: DistanceMetric, mode: PairingMode) -> Result<Vec<Tagged>, CalibrationError> {
    let parts: Result<Vec<Vec<Tagged>>, GeometryError> = view
        .par_iter()
        .map(|img| {
            let anns = index.annotations(img);
            cross_samples(anns, anns, m, mode, true)
        })
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}

fn expected_view(
    index: &DatasetIndex,
    view: &[&str],
    m: DistanceMetric,
    opts: &SamplingOptions,
) -> Result<Vec<Tagged>, CalibrationError> {
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let root = SeedPath::new(opts.seed).with_str("expected");
    for (p, img) in view.iter().enumerate() {
        let others: Vec<usize> = (0..view.len()).filter(|&q| view[q] != *img).collect();
        if others.is_empty() {
            continue;
        }
        let k = opts.images_per_anchor.max(1).min(others.len());
        let mut rng = root.with_u64(p as u64).with_str(img).rng();
        for i in sample_indices(&mut rng, others.len(), k) {
            let q = others[i];
            pairs.insert((p.min(q), p.max(q)));
        }
    }
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
    let parts: Result<Vec<Vec<Tagged>>, GeometryError> = pairs
        .par_iter()
        .map(|&(p, q)| cross_samples(index.annotations(view[p]), index.annotations(view[q]), m, opts.pairing, false))
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}

fn sorted_images(d: &Dataset) -> Vec<&str> {
    let mut v: Vec<&str> = d.images.iter().map(|i| i.id.as_str()).collect();
    v.sort_unstable();
    v
}

/// Observed disagreement: distances between raters on the same image.
pub fn sample_observed(d: &Dataset, m: DistanceMetric, mode: PairingMode) -> Result<Vec<f64>, CalibrationError> {
    check_metric(d, m)?;
    let index = d.index();
    if !index.assigned.values().any(|r| r.len() >= 2) {
        return Err(CalibrationError::NoSignal);
    }
    Ok(observed_view(&index, &sorted_images(d), m, mode)?.into_iter().map(|t| t.d).collect())
}

/// Chance disagreement: distances between raters on different images.
pub fn sample_expected(d: &Dataset, m: DistanceMetric, opts: &SamplingOptions) -> Result<Vec<f64>, CalibrationError> {
    check_metric(d, m)?;
    if d.images.len() < 2 {
        return Err(CalibrationError::NoChance);
    }
    let index = d.index();
    Ok(expected_view(&index, &sorted_images(d), m, opts)?.into_iter().map(|t| t.d).collect())
}

pub fn sample_disagreement(d: &Dataset, m: DistanceMetric, opts: &SamplingOptions) -> Result<DisagreementSamples, CalibrationError> {
    Ok(DisagreementSamples {
        observed: sample_observed(d, m, opts.pairing)?,
        expected: sample_expected(d, m, opts)?,
        metric: m,
        pairing: opts.pairing,
        seed: opts.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub grid: Vec<f64>,
    pub f_do: Vec<f64>,
    pub f_de: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub ks: f64,
    /// Where the empirical CDFs are furthest apart.
    pub ks_location: f64,
    pub tau_star: f64,
    /// Set when the densities never cross; `tau_star` is then the midpoint of the means.
    pub no_crossover: bool,
    pub crossover_candidates: Vec<f64>,
    pub n_observed: usize,
    pub n_expected: usize,
    pub bandwidth_observed: f64,
    pub bandwidth_expected: f64,
    pub density_grid: DensityGrid,
}

/// Grid points where `f_do − f_de` changes sign, linearly interpolated.
fn sign_changes(grid: &[f64], f_do: &[f64], f_de: &[f64]) -> Vec<f64> {
    let peak = f_do.iter().chain(f_de).copied().fold(0.0, f64::max);
    let floor = peak * 1e-9;
    let diff: Vec<f64> = f_do.iter().zip(f_de).map(|(a, b)| a - b).collect();
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for i in 0..diff.len() {
        if diff[i] == 0.0 {
            continue;
        }
        if let Some(j) = last {
            if diff[j].signum() != diff[i].signum() && f_do[i].max(f_de[i]).max(f_do[j].max(f_de[j])) > floor {
                let x = if j + 1 == i {
                    grid[j] + (grid[i] - grid[j]) * diff[j] / (diff[j] - diff[i])
                } else {
                    (grid[j + 1] + grid[i - 1]) / 2.0
                };
                out.push(x);
            }
        }
        last = Some(i);
    }
    out
}

/// Locates the density crossover anchor nearest the point of maximal CDF separation.
pub fn estimate_tau_star(observed: &[f64], expected: &[f64], grid_size: usize) -> Result<CalibrationResult, CalibrationError> {
    crate::stats::require("estimate_tau_star (observed)", MIN_SAMPLES, observed.len())?;
    crate::stats::require("estimate_tau_star (expected)", MIN_SAMPLES, expected.len())?;
    let (ks, ks_location) = ks_with_location(observed, expected)?;
    let k_o = Kde::new(observed, Bandwidth::Auto)?;
    let k_e = Kde::new(expected, Bandwidth::Auto)?;
    let grid = linspace(0.0, 1.0, grid_size.max(2));
    let f_do = k_o.evaluate(&grid);
    let f_de = k_e.evaluate(&grid);
    let candidates = sign_changes(&grid, &f_do, &f_de);
    let (tau_star, no_crossover) = match candidates
        .iter()
        .copied()
        .min_by(|a, b| (a - ks_location).abs().total_cmp(&(b - ks_location).abs()).then(a.total_cmp(b)))
    {
        Some(t) => (t, false),
        None => ((mean(observed) + mean(expected)) / 2.0, true),
    };
    Ok(CalibrationResult {
        ks,
        ks_location,
        tau_star,
        no_crossover,
        crossover_candidates: candidates,
        n_observed: observed.len(),
        n_expected: expected.len(),
        bandwidth_observed: k_o.bandwidth,
        bandwidth_expected: k_e.bandwidth,
        density_grid: DensityGrid { grid, f_do, f_de },
    })
}

pub fn calibrate(d: &Dataset, m: DistanceMetric, opts: &SamplingOptions, grid_size: usize) -> Result<(DisagreementSamples, CalibrationResult), CalibrationError> {
    let s = sample_disagreement(d, m, opts)?;
    let r = estimate_tau_star(&s.observed, &s.expected, grid_size)?;
    Ok((s, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanking {
    pub metric: DistanceMetric,
    pub ks: f64,
    pub tau_star: f64,
    pub no_crossover: bool,
}

/// Ranks metrics by KS separation, highest first; ties by metric name.
pub fn rank_metrics(d: &Dataset, metrics: &[DistanceMetric], opts: &SamplingOptions, grid_size: usize) -> Result<Vec<MetricRanking>, CalibrationError> {
    let mut out = Vec::with_capacity(metrics.len());
    for &m in metrics {
        let (_, r) = calibrate(d, m, opts, grid_size)?;
        out.push(MetricRanking { metric: m, ks: r.ks, tau_star: r.tau_star, no_crossover: r.no_crossover });
    }
    out.sort_by(|a, b| b.ks.total_cmp(&a.ks).then_with(|| a.metric.name().cmp(b.metric.name())));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Mean with the 2.5% and 97.5% percentiles.
    pub fn percentile_95(xs: &[f64]) -> Option<Interval> {
        (!xs.is_empty()).then(|| Interval { mean: mean(xs), lo: quantile(xs, 0.025), hi: quantile(xs, 0.975) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEntry {
    pub stratum: Stratum,
    pub tau_star: Option<Interval>,
    pub ks: Option<Interval>,
    /// Iterations with enough samples in this stratum.
    pub iterations_used: usize,
    pub no_crossover_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapTable {
    pub entries: Vec<BootstrapEntry>,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Resample {
    /// Draw with replacement.
    #[default]
    WithReplacement,
    /// Keep the original sample; used to check the point estimate.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub iterations: usize,
    pub seed: u64,
    pub stratify: Stratify,
    pub grid_size: usize,
    pub resample: Resample,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            iterations: 100,
            seed: 0,
            stratify: Stratify::None,
            grid_size: DEFAULT_GRID_SIZE,
            resample: Resample::WithReplacement,
        }
    }
}

fn resample_indices(n: usize, seed: SeedPath, mode: Resample) -> Vec<usize> {
    match mode {
        Resample::Identity => (0..n).collect(),
        Resample::WithReplacement => {
            let mut rng = seed.rng();
            (0..n).map(|_| rng.random_range(0..n)).collect()
        }
    }
}

fn summarize(stratum: Stratum, results: &[Option<CalibrationResult>]) -> BootstrapEntry {
    let ok: Vec<&CalibrationResult> = results.iter().flatten().collect();
    let taus: Vec<f64> = ok.iter().map(|r| r.tau_star).collect();
    let kss: Vec<f64> = ok.iter().map(|r| r.ks).collect();
    BootstrapEntry {
        stratum,
        tau_star: Interval::percentile_95(&taus),
        ks: Interval::percentile_95(&kss),
        iterations_used: ok.len(),
        no_crossover_count: ok.iter().filter(|r| r.no_crossover).count(),
    }
}

fn estimate_or_skip(o: &[f64], e: &[f64], grid: usize) -> Result<Option<CalibrationResult>, CalibrationError> {
    match estimate_tau_star(o, e, grid) {
        Ok(r) => Ok(Some(r)),
        Err(CalibrationError::Stats(StatsError::InsufficientSamples { .. })) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Image-level percentile bootstrap of (τ*, KS), optionally per size class.
///
/// Iteration `i` resamples images with a seed derived from `(seed, i)`; the
/// chance pairing inside an iteration uses the sampling seed, so an identity
/// resample reproduces the point estimate.
pub fn bootstrap_calibration(
    d: &Dataset,
    m: DistanceMetric,
    sampling: &SamplingOptions,
    opts: &BootstrapOptions,
) -> Result<BootstrapTable, CalibrationError> {
    check_metric(d, m)?;
    if d.images.len() < 2 {
        return Err(CalibrationError::NoChance);
    }
    let index = d.index();
    let images = sorted_images(d);
    let root = SeedPath::new(opts.seed).with_str("bootstrap");
    let strata = opts.stratify.strata();
    let per_iter: Result<Vec<Vec<Option<CalibrationResult>>>, CalibrationError> = (0..opts.iterations)
        .into_par_iter()
        .map(|it| {
            let view: Vec<&str> =
                resample_indices(images.len(), root.with_u64(it as u64), opts.resample).into_iter().map(|i| images[i]).collect();
            let obs = observed_view(&index, &view, m, sampling.pairing)?;
            let exp = expected_view(&index, &view, m, sampling)?;
            strata.iter().map(|&s| estimate_or_skip(&filter(&obs, s), &filter(&exp, s), opts.grid_size)).collect()
        })
        .collect();
    let per_iter = per_iter?;
    let entries = strata
        .iter()
        .enumerate()
        .map(|(k, &s)| summarize(s, &per_iter.iter().map(|r| r[k].clone()).collect::<Vec<_>>()))
        .collect();
    Ok(BootstrapTable { entries, iterations: opts.iterations, seed: opts.seed })
}

/// Percentile bootstrap over raw sample lists (each resampled independently).
pub fn bootstrap_samples(observed: &[f64], expected: &[f64], opts: &BootstrapOptions) -> Result<BootstrapTable, CalibrationError> {
    let root = SeedPath::new(opts.seed).with_str("bootstrap-samples");
    let results: Result<Vec<Option<CalibrationResult>>, CalibrationError> = (0..opts.iterations)
        .into_par_iter()
        .map(|it| {
            let s = root.with_u64(it as u64);
            let o: Vec<f64> = resample_indices(observed.len(), s.with_str("o"), opts.resample).into_iter().map(|i| observed[i]).collect();
            let e: Vec<f64> = resample_indices(expected.len(), s.with_str("e"), opts.resample).into_iter().map(|i| expected[i]).collect();
            estimate_or_skip(&o, &e, opts.grid_size)
        })
        .collect();
    Ok(BootstrapTable { entries: vec![summarize(Stratum::All, &results?)], iterations: opts.iterations, seed: opts.seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_dataset_str;
    use rand_distr::{Distribution, Normal};

    /// (image id, [(annotation id, rater, box)]).
    type Image<'a> = (&'a str, &'a [(&'a str, &'a str, [f64; 4])]);

    fn doc(images: &[Image]) -> Dataset {
        let mut imgs = Vec::new();
        let mut assign = Vec::new();
        let mut anns = Vec::new();
        let mut raters = BTreeSet::new();
        for (img, list) in images {
            imgs.push(format!(r#"{{"id": "{img}", "width": 100, "height": 100}}"#));
            let mut rs = BTreeSet::new();
            for (id, r, b) in list.iter() {
                rs.insert(*r);
                raters.insert(*r);
                anns.push(format!(
                    r#"{{"id": "{id}", "image_id": "{img}", "rater_id": "{r}", "category_id": "c", "geometry": {{"type": "bbox", "coordinates": [{}, {}, {}, {}]}}}}"#,
                    b[0], b[1], b[2], b[3]
                ));
            }
            for r in rs {
                assign.push(format!(r#"{{"image_id": "{img}", "rater_id": "{r}"}}"#));
            }
        }
        let raters: Vec<String> = raters.iter().map(|r| format!(r#"{{"id": "{r}"}}"#)).collect();
        let text = format!(
            r#"{{"format_version": "1", "coordinate_mode": "relative", "images": [{}], "raters": [{}], "assignments": [{}], "categories": [{{"id": "c", "name": "c"}}], "annotations": [{}]}}"#,
            imgs.join(","),
            raters.join(","),
            assign.join(","),
            anns.join(",")
        );
        parse_dataset_str(&text).unwrap()
    }

    const B: [f64; 4] = [0.1, 0.1, 0.2, 0.2];

    #[test]
    fn observed_pair_counts() {
        let d = doc(&[("i", &[("a", "A", B), ("b", "B", B)])]);
        assert_eq!(sample_observed(&d, DistanceMetric::BoxIou, PairingMode::AllPairs).unwrap(), vec![0.0]);
        let d = doc(&[("i", &[("a1", "A", B), ("a2", "A", [0.5, 0.5, 0.2, 0.2]), ("b", "B", B)])]);
        assert_eq!(sample_observed(&d, DistanceMetric::BoxIou, PairingMode::AllPairs).unwrap().len(), 2);
    }

    #[test]
    fn best_match_takes_minimum() {
        // B's box against A's two boxes: one at d = 0.1, the other disjoint.
        let b = [0.0, 0.0, 0.5, 0.5];
        let near = [0.0, 0.0, 0.45, 0.5];
        let d = doc(&[("i", &[("a1", "A", near), ("a2", "A", [0.7, 0.7, 0.2, 0.2]), ("b", "B", b)])]);
        let s = sample_observed(&d, DistanceMetric::BoxIou, PairingMode::BestMatch).unwrap();
        // Contributions: a1→B, a2→B, b→A (minimum).
        assert_eq!(s.len(), 3);
        assert!((s[2] - 0.1).abs() < 1e-12, "{s:?}");
        assert!((s[0] - 0.1).abs() < 1e-12 && s[1] == 1.0);
    }

    #[test]
    fn expected_pairs_across_images() {
        let d = doc(&[("i1", &[("a", "A", [0.0, 0.0, 0.2, 0.2])]), ("i2", &[("b", "B", [0.6, 0.6, 0.2, 0.2])])]);
        let opts = SamplingOptions::default();
        assert_eq!(sample_expected(&d, DistanceMetric::BoxIou, &opts).unwrap(), vec![1.0]);
        let d = doc(&[("i1", &[("a", "A", B)]), ("i2", &[("b", "B", B)])]);
        assert_eq!(sample_expected(&d, DistanceMetric::BoxIou, &opts).unwrap(), vec![0.0]);
        let single = doc(&[("i1", &[("a", "A", B), ("b", "B", B)])]);
        assert_eq!(sample_expected(&single, DistanceMetric::BoxIou, &opts), Err(CalibrationError::NoChance));
        let lonely = doc(&[("i1", &[("a", "A", B)]), ("i2", &[("b", "A", B)])]);
        assert_eq!(sample_observed(&lonely, DistanceMetric::BoxIou, PairingMode::AllPairs), Err(CalibrationError::NoSignal));
    }

    fn gaussians(seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = SeedPath::new(seed).rng();
        let o: Normal<f64> = Normal::new(0.3, 0.1).unwrap();
        let e: Normal<f64> = Normal::new(0.7, 0.1).unwrap();
        let a = (0..1000).map(|_| o.sample(&mut rng).clamp(0.0, 1.0)).collect();
        let b = (0..1000).map(|_| e.sample(&mut rng).clamp(0.0, 1.0)).collect();
        (a, b)
    }

    #[test]
    fn two_gaussian_crossover() {
        let (o, e) = gaussians(1);
        let r = estimate_tau_star(&o, &e, DEFAULT_GRID_SIZE).unwrap();
        assert!((r.tau_star - 0.5).abs() < 0.03, "{}", r.tau_star);
        assert!(r.ks > 0.9 && !r.no_crossover);
        assert!(r.tau_star > mean(&o) && r.tau_star < mean(&e));
    }

    #[test]
    fn identical_samples_have_no_crossover() {
        let (o, _) = gaussians(2);
        let r = estimate_tau_star(&o, &o, DEFAULT_GRID_SIZE).unwrap();
        assert!(r.no_crossover);
        assert_eq!(r.ks, 0.0);
        assert!(matches!(estimate_tau_star(&o[..5], &o, 11), Err(CalibrationError::Stats(_))));
    }

    #[test]
    fn identity_bootstrap_reproduces_point_estimate() {
        let (o, e) = gaussians(3);
        let point = estimate_tau_star(&o, &e, 201).unwrap();
        let opts = BootstrapOptions { iterations: 1, grid_size: 201, resample: Resample::Identity, ..Default::default() };
        let t = bootstrap_samples(&o, &e, &opts).unwrap();
        let tau = t.entries[0].tau_star.unwrap();
        assert_eq!((tau.mean, tau.lo, tau.hi), (point.tau_star, point.tau_star, point.tau_star));
    }
}
