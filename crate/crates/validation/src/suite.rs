//! Factorial sweep: generate → solve → score for every combination of noise
//! magnitude, rater count, solver and cost function.

use std::io;
use std::path::Path;

use kalos_core::correspondence::{CostFunction, KalosConfig, SolverKind};
use kalos_core::dataset::Dataset;
use kalos_core::geometry::DistanceMetric;
use kalos_core::pipeline::{run_pipeline, score_matrices};
use kalos_core::report::{write_csv, CsvCell};
use kalos_core::rng::SeedPath;
use kalos_noise::{generate, generate_collaboration, perturb_style, NoiseModel, SynthesisResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{filtered_rand_index, pair_metrics};
use crate::stability::permutation_stability;
use crate::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub metric: DistanceMetric,
    pub tau: f64,
    pub lambdas: Vec<f64>,
    pub rater_counts: Vec<usize>,
    pub solvers: Vec<SolverKind>,
    pub costs: Vec<CostFunction>,
    /// Group sizes `(A, B)` for the two-style sweep; empty disables it.
    pub collaboration: Vec<(usize, usize)>,
    /// Magnitude separating the second style from the reference.
    pub style_lambda: f64,
    pub collaboration_lambda: f64,
    /// Permutations per cell for the stability check; below 2 disables it.
    pub stability_permutations: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            metric: DistanceMetric::BoxIou,
            tau: 0.5,
            lambdas: vec![0.25, 0.5, 1.0, 2.0, 5.0],
            rater_counts: vec![3],
            solvers: SolverKind::ALL.to_vec(),
            costs: vec![CostFunction::Soft, CostFunction::Neg],
            collaboration: vec![(5, 1), (4, 2), (3, 3), (2, 2)],
            style_lambda: 2.0,
            collaboration_lambda: 1.0,
            stability_permutations: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub lambda: f64,
    pub raters: usize,
    pub solver: Option<SolverKind>,
    pub cost: Option<CostFunction>,
    pub filtered_rand_index: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub missed: usize,
    pub cuckoo_eggs: usize,
    pub mean_alpha: Option<f64>,
    pub global_alpha: Option<f64>,
    pub signal_loss: Option<f64>,
    pub stability_mean_ari: Option<f64>,
    pub stability_min_ari: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollaborationRow {
    pub group_a: usize,
    pub group_b: usize,
    pub lambda: f64,
    pub mean_alpha: Option<f64>,
    pub global_alpha: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SuiteConfig,
    pub rows: Vec<SuiteRow>,
    pub collaboration: Vec<CollaborationRow>,
}

/// Seed of one sweep cell, derived from the global seed and the cell coordinates.
pub fn cell_seed(seed: u64, lambda: f64, raters: usize) -> u64 {
    SeedPath::new(seed).with_str("cell").with_u64(lambda.to_bits()).with_u64(raters as u64).value()
}

/// Solves and scores one synthetic dataset under `cfg`.
pub fn evaluate(synth: &SynthesisResult, cfg: &KalosConfig) -> Result<SuiteRow, ValidationError> {
    let run = run_pipeline(&synth.dataset, cfg)?;
    let scores = score_matrices(&run.matrices);
    let pm = pair_metrics(&run.units, &synth.dataset, &synth.correspondence, cfg.metric);
    Ok(SuiteRow {
        lambda: synth.lambda,
        solver: Some(cfg.solver),
        cost: Some(cfg.cost),
        filtered_rand_index: filtered_rand_index(&run.units, &synth.dataset, &synth.correspondence),
        precision: pm.precision,
        recall: pm.recall,
        f1: pm.f1,
        tp: pm.tp,
        fp: pm.fp,
        missed: pm.missed,
        cuckoo_eggs: pm.cuckoo_eggs,
        mean_alpha: scores.mean_alpha,
        global_alpha: scores.global_alpha.value,
        signal_loss: Some(synth.signal_loss.ratio),
        ..SuiteRow::default()
    })
}

fn run_cell(reference: &Dataset, model: &NoiseModel, cfg: &SuiteConfig, lambda: f64, raters: usize) -> Vec<SuiteRow> {
    let seed = cell_seed(cfg.seed, lambda, raters);
    let synth = match generate(reference, model, lambda, raters, seed) {
        Ok(s) => s,
        Err(e) => return vec![SuiteRow { lambda, raters, error: Some(e.to_string()), ..SuiteRow::default() }],
    };
    let mut rows = Vec::new();
    for &solver in &cfg.solvers {
        for &cost in &cfg.costs {
            let kc = KalosConfig::new(cfg.metric, cfg.tau).with_solver(solver).with_cost(cost);
            let mut row = evaluate(&synth, &kc).unwrap_or_else(|e| SuiteRow {
                lambda,
                solver: Some(solver),
                cost: Some(cost),
                error: Some(e.to_string()),
                ..SuiteRow::default()
            });
            row.raters = raters;
            if cfg.stability_permutations >= 2 && row.error.is_none() {
                match permutation_stability(&synth.dataset, &kc, cfg.stability_permutations, seed) {
                    Ok(s) => {
                        row.stability_mean_ari = Some(s.mean);
                        row.stability_min_ari = Some(s.min);
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
            }
            rows.push(row);
        }
    }
    rows
}

/// Mean and global alpha of a two-style group of raters.
pub fn collaboration_alpha(
    reference: &Dataset,
    style_b: &Dataset,
    groups: (usize, usize),
    model: &NoiseModel,
    lambda: f64,
    kc: &KalosConfig,
    seed: u64,
) -> Result<(Option<f64>, Option<f64>), ValidationError> {
    let synth = generate_collaboration(reference, style_b, groups, model, lambda, seed)?;
    let scores = score_matrices(&run_pipeline(&synth.dataset, kc)?.matrices);
    Ok((scores.mean_alpha, scores.global_alpha.value))
}

/// Runs the full sweep. A failing cell is reported in its row and does not
/// stop the others.
pub fn run_suite(reference: &Dataset, model: &NoiseModel, cfg: &SuiteConfig) -> ExperimentReport {
    let cells: Vec<(f64, usize)> =
        cfg.lambdas.iter().flat_map(|&l| cfg.rater_counts.iter().map(move |&n| (l, n))).collect();
    let rows: Vec<SuiteRow> =
        cells.par_iter().map(|&(l, n)| run_cell(reference, model, cfg, l, n)).collect::<Vec<_>>().concat();

    let mut collaboration = Vec::new();
    if !cfg.collaboration.is_empty() {
        let kc = KalosConfig::new(cfg.metric, cfg.tau)
            .with_solver(cfg.solvers.first().copied().unwrap_or(SolverKind::Greedy))
            .with_cost(cfg.costs.first().copied().unwrap_or(CostFunction::Soft));
        let lambda = cfg.collaboration_lambda;
        let style = perturb_style(reference, model, cfg.style_lambda, cfg.seed);
        collaboration = cfg
            .collaboration
            .par_iter()
            .map(|&(a, b)| {
                let result = style.as_ref().map_err(|e| e.to_string()).and_then(|s| {
                    collaboration_alpha(reference, s, (a, b), model, lambda, &kc, cell_seed(cfg.seed, lambda, a * 100 + b))
                        .map_err(|e| e.to_string())
                });
                let (mean_alpha, global_alpha, error) = match result {
                    Ok((m, g)) => (m, g, None),
                    Err(e) => (None, None, Some(e)),
                };
                CollaborationRow { group_a: a, group_b: b, lambda, mean_alpha, global_alpha, error }
            })
            .collect();
    }
    ExperimentReport { config: cfg.clone(), rows, collaboration }
}

fn key_cells(r: &SuiteRow) -> Vec<CsvCell> {
    vec![
        CsvCell::Float(r.lambda),
        CsvCell::from(r.raters),
        r.solver.map_or(CsvCell::Empty, |s| s.name().into()),
        r.cost.map_or(CsvCell::Empty, |c| c.name().into()),
    ]
}

fn with_key(r: &SuiteRow, rest: Vec<CsvCell>) -> Vec<CsvCell> {
    let mut row = key_cells(r);
    row.extend(rest);
    row
}

/// Writes one plot-data CSV per experiment into `dir`.
pub fn write_tables(report: &ExperimentReport, dir: impl AsRef<Path>) -> io::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let key = ["lambda", "raters", "solver", "cost"];
    let header = |rest: &[&'static str]| -> Vec<&'static str> { key.iter().chain(rest).copied().collect() };
    let rows = &report.rows;
    write_csv(
        dir.join("fig3_ri.csv"),
        &header(&["filtered_rand_index"]),
        &rows.iter().map(|r| with_key(r, vec![r.filtered_rand_index.into()])).collect::<Vec<_>>(),
    )?;
    write_csv(
        dir.join("fig4_f1.csv"),
        &header(&["precision", "recall", "f1"]),
        &rows.iter().map(|r| with_key(r, vec![r.precision.into(), r.recall.into(), r.f1.into()])).collect::<Vec<_>>(),
    )?;
    write_csv(
        dir.join("fig5_outcomes.csv"),
        &header(&["tp", "fp", "missed", "cuckoo_eggs"]),
        &rows
            .iter()
            .map(|r| with_key(r, vec![r.tp.into(), r.fp.into(), r.missed.into(), r.cuckoo_eggs.into()]))
            .collect::<Vec<_>>(),
    )?;
    write_csv(
        dir.join("fig6_roi.csv"),
        &header(&["mean_alpha", "global_alpha", "signal_loss"]),
        &rows
            .iter()
            .map(|r| with_key(r, vec![r.mean_alpha.into(), r.global_alpha.into(), r.signal_loss.into()]))
            .collect::<Vec<_>>(),
    )?;
    write_csv(
        dir.join("fig7_clusters.csv"),
        &["groups", "lambda", "mean_alpha", "global_alpha"],
        &report
            .collaboration
            .iter()
            .map(|c| {
                vec![
                    format!("{}-{}", c.group_a, c.group_b).into(),
                    c.lambda.into(),
                    c.mean_alpha.into(),
                    c.global_alpha.into(),
                ]
            })
            .collect::<Vec<_>>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use kalos_core::report::to_canonical_json;
    use kalos_noise::{synthetic_reference, ReferenceSpec};

    fn small() -> (Dataset, SuiteConfig) {
        let r = synthetic_reference(&ReferenceSpec { images: 6, ..ReferenceSpec::default() });
        let cfg = SuiteConfig {
            lambdas: vec![0.5, 2.0],
            rater_counts: vec![2, 3],
            collaboration: vec![(2, 1)],
            stability_permutations: 2,
            ..SuiteConfig::default()
        };
        (r, cfg)
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let (r, cfg) = small();
        let m = NoiseModel::reference();
        let a = run_suite(&r, &m, &cfg);
        assert_eq!(a.rows.len(), 2 * 2 * 3 * 2);
        assert!(a.rows.iter().all(|row| row.error.is_none()));
        for row in &a.rows {
            if let (Some(p), Some(r), Some(f)) = (row.precision, row.recall, row.f1) {
                assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-12);
            }
        }
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let b = run_suite(&r, &m, &cfg);
        assert_eq!(to_canonical_json(&a).unwrap(), to_canonical_json(&b).unwrap());
        write_tables(&a, dir_a.path()).unwrap();
        write_tables(&b, dir_b.path()).unwrap();
        for f in ["fig3_ri.csv", "fig4_f1.csv", "fig5_outcomes.csv", "fig6_roi.csv", "fig7_clusters.csv"] {
            assert_eq!(std::fs::read(dir_a.path().join(f)).unwrap(), std::fs::read(dir_b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn failing_cell_is_isolated() {
        let (r, mut cfg) = small();
        cfg.lambdas = vec![-1.0, 1.0];
        cfg.collaboration.clear();
        let rep = run_suite(&r, &NoiseModel::reference(), &cfg);
        assert!(rep.rows.iter().any(|row| row.error.is_some()));
        assert!(rep.rows.iter().any(|row| row.lambda == 1.0 && row.error.is_none()));
    }
}
