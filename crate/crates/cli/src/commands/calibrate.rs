use std::path::PathBuf;

use clap::Args;
use kalos_core::calibration::{
    bootstrap_calibration, calibrate, BootstrapOptions, BootstrapTable, CalibrationResult, MetricRanking, PairingMode,
    SamplingOptions, Stratify, DEFAULT_GRID_SIZE,
};
use kalos_core::report::CsvCell;
use kalos_core::DistanceMetric;
use serde::{Deserialize, Serialize};

use super::pipeline::load_dataset;
use crate::config::{merge, required_path, snake};
use crate::output::{invalid, sibling, write_envelope, write_table, Classify, Inputs, Outcome};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrateArgs {
    /// JSON config (or an earlier report) supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Comma-separated metric names; ranked by KS separation.
    #[arg(long, value_delimiter = ',', value_parser = snake::<DistanceMetric>)]
    pub metrics: Option<Vec<DistanceMetric>>,
    /// Bootstrap iterations; 0 skips the bootstrap.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, value_parser = snake::<Stratify>)]
    pub stratify: Option<Stratify>,
    #[arg(long, value_parser = snake::<PairingMode>)]
    pub pairing: Option<PairingMode>,
    /// Other images paired with each image for the chance distribution.
    #[arg(long)]
    pub images_per_anchor: Option<usize>,
    /// Density grid points on [0, 1].
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; density grids go next to it as `<stem>.<metric>.density.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct MetricCalibration {
    metric: DistanceMetric,
    calibration: CalibrationResult,
    bootstrap: Option<BootstrapTable>,
}

#[derive(Debug, Serialize)]
struct CalibrateResult {
    ranking: Vec<MetricRanking>,
    metrics: Vec<MetricCalibration>,
}

pub fn run(args: CalibrateArgs) -> Outcome<()> {
    let mut cfg = merge(&args, args.config.as_deref())?;
    let metrics = cfg.metrics.get_or_insert_with(|| vec![DistanceMetric::BoxIou]).clone();
    let iterations = *cfg.bootstrap.get_or_insert(0);
    let stratify = *cfg.stratify.get_or_insert(Stratify::None);
    let pairing = *cfg.pairing.get_or_insert(PairingMode::AllPairs);
    let images_per_anchor = *cfg.images_per_anchor.get_or_insert(1);
    let grid = *cfg.grid.get_or_insert(DEFAULT_GRID_SIZE);
    let seed = *cfg.seed.get_or_insert(0);
    if metrics.is_empty() {
        return Err(invalid("--metrics must name at least one metric"));
    }
    if grid < 2 || images_per_anchor == 0 {
        return Err(invalid("--grid needs at least 2 points and --images-per-anchor at least 1"));
    }
    let out = required_path(&cfg.out, "out")?;
    let mut inputs = Inputs::default();
    let d = load_dataset(&required_path(&cfg.dataset, "dataset")?, &mut inputs)?;

    let sampling = SamplingOptions { pairing, images_per_anchor, seed };
    let boot = BootstrapOptions { iterations, seed, stratify, grid_size: grid, ..BootstrapOptions::default() };
    let mut per_metric = Vec::new();
    for &m in &metrics {
        let (_, calibration) = calibrate(&d, m, &sampling, grid).runtime()?;
        let bootstrap = (iterations > 0).then(|| bootstrap_calibration(&d, m, &sampling, &boot)).transpose().runtime()?;
        per_metric.push(MetricCalibration { metric: m, calibration, bootstrap });
    }
    let mut ranking: Vec<MetricRanking> = per_metric
        .iter()
        .map(|c| MetricRanking {
            metric: c.metric,
            ks: c.calibration.ks,
            tau_star: c.calibration.tau_star,
            no_crossover: c.calibration.no_crossover,
        })
        .collect();
    ranking.sort_by(|a, b| b.ks.total_cmp(&a.ks).then_with(|| a.metric.name().cmp(b.metric.name())));

    for c in &per_metric {
        let g = &c.calibration.density_grid;
        let rows: Vec<Vec<CsvCell>> =
            (0..g.grid.len()).map(|i| vec![g.grid[i].into(), g.f_do[i].into(), g.f_de[i].into()]).collect();
        write_table(&sibling(&out, &format!("{}.density.csv", c.metric)), &["grid_point", "f_do", "f_de"], &rows)?;
    }
    let result = CalibrateResult { ranking, metrics: per_metric };
    write_envelope(&out, "calibrate", &cfg, &inputs, Some(seed), &result)
}
