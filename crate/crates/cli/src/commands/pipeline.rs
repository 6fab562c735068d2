//! Options shared by every subcommand that runs the agreement pipeline.

use std::path::{Path, PathBuf};

use clap::Args;
use kalos_core::dataset::{parse_dataset_str, Dataset};
use kalos_core::{CostFunction, DistanceMetric, KalosConfig, SolverKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{required_path, snake, Auto, TauSpec};
use crate::output::{invalid, Classify, Inputs, Outcome};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOpts {
    /// Canonical dataset file.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_parser = snake::<DistanceMetric>)]
    pub metric: Option<DistanceMetric>,
    /// Matching threshold in [0, 1], or `auto` to use τ* from `--calibration`.
    #[arg(long)]
    pub tau: Option<TauSpec>,
    /// Report written by `kalos calibrate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, value_parser = snake::<SolverKind>)]
    pub solver: Option<SolverKind>,
    #[arg(long, value_parser = snake::<CostFunction>)]
    pub cost: Option<CostFunction>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl PipelineOpts {
    pub fn with_defaults(mut self) -> Self {
        self.metric.get_or_insert(DistanceMetric::BoxIou);
        self.tau.get_or_insert(TauSpec::Fixed(0.5));
        self.solver.get_or_insert(SolverKind::Greedy);
        self.cost.get_or_insert(CostFunction::Soft);
        self.seed.get_or_insert(0);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Loads the dataset and resolves the pipeline configuration.
    pub fn resolve(&self, inputs: &mut Inputs) -> Outcome<(Dataset, KalosConfig)> {
        let d = load_dataset(&required_path(&self.dataset, "dataset")?, inputs)?;
        let metric = self.metric.unwrap_or(DistanceMetric::BoxIou);
        let tau = match self.tau.unwrap_or(TauSpec::Fixed(0.5)) {
            TauSpec::Fixed(t) => t,
            TauSpec::Auto(Auto::Auto) => match &self.calibration {
                Some(path) => calibrated_tau(path, metric, inputs)?,
                None => {
                    return Err(invalid(
                        "--tau auto needs a calibration: run `kalos calibrate` and pass its report with --calibration",
                    ))
                }
            },
        };
        check_tau(tau)?;
        let cfg = KalosConfig::new(metric, tau)
            .with_solver(self.solver.unwrap_or(SolverKind::Greedy))
            .with_cost(self.cost.unwrap_or(CostFunction::Soft));
        Ok((d, cfg))
    }
}

pub fn check_tau(tau: f64) -> Outcome<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(invalid(format!("tau must lie in [0, 1], got {tau}")))
    }
}

pub fn load_dataset(path: &Path, inputs: &mut Inputs) -> Outcome<Dataset> {
    let text = inputs.read(path)?;
    parse_dataset_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// τ* for `metric` from a calibration report.
fn calibrated_tau(path: &Path, metric: DistanceMetric, inputs: &mut Inputs) -> Outcome<f64> {
    let text = inputs.read(path)?;
    let doc: Value = serde_json::from_str(&text).invalid()?;
    doc.pointer("/result/metrics")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .find(|m| m.get("metric").and_then(Value::as_str) == Some(metric.name()))
        .and_then(|m| m.pointer("/calibration/tau_star"))
        .and_then(Value::as_f64)
        .ok_or_else(|| invalid(format!("{} holds no calibration for metric {metric}", path.display())))
}
