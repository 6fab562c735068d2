use std::path::PathBuf;

use clap::Args;
use kalos_core::{CostFunction, DistanceMetric, KalosConfig, SolverKind};
use kalos_noise::{synthetic_reference, ReferenceSpec};
use kalos_validation::{permutation_stability, run_suite, write_tables, SuiteConfig};
use serde::{Deserialize, Serialize};

use super::noise::load_model;
use super::pipeline::{check_tau, load_dataset};
use crate::config::{merge, required_path, snake, Counts, Group};
use crate::output::{invalid, write_envelope, Classify, Inputs, Outcome};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateArgs {
    /// JSON config (or an earlier report) supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Single-rater reference dataset; a seeded synthetic one when omitted.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Image count of the synthetic reference.
    #[arg(long)]
    pub images: Option<usize>,
    /// Fitted noise model; the built-in reference model when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_parser = snake::<DistanceMetric>)]
    pub metric: Option<DistanceMetric>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Rater counts, `2..8` or `3,5`.
    #[arg(long)]
    pub raters: Option<Counts>,
    #[arg(long, value_delimiter = ',', value_parser = snake::<SolverKind>)]
    pub solvers: Option<Vec<SolverKind>>,
    #[arg(long, value_delimiter = ',', value_parser = snake::<CostFunction>)]
    pub costs: Option<Vec<CostFunction>>,
    /// Two-style group sizes, e.g. `5-1,3-3`; `none` disables.
    #[arg(long, value_delimiter = ',', value_parser = group_or_none)]
    pub collaboration: Option<Vec<Option<Group>>>,
    /// Magnitude separating the second style from the reference.
    #[arg(long)]
    pub style_lambda: Option<f64>,
    #[arg(long)]
    pub collaboration_lambda: Option<f64>,
    /// Input permutations per cell; below 2 disables the stability check.
    #[arg(long)]
    pub stability_permutations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; receives report.json and the CSV tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn group_or_none(s: &str) -> Result<Option<Group>, String> {
    if s == "none" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityArgs {
    /// JSON config (or an earlier report) supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_parser = snake::<DistanceMetric>)]
    pub metric: Option<DistanceMetric>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_parser = snake::<CostFunction>)]
    pub cost: Option<CostFunction>,
    #[arg(long, value_delimiter = ',', value_parser = snake::<SolverKind>)]
    pub solvers: Option<Vec<SolverKind>>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn validate(args: ValidateArgs) -> Outcome<()> {
    let mut cfg = merge(&args, args.config.as_deref())?;
    let d = SuiteConfig::default();
    let suite = SuiteConfig {
        metric: *cfg.metric.get_or_insert(d.metric),
        tau: *cfg.tau.get_or_insert(d.tau),
        lambdas: cfg.lambdas.get_or_insert(d.lambdas).clone(),
        rater_counts: cfg.raters.get_or_insert(Counts(d.rater_counts)).0.clone(),
        solvers: cfg.solvers.get_or_insert(d.solvers).clone(),
        costs: cfg.costs.get_or_insert(d.costs).clone(),
        collaboration: cfg
            .collaboration
            .get_or_insert_with(|| d.collaboration.iter().map(|&(a, b)| Some(Group(a, b))).collect())
            .iter()
            .flatten()
            .map(|g| (g.0, g.1))
            .collect(),
        style_lambda: *cfg.style_lambda.get_or_insert(d.style_lambda),
        collaboration_lambda: *cfg.collaboration_lambda.get_or_insert(d.collaboration_lambda),
        stability_permutations: *cfg.stability_permutations.get_or_insert(d.stability_permutations),
        seed: *cfg.seed.get_or_insert(d.seed),
    };
    check_tau(suite.tau)?;
    if suite.lambdas.is_empty() || suite.solvers.is_empty() || suite.costs.is_empty() {
        return Err(invalid("--lambdas, --solvers and --costs must be non-empty"));
    }
    if suite.rater_counts.contains(&0) || suite.collaboration.iter().any(|&(a, b)| a == 0 || b == 0) {
        return Err(invalid("rater counts and group sizes must be positive"));
    }
    let out = required_path(&cfg.out, "out")?;
    let mut inputs = Inputs::default();
    let reference = match &cfg.reference {
        Some(p) => {
            cfg.images = None;
            load_dataset(p, &mut inputs)?
        }
        None => {
            let images = *cfg.images.get_or_insert(ReferenceSpec::default().images);
            synthetic_reference(&ReferenceSpec { images, seed: suite.seed, ..ReferenceSpec::default() })
        }
    };
    let model = load_model(&cfg.model, &mut inputs)?;
    let report = run_suite(&reference, &model, &suite);
    write_tables(&report, &out).runtime()?;
    write_envelope(&out.join("report.json"), "validate", &cfg, &inputs, Some(suite.seed), &report)
}

pub fn stability(args: StabilityArgs) -> Outcome<()> {
    let mut cfg = merge(&args, args.config.as_deref())?;
    let metric = *cfg.metric.get_or_insert(DistanceMetric::BoxIou);
    let tau = *cfg.tau.get_or_insert(0.5);
    let cost = *cfg.cost.get_or_insert(CostFunction::Soft);
    let solvers = cfg.solvers.get_or_insert_with(|| SolverKind::ALL.to_vec()).clone();
    let permutations = *cfg.permutations.get_or_insert(20);
    let seed = *cfg.seed.get_or_insert(0);
    check_tau(tau)?;
    if permutations < 2 {
        return Err(invalid("--permutations must be at least 2"));
    }
    let out = required_path(&cfg.out, "out")?;
    let mut inputs = Inputs::default();
    let d = load_dataset(&required_path(&cfg.dataset, "dataset")?, &mut inputs)?;
    let results = solvers
        .iter()
        .map(|&s| permutation_stability(&d, &KalosConfig::new(metric, tau).with_solver(s).with_cost(cost), permutations, seed))
        .collect::<Result<Vec<_>, _>>()
        .runtime()?;
    write_envelope(&out, "stability", &cfg, &inputs, Some(seed), &results)
}
