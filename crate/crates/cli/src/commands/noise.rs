use std::path::PathBuf;

use clap::Args;
use kalos_core::report::write_report;
use kalos_noise::{extract_errors, fit_noise_model, generate, NoiseError, NoiseModel, ProposalPool, SimilarityMatrix};
use serde::{Deserialize, Serialize};

use super::pipeline::load_dataset;
use crate::config::{merge, required, required_path};
use crate::output::{create_parent, invalid, sibling, write_envelope, Classify, Failure, Inputs, Outcome, EXIT_INVALID};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitNoiseArgs {
    /// JSON config (or an earlier report) supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Multi-rater bounding-box dataset to learn errors from.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Category similarity matrix (JSON or CSV).
    #[arg(long)]
    pub similarity: Option<PathBuf>,
    /// Detector proposal pool (JSON) for false positives.
    #[arg(long)]
    pub proposals: Option<PathBuf>,
    /// Extra IoU thresholds reported in the matching sweep.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    /// Model file; a summary report goes next to it as `<stem>.report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateArgs {
    /// JSON config (or an earlier report) supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Single-rater reference dataset.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Fitted noise model; the built-in reference model when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Noise magnitude; 0 reproduces the reference.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub raters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Synthetic dataset file; the ground-truth map goes next to it as `<stem>.correspondence.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Bad external files are input errors; everything else failed at run time.
fn classify(e: NoiseError) -> Failure {
    let code = match e {
        NoiseError::Input { .. }
        | NoiseError::Similarity(_)
        | NoiseError::Proposals(_)
        | NoiseError::Magnitude(_)
        | NoiseError::UnsupportedGeometry(_) => EXIT_INVALID,
        _ => crate::output::EXIT_RUNTIME,
    };
    Failure { code, error: e.into() }
}

pub fn load_model(path: &Option<PathBuf>, inputs: &mut Inputs) -> Outcome<NoiseModel> {
    match path {
        None => Ok(NoiseModel::reference()),
        Some(p) => {
            inputs.hash(p)?;
            NoiseModel::load(p).map_err(classify)
        }
    }
}

#[derive(Debug, Serialize)]
struct FitSummary<'a> {
    provenance: &'a kalos_noise::model::Provenance,
    sweep: &'a [kalos_noise::corpus::SweepRow],
}

pub fn fit(args: FitNoiseArgs) -> Outcome<()> {
    let mut cfg = merge(&args, args.config.as_deref())?;
    let sweep = cfg.sweep.get_or_insert_with(|| vec![0.3, 0.5, 0.7]).clone();
    let out = required_path(&cfg.out, "out")?;
    let mut inputs = Inputs::default();
    let d = load_dataset(&required_path(&cfg.dataset, "dataset")?, &mut inputs)?;
    let similarity = match &cfg.similarity {
        Some(p) => {
            inputs.hash(p)?;
            Some(SimilarityMatrix::load(p).map_err(classify)?)
        }
        None => None,
    };
    let proposals = match &cfg.proposals {
        Some(p) => {
            inputs.hash(p)?;
            Some(ProposalPool::load(p).map_err(classify)?)
        }
        None => None,
    };
    let corpus = extract_errors(&d, &sweep).map_err(classify)?;
    let model = fit_noise_model(&corpus, similarity, proposals).map_err(classify)?;
    create_parent(&out)?;
    model.save(&out).map_err(classify)?;
    let summary = FitSummary { provenance: &model.provenance, sweep: &corpus.sweep };
    write_envelope(&sibling(&out, "report.json"), "fit-noise", &cfg, &inputs, None, &summary)
}

pub fn generate_cmd(args: GenerateArgs) -> Outcome<()> {
    let mut cfg = merge(&args, args.config.as_deref())?;
    let lambda = *cfg.lambda.get_or_insert(1.0);
    let raters = *cfg.raters.get_or_insert(3);
    let seed = *cfg.seed.get_or_insert(0);
    if raters == 0 {
        return Err(invalid("--raters must be positive"));
    }
    let out = required_path(&cfg.out, "out")?;
    let mut inputs = Inputs::default();
    let reference = load_dataset(&required(&cfg.reference, "reference")?, &mut inputs)?;
    let model = load_model(&cfg.model, &mut inputs)?;
    let synth = generate(&reference, &model, lambda, raters, seed).map_err(classify)?;
    create_parent(&out)?;
    write_report(&synth.dataset.to_json(), &out).runtime()?;
    write_envelope(&sibling(&out, "correspondence.json"), "generate", &cfg, &inputs, Some(seed), &synth)
}
