use std::path::PathBuf;

use clap::Args;
use kalos_core::pipeline::score_dataset;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::pipeline::PipelineOpts;
use crate::config::{merge, required_path, snake};
use crate::output::{write_envelope, Classify, Inputs, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Global,
    Both,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreArgs {
    /// JSON config (or an earlier report) supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineOpts,
    #[arg(long, value_parser = snake::<Aggregation>)]
    pub aggregation: Option<Aggregation>,
    /// Output directory; receives score.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: ScoreArgs) -> Outcome<()> {
    let mut cfg = merge(&args, args.config.as_deref())?;
    cfg.pipeline = cfg.pipeline.with_defaults();
    let aggregation = *cfg.aggregation.get_or_insert(Aggregation::Both);
    let out = required_path(&cfg.out, "out")?;
    let mut inputs = Inputs::default();
    let (d, kc) = cfg.pipeline.resolve(&mut inputs)?;
    let scores = score_dataset(&d, &kc).runtime()?;

    let mut result = serde_json::to_value(&scores).runtime()?;
    if let Value::Object(m) = &mut result {
        m.insert("tau".into(), kc.tau.into());
        match aggregation {
            Aggregation::Mean => {
                m.remove("global_alpha");
            }
            Aggregation::Global => {
                m.remove("mean_alpha");
                m.remove("mean_band");
            }
            Aggregation::Both => {}
        }
    }
    write_envelope(&out.join("score.json"), "score", &cfg, &inputs, Some(cfg.pipeline.seed()), &result)
}
