use std::path::{Path, PathBuf};

use clap::Args;
use kalos_core::dataset::Dataset;
use kalos_core::diagnostics::{
    class_table, collaboration_matrix, histogram, intra_annotator, localization_sensitivity, per_image_distribution,
    vitality_table, IntraResult, VitalityMode,
};
use kalos_core::pipeline::run_pipeline;
use kalos_core::report::CsvCell;
use kalos_core::KalosConfig;
use serde::{Deserialize, Serialize};

use super::pipeline::{load_dataset, PipelineOpts};
use crate::config::{merge, required_path, snake};
use crate::output::{invalid, write_envelope, write_table, Classify, Inputs, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Lsa,
    Class,
    Vitality,
    Collab,
    Dist,
}

const ALL_ANALYSES: [Analysis; 5] = [Analysis::Lsa, Analysis::Class, Analysis::Vitality, Analysis::Collab, Analysis::Dist];

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnoseArgs {
    /// JSON config (or an earlier report) supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineOpts,
    /// Comma-separated subset of lsa,class,vitality,collab,dist.
    #[arg(long, value_delimiter = ',', value_parser = snake::<Analysis>)]
    pub analyses: Option<Vec<Analysis>>,
    /// Similarity thresholds for the sensitivity curve, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub lsa_thresholds: Option<Vec<f64>>,
    #[arg(long, value_parser = snake::<VitalityMode>)]
    pub vitality_mode: Option<VitalityMode>,
    /// Bins of the per-image alpha histogram on [-1, 1].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Second annotation session of the same raters, for self-agreement.
    #[arg(long)]
    pub second_session: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_thresholds(tau: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let anchor = 1.0 - tau;
    if anchor > 0.0 && !t.iter().any(|x| (x - anchor).abs() < 1e-12) {
        t.push(anchor);
        t.sort_by(f64::total_cmp);
    }
    t
}

pub fn run(args: DiagnoseArgs) -> Outcome<()> {
    let mut cfg = merge(&args, args.config.as_deref())?;
    cfg.pipeline = cfg.pipeline.with_defaults();
    let mut analyses = cfg.analyses.get_or_insert_with(|| ALL_ANALYSES.to_vec()).clone();
    analyses.sort();
    analyses.dedup();
    let mode = *cfg.vitality_mode.get_or_insert(VitalityMode::Rerun);
    let bins = *cfg.bins.get_or_insert(20);
    if bins == 0 {
        return Err(invalid("--bins must be positive"));
    }
    let out = required_path(&cfg.out, "out")?;
    let mut inputs = Inputs::default();
    let (d, kc) = cfg.pipeline.resolve(&mut inputs)?;
    let thresholds = cfg.lsa_thresholds.get_or_insert_with(|| default_thresholds(kc.tau)).clone();
    let second = cfg.second_session.as_ref().map(|p| load_dataset(p, &mut inputs)).transpose()?;
    let seed = Some(cfg.pipeline.seed());
    let run = run_pipeline(&d, &kc).runtime()?;
    let reports = Reports { out: &out, cfg: &cfg, inputs: &inputs, seed };

    for a in &analyses {
        match a {
            Analysis::Lsa => {
                let curve = localization_sensitivity(&d, &kc, &thresholds).runtime()?;
                let rows = curve.points.iter().map(|p| vec![p.tau_s.into(), p.mean_alpha.into()]).collect::<Vec<_>>();
                write_table(&out.join("lsa.csv"), &["tau_s", "mean_alpha"], &rows)?;
                reports.write("lsa", &curve)?;
            }
            Analysis::Class => {
                let table = class_table(&run.matrices);
                let rows = table
                    .iter()
                    .map(|c| vec![c.category.as_str().into(), c.alpha.value.into(), c.support.into()])
                    .collect::<Vec<_>>();
                write_table(&out.join("class.csv"), &["category", "alpha", "support"], &rows)?;
                reports.write("class", &table)?;
            }
            Analysis::Vitality => {
                let table = vitality_table(&d, &kc, mode).runtime()?;
                let rows = table
                    .iter()
                    .map(|v| vec![v.rater.as_str().into(), v.alpha_full.into(), v.alpha_without.into(), v.vitality.into()])
                    .collect::<Vec<_>>();
                write_table(&out.join("vitality.csv"), &["rater", "alpha_full", "alpha_without", "vitality"], &rows)?;
                reports.write("vitality", &table)?;
            }
            Analysis::Collab => {
                let m = collaboration_matrix(&d, &kc).runtime()?;
                let mut header = vec!["rater"];
                header.extend(m.raters.iter().map(String::as_str));
                let rows = m
                    .raters
                    .iter()
                    .map(|a| {
                        let mut row = vec![CsvCell::from(a.as_str())];
                        row.extend(m.raters.iter().map(|b| if a == b { CsvCell::Empty } else { m.get(a, b).into() }));
                        row
                    })
                    .collect::<Vec<_>>();
                write_table(&out.join("collab.csv"), &header, &rows)?;
                reports.write("collab", &m)?;
            }
            Analysis::Dist => {
                let dist = per_image_distribution(&run.matrices);
                let lo = dist.sorted.first().copied().unwrap_or(-1.0).min(-1.0);
                let rows = histogram(&dist.sorted, lo, 1.0, bins)
                    .into_iter()
                    .map(|(start, count)| vec![start.into(), count.into()])
                    .collect::<Vec<_>>();
                write_table(&out.join("dist.csv"), &["bin_start", "count"], &rows)?;
                reports.write("dist", &dist)?;
            }
        }
    }
    if let Some(d1) = &second {
        reports.write("intra", &intra_table(&d, d1, &kc)?)?;
    }
    Ok(())
}

/// Self-agreement of every rater present in both sessions.
fn intra_table(d0: &Dataset, d1: &Dataset, kc: &KalosConfig) -> Outcome<Vec<IntraResult>> {
    d0.raters
        .iter()
        .filter(|r| d1.raters.iter().any(|s| s.id == r.id))
        .map(|r| intra_annotator(d0, d1, &r.id, kc).runtime())
        .collect()
}

struct Reports<'a> {
    out: &'a Path,
    cfg: &'a DiagnoseArgs,
    inputs: &'a Inputs,
    seed: Option<u64>,
}

impl Reports<'_> {
    fn write<R: Serialize>(&self, name: &str, result: &R) -> Outcome<()> {
        write_envelope(&self.out.join(format!("{name}.json")), "diagnose", self.cfg, self.inputs, self.seed, result)
    }
}
