#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kalos_core::Dataset;
use kalos_noise::{generate, synthetic_reference, NoiseModel, ReferenceSpec};

pub fn kalos(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kalos")).current_dir(dir).args(args).output().expect("spawn kalos")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Synthetic raters plus the reference rater they were derived from.
pub fn with_reference(synth: &Dataset, reference: &Dataset) -> Dataset {
    let mut d = synth.clone();
    d.raters.extend(reference.raters.iter().cloned());
    d.assignments.extend(reference.assignments.iter().cloned());
    d.annotations.extend(reference.annotations.iter().cloned());
    d
}

/// Writes `reference.json` (one rater) and `raters.json` (four raters) into `dir`.
pub fn write_inputs(dir: &Path) {
    let reference = synthetic_reference(&ReferenceSpec { images: 12, seed: 3, ..ReferenceSpec::default() });
    let synth = generate(&reference, &NoiseModel::reference(), 1.0, 3, 3).unwrap();
    let multi = with_reference(&synth.dataset, &reference);
    std::fs::write(dir.join("reference.json"), reference.to_json().to_string()).unwrap();
    std::fs::write(dir.join("raters.json"), multi.to_json().to_string()).unwrap();
}

/// Every file under `root` keyed by its path relative to `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// One invocation per subcommand, all writing below `out/`.
pub const SUBCOMMANDS: &[&[&str]] = &[
    &["calibrate", "--dataset", "raters.json", "--metrics", "box_iou,l2_centroid", "--bootstrap", "20", "--seed", "5", "--out", "out/calibration.json"],
    &["score", "--dataset", "raters.json", "--tau", "0.5", "--out", "out/score"],
    &["diagnose", "--dataset", "raters.json", "--second-session", "raters.json", "--out", "out/diagnose"],
    &["fit-noise", "--dataset", "raters.json", "--out", "out/model.json"],
    &["generate", "--reference", "reference.json", "--lambda", "1.5", "--raters", "2", "--seed", "9", "--out", "out/synthetic.json"],
    &["validate", "--images", "6", "--lambdas", "0.5,2", "--raters", "2,3", "--collaboration", "2-1", "--seed", "4", "--out", "out/validate"],
    &["stability", "--dataset", "raters.json", "--permutations", "5", "--seed", "2", "--out", "out/stability.json"],
];
