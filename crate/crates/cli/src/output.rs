//! Exit-code classification, input hashing and report envelopes.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use anyhow::Context;
use kalos_core::report::{to_canonical_json, write_csv, CsvCell};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Bad input: flags, enum values, missing or malformed files.
pub const EXIT_INVALID: u8 = 1;
/// Anything that fails after the inputs were accepted.
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type Outcome<T> = Result<T, Failure>;

pub fn invalid(message: impl Display) -> Failure {
    Failure { code: EXIT_INVALID, error: anyhow::anyhow!("{message}") }
}

pub trait Classify<T> {
    fn invalid(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Outcome<T> {
        self.map_err(|e| Failure { code: EXIT_INVALID, error: e.into() })
    }

    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure { code: EXIT_RUNTIME, error: e.into() })
    }
}

/// SHA-256 of every input file read, keyed by the path as given.
#[derive(Debug, Default)]
pub struct Inputs(BTreeMap<String, String>);

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Outcome<String> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).invalid()?;
        self.0.insert(path.display().to_string(), hex(&Sha256::digest(text.as_bytes())));
        Ok(text)
    }

    pub fn hash(&mut self, path: &Path) -> Outcome<()> {
        self.read(path).map(drop)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a C,
    inputs: &'a BTreeMap<String, String>,
    seed: Option<u64>,
    result: &'a R,
}

/// Writes `result` wrapped with the config echo, tool version, input hashes and seed.
pub fn write_envelope<C: Serialize, R: Serialize>(
    path: &Path,
    command: &'static str,
    config: &C,
    inputs: &Inputs,
    seed: Option<u64>,
    result: &R,
) -> Outcome<()> {
    let env = Envelope { tool: "kalos", version: env!("CARGO_PKG_VERSION"), command, config, inputs: &inputs.0, seed, result };
    let text = to_canonical_json(&env).runtime()?;
    create_parent(path)?;
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())).runtime()
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<CsvCell>]) -> Outcome<()> {
    create_parent(path)?;
    write_csv(path, header, rows).with_context(|| format!("cannot write {}", path.display())).runtime()
}

pub fn create_parent(path: &Path) -> Outcome<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display())).runtime()
        }
        _ => Ok(()),
    }
}

/// `dir/name.json` → `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}
