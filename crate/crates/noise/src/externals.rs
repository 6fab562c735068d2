//! Precomputed external inputs: a category similarity matrix and a pool of
//! false-positive box proposals.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::NoiseError;

/// Square cosine-similarity matrix keyed by category id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub categories: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn new(categories: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, NoiseError> {
        let n = categories.len();
        if n == 0 {
            return Err(NoiseError::Similarity("no categories".into()));
        }
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(NoiseError::Similarity(format!("matrix must be {n}×{n}")));
        }
        if let Some(v) = values.iter().flatten().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(NoiseError::Similarity(format!("value {v} outside [-1, 1]")));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = categories.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(NoiseError::Similarity(format!("duplicate category '{dup}'")));
        }
        Ok(SimilarityMatrix { categories, values })
    }

    /// JSON form: `{"categories": [...], "values": [[...], ...]}`.
    pub fn from_json_str(text: &str) -> Result<Self, NoiseError> {
        let raw: SimilarityMatrix =
            serde_json::from_str(text).map_err(|e| NoiseError::Similarity(e.to_string()))?;
        SimilarityMatrix::new(raw.categories, raw.values)
    }

    /// CSV form: header `,c1,c2,...`, then one row per category with its id first.
    pub fn from_csv_str(text: &str) -> Result<Self, NoiseError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| NoiseError::Similarity("empty file".into()))?;
        let categories: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let mut rows: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for line in lines {
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().trim().to_string();
            let row = fields
                .map(|f| f.trim().parse::<f64>().map_err(|e| NoiseError::Similarity(format!("row '{id}': {e}"))))
                .collect::<Result<Vec<f64>, _>>()?;
            rows.insert(id, row);
        }
        let values = categories
            .iter()
            .map(|c| rows.remove(c).ok_or_else(|| NoiseError::Similarity(format!("missing row for '{c}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        SimilarityMatrix::new(categories, values)
    }

    /// Loads JSON or CSV depending on the file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, NoiseError> {
        let path = path.as_ref();
        let text = read(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            SimilarityMatrix::from_csv_str(&text)
        } else {
            SimilarityMatrix::from_json_str(&text)
        }
    }

    /// Softmax over the `top_k` most similar categories at temperature `t`.
    /// `exclude_self` drops the source category from the candidates.
    pub fn transition(&self, source: &str, t: f64, top_k: usize, exclude_self: bool) -> Option<Vec<(String, f64)>> {
        let i = self.categories.iter().position(|c| c == source)?;
        let mut cand: Vec<(usize, f64)> = self.values[i]
            .iter()
            .enumerate()
            .filter(|&(j, _)| !(exclude_self && j == i))
            .map(|(j, &s)| (j, s))
            .collect();
        cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        cand.truncate(top_k);
        if cand.is_empty() {
            return None;
        }
        let m = cand[0].1;
        let weights: Vec<f64> = cand.iter().map(|(_, s)| ((s - m) / t).exp()).collect();
        let total: f64 = weights.iter().sum();
        Some(cand.iter().zip(weights).map(|((j, _), w)| (self.categories[*j].clone(), w / total)).collect())
    }
}

/// A candidate false-positive box in relative coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub image_id: String,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_id: Option<String>,
    #[serde(default)]
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProposalPool {
    pub proposals: Vec<Proposal>,
}

impl ProposalPool {
    pub fn from_json_str(text: &str) -> Result<Self, NoiseError> {
        let pool: ProposalPool = serde_json::from_str(text).map_err(|e| NoiseError::Proposals(e.to_string()))?;
        for p in &pool.proposals {
            let [_, _, w, h] = p.bbox;
            if !(w > 0.0 && h > 0.0) || p.bbox.iter().any(|v| !v.is_finite()) {
                return Err(NoiseError::Proposals(format!("bad box {:?} on image '{}'", p.bbox, p.image_id)));
            }
        }
        Ok(pool)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NoiseError> {
        ProposalPool::from_json_str(&read(path.as_ref())?)
    }

    pub fn for_image<'a>(&'a self, image_id: &'a str) -> impl Iterator<Item = &'a Proposal> + 'a {
        self.proposals.iter().filter(move |p| p.image_id == image_id)
    }
}

fn read(path: &Path) -> Result<String, NoiseError> {
    std::fs::read_to_string(path)
        .map_err(|e| NoiseError::Input { path: path.display().to_string(), message: e.to_string() })
}
