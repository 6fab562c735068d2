//! Nominal reliability matrices and Krippendorff's alpha.
//!
//! Rows are raters, columns are units. A rater who was assigned to an image
//! but contributed nothing to a unit holds an explicit `NoObject`; only
//! unassigned (or out-of-scope) raters hold `Missing`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspondence::UnitSet;
use crate::dataset::{Annotation, CategoryScope};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Category(String),
    NoObject,
    Missing,
}

/// A pairable cell value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Category(String),
    NoObject,
}

impl Cell {
    pub fn value(&self) -> Option<Value> {
        match self {
            Cell::Category(c) => Some(Value::Category(c.clone())),
            Cell::NoObject => Some(Value::NoObject),
            Cell::Missing => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityMatrix {
    pub image_id: String,
    pub raters: Vec<String>,
    /// Annotation ids of each column's unit.
    pub units: Vec<Vec<String>>,
    /// Modal member category of each column (lexicographic tie-break).
    pub consensus: Vec<String>,
    /// `cells[r][u]` for rater row `r` and unit column `u`.
    pub cells: Vec<Vec<Cell>>,
}

impl ReliabilityMatrix {
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    /// No units at all: every assigned rater left the image blank.
    pub fn is_empty_image(&self) -> bool {
        self.units.is_empty()
    }

    pub fn column(&self, u: usize) -> Vec<Cell> {
        self.cells.iter().map(|row| row[u].clone()).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = Vec<Cell>> + '_ {
        (0..self.n_units()).map(|u| self.column(u))
    }

    /// Columns used for alpha; an empty image yields one virtual column of
    /// `NoObject` for every assigned rater.
    pub fn columns_with_virtual(&self) -> Vec<Vec<Cell>> {
        if self.is_empty_image() {
            vec![vec![Cell::NoObject; self.raters.len()]]
        } else {
            self.columns().collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReliabilityError {
    #[error("unit on image '{image}' references annotation '{annotation}' from unassigned rater '{rater}'")]
    UnassignedRater { image: String, annotation: String, rater: String },
    #[error("unit on image '{image}' references unknown annotation '{annotation}'")]
    UnknownAnnotation { image: String, annotation: String },
    #[error("unit on image '{image}' holds two annotations from rater '{rater}'")]
    DuplicateRater { image: String, rater: String },
    #[error("alpha is undefined on every image")]
    AllUndefined,
}

/// Modal category of a unit's members; ties go to the lexicographically smallest id.
pub fn consensus_category<'a>(cats: impl Iterator<Item = &'a str>) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in cats {
        *counts.entry(c).or_default() += 1;
    }
    let max = counts.values().copied().max()?;
    counts.into_iter().find(|(_, n)| *n == max).map(|(c, _)| c.to_string())
}

/// Builds the raters × units matrix for one image.
///
/// `assigned` maps each rater assigned to the image to its category scope.
pub fn build_reliability_matrix(
    units: &UnitSet,
    annotations: &[&Annotation],
    assigned: &BTreeMap<&str, &CategoryScope>,
) -> Result<ReliabilityMatrix, ReliabilityError> {
    let by_id: BTreeMap<&str, &Annotation> = annotations.iter().map(|a| (a.id.as_str(), *a)).collect();
    let raters: Vec<String> = assigned.keys().map(|r| r.to_string()).collect();
    let row_of: BTreeMap<&str, usize> = assigned.keys().enumerate().map(|(i, r)| (*r, i)).collect();
    let mut cells = vec![Vec::with_capacity(units.units.len()); raters.len()];
    let mut consensus = Vec::with_capacity(units.units.len());

    for unit in &units.units {
        let mut members = Vec::with_capacity(unit.len());
        for id in unit {
            let a = by_id.get(id.as_str()).ok_or_else(|| ReliabilityError::UnknownAnnotation {
                image: units.image_id.clone(),
                annotation: id.clone(),
            })?;
            if !row_of.contains_key(a.rater_id.as_str()) {
                return Err(ReliabilityError::UnassignedRater {
                    image: units.image_id.clone(),
                    annotation: a.id.clone(),
                    rater: a.rater_id.clone(),
                });
            }
            members.push(*a);
        }
        let cons = consensus_category(members.iter().map(|a| a.category_id.as_str())).unwrap_or_default();
        let mut column: Vec<Cell> = assigned
            .values()
            .map(|scope| if scope.contains(&cons) { Cell::NoObject } else { Cell::Missing })
            .collect();
        let mut seen = BTreeSet::new();
        for a in members {
            if !seen.insert(a.rater_id.as_str()) {
                return Err(ReliabilityError::DuplicateRater {
                    image: units.image_id.clone(),
                    rater: a.rater_id.clone(),
                });
            }
            column[row_of[a.rater_id.as_str()]] = Cell::Category(a.category_id.clone());
        }
        for (row, cell) in cells.iter_mut().zip(column) {
            row.push(cell);
        }
        consensus.push(cons);
    }
    Ok(ReliabilityMatrix { image_id: units.image_id.clone(), raters, units: units.units.clone(), consensus, cells })
}

/// Pairwise value coincidences accumulated over units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoincidenceCounts {
    pub o: BTreeMap<(Value, Value), f64>,
    pub n_c: BTreeMap<Value, f64>,
    pub n: f64,
}

impl CoincidenceCounts {
    /// Adds one unit: every ordered pair of pairable values gets weight `1/(m_u − 1)`.
    pub fn add_column<'a>(&mut self, column: impl IntoIterator<Item = &'a Cell>) {
        let mut tally: BTreeMap<Value, f64> = BTreeMap::new();
        let mut m = 0.0;
        for c in column {
            if let Some(v) = c.value() {
                *tally.entry(v).or_default() += 1.0;
                m += 1.0;
            }
        }
        if m < 2.0 {
            return;
        }
        let w = 1.0 / (m - 1.0);
        for (c, &nc) in &tally {
            for (k, &nk) in &tally {
                let pairs = if c == k { nc * (nc - 1.0) } else { nc * nk };
                if pairs > 0.0 {
                    *self.o.entry((c.clone(), k.clone())).or_default() += pairs * w;
                }
            }
            *self.n_c.entry(c.clone()).or_default() += nc;
        }
        self.n += m;
    }

    pub fn from_columns<C: AsRef<[Cell]>>(columns: impl IntoIterator<Item = C>) -> Self {
        let mut c = CoincidenceCounts::default();
        for col in columns {
            c.add_column(col.as_ref());
        }
        c
    }

    pub fn merge(&mut self, other: &CoincidenceCounts) {
        for (k, v) in &other.o {
            *self.o.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.n_c {
            *self.n_c.entry(k.clone()).or_default() += v;
        }
        self.n += other.n;
    }
}

pub fn coincidence_counts(m: &ReliabilityMatrix) -> CoincidenceCounts {
    CoincidenceCounts::from_columns(m.columns())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    NearPerfect,
    Substantial,
    Moderate,
    Weak,
    Systematic,
}

impl Band {
    pub fn of(alpha: f64) -> Band {
        if alpha >= 0.8 {
            Band::NearPerfect
        } else if alpha >= 0.6 {
            Band::Substantial
        } else if alpha >= 0.4 {
            Band::Moderate
        } else if alpha >= 0.0 {
            Band::Weak
        } else {
            Band::Systematic
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaScore {
    /// `None` when fewer than two pairable values exist.
    pub value: Option<f64>,
    pub n_pairable: f64,
    pub band: Option<Band>,
}

impl AlphaScore {
    pub fn defined(value: f64, n_pairable: f64) -> Self {
        AlphaScore { value: Some(value), n_pairable, band: Some(Band::of(value)) }
    }

    pub fn undefined(n_pairable: f64) -> Self {
        AlphaScore { value: None, n_pairable, band: None }
    }
}

/// Nominal Krippendorff's alpha from coincidence counts.
pub fn krippendorff_alpha(c: &CoincidenceCounts) -> AlphaScore {
    let n = c.n;
    if n < 2.0 {
        return AlphaScore::undefined(n);
    }
    let diag: f64 = c.o.iter().filter(|((a, b), _)| a == b).map(|(_, v)| v).sum();
    let expected: f64 = c.n_c.values().map(|nc| nc * (nc - 1.0)).sum();
    let num = (n - 1.0) * diag - expected;
    let den = n * (n - 1.0) - expected;
    let scale = n * (n - 1.0);
    if den.abs() <= 1e-12 * scale {
        // A single value everywhere: perfect agreement by convention.
        return AlphaScore::defined(1.0, n);
    }
    AlphaScore::defined((num / den).clamp(-1.0, 1.0), n)
}

/// Alpha of a single image; empty images with at least two assigned raters score 1.
pub fn image_alpha(m: &ReliabilityMatrix) -> AlphaScore {
    if m.is_empty_image() {
        return if m.raters.len() >= 2 {
            AlphaScore::defined(1.0, m.raters.len() as f64)
        } else {
            AlphaScore::undefined(m.raters.len() as f64)
        };
    }
    krippendorff_alpha(&coincidence_counts(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAlpha {
    pub image_id: String,
    pub alpha: Option<f64>,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAlpha {
    pub mean: f64,
    pub per_image: Vec<ImageAlpha>,
    pub undefined_count: usize,
    pub empty_count: usize,
}

/// Dataset score: arithmetic mean of the defined per-image alphas.
pub fn mean_alpha(matrices: &[ReliabilityMatrix]) -> Result<MeanAlpha, ReliabilityError> {
    let per_image: Vec<ImageAlpha> = matrices
        .iter()
        .map(|m| ImageAlpha { image_id: m.image_id.clone(), alpha: image_alpha(m).value, empty: m.is_empty_image() })
        .collect();
    let defined: Vec<f64> = per_image.iter().filter_map(|p| p.alpha).collect();
    if defined.is_empty() {
        return Err(ReliabilityError::AllUndefined);
    }
    Ok(MeanAlpha {
        mean: defined.iter().sum::<f64>() / defined.len() as f64,
        undefined_count: per_image.len() - defined.len(),
        empty_count: matrices.iter().filter(|m| m.is_empty_image()).count(),
        per_image,
    })
}

/// Single alpha over all columns of all images, with one virtual agreeing
/// column per empty image.
pub fn global_alpha(matrices: &[ReliabilityMatrix]) -> AlphaScore {
    let mut c = CoincidenceCounts::default();
    for m in matrices {
        for col in m.columns_with_virtual() {
            c.add_column(&col);
        }
    }
    krippendorff_alpha(&c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(s: &str) -> Cell {
        Cell::Category(s.into())
    }

    fn alpha_of(rows: &[Vec<Cell>]) -> Option<f64> {
        let cols = (0..rows[0].len()).map(|u| rows.iter().map(|r| r[u].clone()).collect::<Vec<_>>());
        krippendorff_alpha(&CoincidenceCounts::from_columns(cols)).value
    }

    #[test]
    fn coincidence_weights() {
        let c = CoincidenceCounts::from_columns([vec![cat("a"), cat("a")]]);
        assert_eq!(c.o[&(Value::Category("a".into()), Value::Category("a".into()))], 2.0);
        assert_eq!(c.n, 2.0);

        let c = CoincidenceCounts::from_columns([vec![cat("a"), cat("a"), cat("b")]]);
        let a = Value::Category("a".into());
        let b = Value::Category("b".into());
        assert_eq!(c.o[&(a.clone(), a.clone())], 1.0);
        assert_eq!(c.o[&(a.clone(), b.clone())], 1.0);
        assert_eq!(c.o[&(b.clone(), a)], 1.0);
        assert_eq!(c.n, 3.0);

        let c = CoincidenceCounts::from_columns([vec![cat("a"), Cell::Missing]]);
        assert_eq!(c.n, 0.0);
        assert!(c.o.is_empty());
    }

    #[test]
    fn alpha_anchors() {
        let r1 = vec![cat("a"), cat("a"), cat("b"), cat("b")];
        let r2 = vec![cat("a"), cat("b"), cat("b"), cat("b")];
        assert!((alpha_of(&[r1, r2]).unwrap() - 16.0 / 30.0).abs() < 1e-15);
        let swapped = alpha_of(&[vec![cat("a"), cat("b")], vec![cat("b"), cat("a")]]).unwrap();
        assert!((swapped + 0.5).abs() < 1e-15);
        assert_eq!(alpha_of(&[vec![cat("a"); 3], vec![cat("a"); 3]]), Some(1.0));
        assert_eq!(alpha_of(&[vec![cat("a")], vec![Cell::Missing]]), None);
    }

    #[test]
    fn bands() {
        assert_eq!(Band::of(0.8), Band::NearPerfect);
        assert_eq!(Band::of(0.61), Band::Substantial);
        assert_eq!(Band::of(0.4), Band::Moderate);
        assert_eq!(Band::of(0.1), Band::Weak);
        assert_eq!(Band::of(-0.01), Band::Systematic);
    }

    #[test]
    fn consensus_ties_are_lexicographic() {
        assert_eq!(consensus_category(["b", "a"].into_iter()), Some("a".into()));
        assert_eq!(consensus_category(["b", "a", "b"].into_iter()), Some("b".into()));
        assert_eq!(consensus_category(std::iter::empty()), None);
    }
}
