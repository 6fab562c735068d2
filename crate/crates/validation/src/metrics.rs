//! Clustering accuracy of predicted units against generator ground truth.

use std::collections::{BTreeMap, BTreeSet};

use kalos_core::correspondence::UnitSet;
use kalos_core::dataset::{Annotation, Dataset};
use kalos_core::geometry::{distance, DistanceMetric};
use serde::{Deserialize, Serialize};

/// Synthetic annotation id to reference annotation id; `None` for false positives.
pub type Truth = BTreeMap<String, Option<String>>;

type Pair = (String, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PairOutcome {
    TruePositive { pair: [String; 2], d_loc: Option<f64> },
    FalsePositive { pair: [String; 2], d_loc: Option<f64> },
    MissedOpportunity { pair: [String; 2], d_loc: Option<f64> },
    /// A missed true pair whose member sits in a false pair of the same unit.
    CuckooEgg { missed: [String; 2], displacing: [String; 2], d_loc: Option<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub tp: usize,
    pub fp: usize,
    pub missed: usize,
    pub cuckoo_eggs: usize,
    /// `None` when no pair was predicted.
    pub precision: Option<f64>,
    /// `None` when the truth has no pairs.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub outcomes: Vec<PairOutcome>,
}

struct Member<'a> {
    ann: &'a Annotation,
    unit: usize,
    truth: Option<&'a str>,
}

fn members<'a>(units: &'a UnitSet, by_id: &BTreeMap<&str, &'a Annotation>, truth: &'a Truth) -> Vec<Member<'a>> {
    let mut out = Vec::new();
    for (u, ids) in units.units.iter().enumerate() {
        for id in ids {
            if let Some(ann) = by_id.get(id.as_str()) {
                out.push(Member { ann, unit: u, truth: truth.get(id).and_then(|t| t.as_deref()) });
            }
        }
    }
    out.sort_by(|a, b| a.ann.id.cmp(&b.ann.id));
    out
}

fn index(d: &Dataset) -> BTreeMap<&str, &Annotation> {
    d.annotations.iter().map(|a| (a.id.as_str(), a)).collect()
}

/// Rand index over cross-rater pairs where at least one member has a known
/// reference; `None` when no such pair exists.
pub fn filtered_rand_index(pred: &[UnitSet], d: &Dataset, truth: &Truth) -> Option<f64> {
    let by_id = index(d);
    let (mut agree, mut total) = (0u64, 0u64);
    for units in pred {
        let m = members(units, &by_id, truth);
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                let (a, b) = (&m[i], &m[j]);
                if a.ann.rater_id == b.ann.rater_id || (a.truth.is_none() && b.truth.is_none()) {
                    continue;
                }
                let true_co = a.truth.is_some() && a.truth == b.truth;
                total += 1;
                agree += u64::from(true_co == (a.unit == b.unit));
            }
        }
    }
    (total > 0).then(|| agree as f64 / total as f64)
}

fn d_loc(by_id: &BTreeMap<&str, &Annotation>, p: &Pair, metric: DistanceMetric) -> Option<f64> {
    distance(&by_id.get(p.0.as_str())?.geometry, &by_id.get(p.1.as_str())?.geometry, metric).ok()
}

/// Pairwise precision, recall and F1 with the outcome of every pair.
pub fn pair_metrics(pred: &[UnitSet], d: &Dataset, truth: &Truth, metric: DistanceMetric) -> PairMetrics {
    let by_id = index(d);
    let mut out = PairMetrics::default();
    for units in pred {
        let m = members(units, &by_id, truth);
        let (mut predicted, mut actual) = (BTreeSet::new(), BTreeSet::new());
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                let (a, b) = (&m[i], &m[j]);
                if a.ann.rater_id == b.ann.rater_id {
                    continue;
                }
                let pair: Pair = (a.ann.id.clone(), b.ann.id.clone());
                if a.unit == b.unit {
                    predicted.insert(pair.clone());
                }
                if a.truth.is_some() && a.truth == b.truth {
                    actual.insert(pair);
                }
            }
        }
        let false_pos: Vec<&Pair> = predicted.difference(&actual).collect();
        for p in predicted.intersection(&actual) {
            out.tp += 1;
            out.outcomes.push(PairOutcome::TruePositive { pair: [p.0.clone(), p.1.clone()], d_loc: d_loc(&by_id, p, metric) });
        }
        for p in &false_pos {
            out.fp += 1;
            out.outcomes.push(PairOutcome::FalsePositive { pair: [p.0.clone(), p.1.clone()], d_loc: d_loc(&by_id, p, metric) });
        }
        for p in actual.difference(&predicted) {
            out.missed += 1;
            let dl = d_loc(&by_id, p, metric);
            out.outcomes.push(PairOutcome::MissedOpportunity { pair: [p.0.clone(), p.1.clone()], d_loc: dl });
            let displacing = false_pos.iter().find(|f| [&f.0, &f.1].iter().any(|x| **x == p.0 || **x == p.1));
            if let Some(f) = displacing {
                out.cuckoo_eggs += 1;
                out.outcomes.push(PairOutcome::CuckooEgg {
                    missed: [p.0.clone(), p.1.clone()],
                    displacing: [f.0.clone(), f.1.clone()],
                    d_loc: dl,
                });
            }
        }
    }
    out.precision = (out.tp + out.fp > 0).then(|| out.tp as f64 / (out.tp + out.fp) as f64);
    out.recall = (out.tp + out.missed > 0).then(|| out.tp as f64 / (out.tp + out.missed) as f64);
    out.f1 = match (out.precision, out.recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    out
}

fn comb2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same items. Two
/// identical trivial partitions score 1.
pub fn adjusted_rand_index<A: Ord, B: Ord>(a: &[A], b: &[B]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let mut table: BTreeMap<(&A, &B), u64> = BTreeMap::new();
    let mut rows: BTreeMap<&A, u64> = BTreeMap::new();
    let mut cols: BTreeMap<&B, u64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| comb2(n)).sum();
    let sa: f64 = rows.values().map(|&n| comb2(n)).sum();
    let sb: f64 = cols.values().map(|&n| comb2(n)).sum();
    let total = comb2(a.len() as u64);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Unit label `(image, unit index)` of every annotation.
pub fn unit_labels(units: &[UnitSet]) -> BTreeMap<String, (String, usize)> {
    let mut out = BTreeMap::new();
    for us in units {
        for (u, ids) in us.units.iter().enumerate() {
            for id in ids {
                out.insert(id.clone(), (us.image_id.clone(), u));
            }
        }
    }
    out
}

/// ARI between two clusterings of the same annotations.
pub fn clustering_ari(a: &[UnitSet], b: &[UnitSet]) -> f64 {
    let (la, lb) = (unit_labels(a), unit_labels(b));
    let ids: Vec<&String> = la.keys().filter(|k| lb.contains_key(*k)).collect();
    let xa: Vec<&(String, usize)> = ids.iter().map(|k| &la[*k]).collect();
    let xb: Vec<&(String, usize)> = ids.iter().map(|k| &lb[*k]).collect();
    adjusted_rand_index(&xa, &xb)
}
