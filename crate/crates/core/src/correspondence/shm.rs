use std::collections::BTreeMap;

use super::{min_cost_assignment, pair_cost, CorrespondenceError, CostFunction, UnitSet};
use crate::dataset::Annotation;
use crate::geometry::{distance, DistanceMetric};

const INADMISSIBLE: f64 = 1e6;

/// Sequential Hungarian matching.
///
/// Raters are visited in id order. The first rater's annotations seed the
/// units; each later rater is matched to the existing units by an optimal
/// assignment on the mean member cost. A unit is admissible for an
/// annotation only when the mean member distance is within `tau`.
pub fn solve_shm(
    image_id: &str,
    anns: &[&Annotation],
    metric: DistanceMetric,
    tau: f64,
    cost: CostFunction,
) -> Result<UnitSet, CorrespondenceError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(CorrespondenceError::Threshold(tau));
    }
    let mut by_rater: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, a) in anns.iter().enumerate() {
        by_rater.entry(a.rater_id.as_str()).or_default().push(i);
    }
    let mut units: Vec<Vec<usize>> = Vec::new();
    for members in by_rater.values() {
        if units.is_empty() {
            units = members.iter().map(|&i| vec![i]).collect();
            continue;
        }
        let nu = units.len();
        let na = members.len();
        let size = nu + na;
        let mut matrix = vec![vec![0.0; size]; size];
        for (u, unit) in units.iter().enumerate() {
            for (k, &ai) in members.iter().enumerate() {
                let mut sum_d = 0.0;
                let mut sum_c = 0.0;
                for &m in unit {
                    let d = distance(&anns[m].geometry, &anns[ai].geometry, metric)?;
                    sum_d += d;
                    sum_c += pair_cost(d, anns[m].category_id != anns[ai].category_id, cost);
                }
                let n = unit.len() as f64;
                matrix[u][k] = if sum_d / n <= tau { sum_c / n } else { INADMISSIBLE };
            }
        }
        // Rows ≥ nu and columns ≥ na are zero-cost "stay unmatched" slots.
        let assignment = min_cost_assignment(&matrix);
        let mut matched = vec![false; na];
        for (u, &k) in assignment.iter().enumerate().take(nu) {
            if k < na && matrix[u][k] < INADMISSIBLE && matrix[u][k] < 0.0 {
                units[u].push(members[k]);
                matched[k] = true;
            }
        }
        for (k, &ai) in members.iter().enumerate() {
            if !matched[k] {
                units.push(vec![ai]);
            }
        }
    }
    Ok(UnitSet::from_groups(image_id, anns, units))
}
