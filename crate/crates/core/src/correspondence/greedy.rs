use std::collections::BTreeSet;

use super::{pair_order, CandidatePair, UnitSet};
use crate::dataset::Annotation;

/// Accepts pairs from cheapest to most expensive whenever the merged
/// cluster still holds at most one annotation per rater.
pub fn solve_greedy(image_id: &str, anns: &[&Annotation], pairs: &[CandidatePair]) -> UnitSet {
    let mut order: Vec<&CandidatePair> = pairs.iter().collect();
    order.sort_by(|p, q| pair_order(anns, p, q));

    let mut parent: Vec<usize> = (0..anns.len()).collect();
    let mut raters: Vec<BTreeSet<&str>> = anns.iter().map(|a| BTreeSet::from([a.rater_id.as_str()])).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for p in order {
        let ra = find(&mut parent, p.a);
        let rb = find(&mut parent, p.b);
        if ra == rb || !raters[ra].is_disjoint(&raters[rb]) {
            continue;
        }
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[drop] = keep;
        let moved = std::mem::take(&mut raters[drop]);
        raters[keep].extend(moved);
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); anns.len()];
    for i in 0..anns.len() {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    UnitSet::from_groups(image_id, anns, groups)
}

#[cfg(test)]
mod tests {
    use super::super::tests::ann;
    use super::super::*;

    #[test]
    fn two_by_two_trace() {
        let a1 = ann("a1", "A", "c", (0.0, 0.0, 0.2, 0.2));
        let a2 = ann("a2", "A", "c", (0.5, 0.5, 0.2, 0.2));
        let b1 = ann("b1", "B", "c", (0.0, 0.0, 0.2, 0.2));
        let b2 = ann("b2", "B", "c", (0.5, 0.5, 0.2, 0.2));
        let anns = canonical_order(&[&a1, &a2, &b1, &b2]);
        let idx = |id: &str| anns.iter().position(|a| a.id == id).unwrap();
        let mk = |x: &str, y: &str, cost: f64| {
            let (a, b) = (idx(x).min(idx(y)), idx(x).max(idx(y)));
            CandidatePair { a, b, d_loc: 0.0, different_category: false, cost }
        };
        let pairs = vec![mk("a1", "b2", -1.1), mk("a1", "b1", -2.0), mk("a2", "b1", -1.1), mk("a2", "b2", -2.0)];
        let u = solve_greedy("img", &anns, &pairs);
        assert_eq!(u.units, vec![vec!["a1".to_string(), "b1".into()], vec!["a2".into(), "b2".into()]]);
    }

    #[test]
    fn cow_and_calf_stay_apart() {
        let cow_a = ann("cow_A", "A", "cow", (0.2, 0.2, 0.4, 0.4));
        let calf_a = ann("calf_A", "A", "calf", (0.21, 0.2, 0.4, 0.4));
        let cow_b = ann("cow_B", "B", "cow", (0.21, 0.21, 0.4, 0.4));
        let calf_b = ann("calf_B", "B", "calf", (0.2, 0.21, 0.4, 0.4));
        let cfg = KalosConfig {
            metric: DistanceMetric::BoxIou,
            tau: 0.5,
            solver: SolverKind::Greedy,
            cost: CostFunction::Soft,
            prefilter: false,
        };
        let u = solve_image("img", &[&cow_a, &calf_a, &cow_b, &calf_b], &cfg).unwrap();
        assert_eq!(u.units, vec![vec!["calf_A".to_string(), "calf_B".into()], vec!["cow_A".into(), "cow_B".into()]]);
    }

    #[test]
    fn single_rater_gives_singletons() {
        let x = ann("x", "A", "c", (0.0, 0.0, 0.2, 0.2));
        let y = ann("y", "A", "c", (0.0, 0.0, 0.2, 0.2));
        let anns = canonical_order(&[&x, &y]);
        let pairs = build_candidates(&anns, DistanceMetric::BoxIou, 1.0, CostFunction::Soft, false).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(solve_greedy("img", &anns, &pairs).units.len(), 2);
    }
}
