use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{annotation_order, CandidatePair, UnitSet};
use crate::dataset::Annotation;

struct Cluster<'a> {
    members: Vec<usize>,
    raters: BTreeSet<&'a str>,
}

/// Average-linkage agglomerative clustering over the candidate graph.
///
/// Pairs outside the candidate set count as distance 1 and cost 0. Two
/// clusters may merge only if they share no rater and their average
/// distance is within `tau`; the admissible merge with the lowest average
/// cost is taken first.
pub fn solve_ahc(image_id: &str, anns: &[&Annotation], pairs: &[CandidatePair], tau: f64) -> UnitSet {
    let n = anns.len();
    let mut d = vec![vec![1.0; n]; n];
    let mut c = vec![vec![0.0; n]; n];
    for p in pairs {
        d[p.a][p.b] = p.d_loc;
        d[p.b][p.a] = p.d_loc;
        c[p.a][p.b] = p.cost;
        c[p.b][p.a] = p.cost;
    }
    let mut clusters: Vec<Cluster> = (0..n)
        .map(|i| Cluster { members: vec![i], raters: BTreeSet::from([anns[i].rater_id.as_str()]) })
        .collect();

    let linkage = |x: &Cluster, y: &Cluster| {
        let mut sd = 0.0;
        let mut sc = 0.0;
        for &i in &x.members {
            for &j in &y.members {
                sd += d[i][j];
                sc += c[i][j];
            }
        }
        let k = (x.members.len() * y.members.len()) as f64;
        (sc / k, sd / k)
    };
    let first = |cl: &Cluster| cl.members.iter().copied().min_by(|&i, &j| annotation_order(anns[i], anns[j])).unwrap();

    loop {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for x in 0..clusters.len() {
            for y in x + 1..clusters.len() {
                if !clusters[x].raters.is_disjoint(&clusters[y].raters) {
                    continue;
                }
                let (cost, dist) = linkage(&clusters[x], &clusters[y]);
                if dist > tau || cost >= 0.0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bc, bd, bx, by)) => cost
                        .total_cmp(&bc)
                        .then_with(|| dist.total_cmp(&bd))
                        .then_with(|| {
                            let key = |p: usize, q: usize| {
                                let (fp, fq) = (first(&clusters[p]), first(&clusters[q]));
                                if annotation_order(anns[fp], anns[fq]) == Ordering::Greater { (fq, fp) } else { (fp, fq) }
                            };
                            let (a0, a1) = key(x, y);
                            let (b0, b1) = key(bx, by);
                            annotation_order(anns[a0], anns[b0]).then_with(|| annotation_order(anns[a1], anns[b1]))
                        })
                        == Ordering::Less,
                };
                if better {
                    best = Some((cost, dist, x, y));
                }
            }
        }
        let Some((_, _, x, y)) = best else { break };
        let merged = clusters.swap_remove(y);
        clusters[x].members.extend(merged.members);
        clusters[x].raters.extend(merged.raters);
    }
    UnitSet::from_groups(image_id, anns, clusters.into_iter().map(|cl| cl.members).collect())
}
