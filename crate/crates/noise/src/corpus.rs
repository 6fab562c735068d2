//! Pairwise error extraction: every pair of raters sharing an image is
//! matched greedily at IoU ≥ 0.5 and the disagreements are recorded.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};

use kalos_core::dataset::{Annotation, BBox, Dataset, Geometry, GeometryKind};
use serde::{Deserialize, Serialize};

use crate::NoiseError;

/// Fixed IoU threshold defining a matched pair.
pub const MATCH_IOU: f64 = 0.5;
/// Minimum fraction of a child's area inside its parent.
const CHILD_CONTAINMENT: f64 = 0.5;
/// The union of children must beat the best single match by this margin.
const UNION_MARGIN: f64 = 0.1;

/// Two annotations from different raters matched at IoU ≥ 0.5.
/// Offsets and ratios are taken from `ann_a` to `ann_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub image_id: String,
    pub ann_a: String,
    pub ann_b: String,
    pub category_a: String,
    pub category_b: String,
    pub d_loc: f64,
    pub area_avg: f64,
    pub translation: [f64; 2],
    /// `ln(w_b / w_a)` and `ln(h_b / h_a)`.
    pub log_scale: [f64; 2],
    /// Angle of the translation in `[0, 2π)`.
    pub direction: f64,
    pub same_category: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedRecord {
    pub image_id: String,
    pub rater_id: String,
    pub annotation_id: String,
    /// Annotations by the same rater on the image.
    pub image_count: usize,
    pub relative_area: f64,
}

/// One annotation seen in one rater pair, labelled by outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub relative_area: f64,
    pub unmatched: bool,
    pub parent: bool,
}

/// Unmatched count of one rater pair on one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairImageRecord {
    pub image_id: String,
    pub rater_a: String,
    pub rater_b: String,
    /// Mean annotation count of the two raters.
    pub mean_count: f64,
    pub unmatched: u64,
}

/// Geometry of a child box relative to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChildRecord {
    pub offset: [f64; 2],
    pub log_scale: [f64; 2],
    pub area_ratio: f64,
}

impl ChildRecord {
    pub fn of(parent: &BBox, child: &BBox) -> Self {
        let (pc, cc) = (parent.center(), child.center());
        ChildRecord {
            offset: [cc.0 - pc.0, cc.1 - pc.1],
            log_scale: [(child.w / parent.w).ln(), (child.h / parent.h).ln()],
            area_ratio: child.area() / parent.area(),
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.offset[0].hypot(self.offset[1])
    }
}

/// Angle between two offset vectors as a fraction of π, or `None` if either is zero.
pub fn normalized_angle(a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let (na, nb) = (a[0].hypot(a[1]), b[0].hypot(b[1]));
    if na <= 1e-12 || nb <= 1e-12 {
        return None;
    }
    let cos = ((a[0] * b[0] + a[1] * b[1]) / (na * nb)).clamp(-1.0, 1.0);
    Some(cos.acos() / PI)
}

/// One annotation covering the union of two or more annotations by another rater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyRecord {
    pub image_id: String,
    pub parent: String,
    pub children: Vec<String>,
    pub parent_area: f64,
    pub child_geometry: Vec<ChildRecord>,
    /// Angle between the two largest children, as a fraction of π.
    pub child_angle: Option<f64>,
}

/// Two same-category annotations of one rater, scored as if they were fragments of their union.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiblingPair {
    pub union_area: f64,
    pub children: [ChildRecord; 2],
    pub angle: Option<f64>,
}

impl SiblingPair {
    pub fn of(a: &BBox, b: &BBox) -> Self {
        let u = a.union_box(b);
        let children = [ChildRecord::of(&u, a), ChildRecord::of(&u, b)];
        SiblingPair { union_area: u.area(), children, angle: normalized_angle(children[0].offset, children[1].offset) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub matched: usize,
    pub unmatched: usize,
    pub mean_distance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorCorpus {
    pub matched: Vec<MatchedPair>,
    pub unmatched: Vec<UnmatchedRecord>,
    pub instances: Vec<InstanceRecord>,
    pub pair_images: Vec<PairImageRecord>,
    pub topology: Vec<TopologyRecord>,
    pub siblings: Vec<SiblingPair>,
    /// `confusion[a][b]` counts matched pairs labelled `a` by the first rater and `b` by the second.
    pub confusion: BTreeMap<String, BTreeMap<String, u64>>,
    pub sweep: Vec<SweepRow>,
}

pub(crate) fn bbox_of(a: &Annotation) -> Result<BBox, NoiseError> {
    match &a.geometry {
        Geometry::Box2D(b) => Ok(*b),
        g => Err(NoiseError::UnsupportedGeometry(g.kind())),
    }
}

pub(crate) fn require_boxes(d: &Dataset) -> Result<(), NoiseError> {
    match d.geometry_kind() {
        None | Some(GeometryKind::Bbox) => Ok(()),
        Some(k) => Err(NoiseError::UnsupportedGeometry(k)),
    }
}

/// Greedy one-to-one matching on IoU descending; ties break on positions.
pub(crate) fn greedy_match(a: &[BBox], b: &[BBox], threshold: f64, skip_a: &[bool], skip_b: &[bool]) -> Vec<(usize, usize, f64)> {
    let mut cand = Vec::new();
    for (i, ba) in a.iter().enumerate().filter(|(i, _)| !skip_a[*i]) {
        for (j, bb) in b.iter().enumerate().filter(|(j, _)| !skip_b[*j]) {
            let iou = ba.iou(bb);
            if iou >= threshold {
                cand.push((i, j, iou));
            }
        }
    }
    cand.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let (mut used_a, mut used_b) = (vec![false; a.len()], vec![false; b.len()]);
    let mut out = Vec::new();
    for (i, j, iou) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, iou));
        }
    }
    out
}

/// Parents in `p` whose children in `c` jointly cover them better than any single box.
fn find_topology(p: &[BBox], c: &[BBox], used_p: &mut [bool], used_c: &mut [bool]) -> Vec<(usize, Vec<usize>)> {
    let mut found = Vec::new();
    for (i, parent) in p.iter().enumerate() {
        if used_p[i] {
            continue;
        }
        let children: Vec<usize> = (0..c.len())
            .filter(|&j| !used_c[j] && c[j].intersection_area(parent) >= CHILD_CONTAINMENT * c[j].area())
            .collect();
        if children.len() < 2 {
            continue;
        }
        let union = children[1..].iter().fold(c[children[0]], |u, &j| u.union_box(&c[j]));
        let best_single = c.iter().map(|b| b.iou(parent)).fold(0.0, f64::max);
        let joint = union.iou(parent);
        if joint >= MATCH_IOU && joint > best_single + UNION_MARGIN {
            used_p[i] = true;
            for &j in &children {
                used_c[j] = true;
            }
            found.push((i, children));
        }
    }
    found
}

fn sorted_annotations<'a>(anns: &[&'a Annotation], rater: &str) -> Vec<&'a Annotation> {
    let mut v: Vec<&Annotation> = anns.iter().copied().filter(|a| a.rater_id == rater).collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

fn direction(t: [f64; 2]) -> f64 {
    t[1].atan2(t[0]).rem_euclid(TAU)
}

/// Builds the error corpus at IoU 0.5; `sweep_thresholds` adds matched and
/// unmatched counts at other thresholds for comparison.
pub fn extract_errors(d: &Dataset, sweep_thresholds: &[f64]) -> Result<ErrorCorpus, NoiseError> {
    require_boxes(d)?;
    let index = d.index();
    let mut corpus = ErrorCorpus::default();
    let mut shared = false;
    let mut sweep: Vec<(usize, usize, f64)> = vec![(0, 0, 0.0); sweep_thresholds.len()];

    for (&img, anns) in &index.by_image {
        let mut raters = index.assigned_raters(img);
        raters.sort_unstable();
        if raters.len() >= 2 {
            shared = true;
        }
        let per_rater: Vec<Vec<&Annotation>> = raters.iter().map(|r| sorted_annotations(anns, r)).collect();
        let boxes: Vec<Vec<BBox>> =
            per_rater.iter().map(|v| v.iter().map(|a| bbox_of(a)).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;

        for ri in 0..raters.len() {
            for rj in ri + 1..raters.len() {
                let (aa, ab) = (&per_rater[ri], &per_rater[rj]);
                let (ba, bb) = (&boxes[ri], &boxes[rj]);
                let (mut used_a, mut used_b) = (vec![false; ba.len()], vec![false; bb.len()]);
                let mut parent_a = vec![false; ba.len()];
                let mut parent_b = vec![false; bb.len()];
                let mut topo = Vec::new();
                for (i, ch) in find_topology(ba, bb, &mut used_a, &mut used_b) {
                    parent_a[i] = true;
                    topo.push((aa[i], ba[i], ch.iter().map(|&j| (ab[j], bb[j])).collect::<Vec<_>>()));
                }
                for (j, ch) in find_topology(bb, ba, &mut used_b, &mut used_a) {
                    parent_b[j] = true;
                    topo.push((ab[j], bb[j], ch.iter().map(|&i| (aa[i], ba[i])).collect::<Vec<_>>()));
                }
                for (parent, pbox, children) in topo {
                    corpus.topology.push(topology_record(img, parent, &pbox, children));
                }

                let matches = greedy_match(ba, bb, MATCH_IOU, &used_a, &used_b);
                let (mut matched_a, mut matched_b) = (used_a.clone(), used_b.clone());
                for &(i, j, iou) in &matches {
                    matched_a[i] = true;
                    matched_b[j] = true;
                    corpus.matched.push(matched_pair(img, aa[i], ab[j], &ba[i], &bb[j], iou));
                    *corpus
                        .confusion
                        .entry(aa[i].category_id.clone())
                        .or_default()
                        .entry(ab[j].category_id.clone())
                        .or_default() += 1;
                }
                let mut n_unmatched = 0;
                for (side, anns, bxs, matched, parents, topo_used) in
                    [(raters[ri], aa, ba, &matched_a, &parent_a, &used_a), (raters[rj], ab, bb, &matched_b, &parent_b, &used_b)]
                {
                    for (k, a) in anns.iter().enumerate() {
                        corpus.instances.push(InstanceRecord {
                            relative_area: bxs[k].area(),
                            unmatched: !matched[k],
                            parent: parents[k],
                        });
                        if !matched[k] && !topo_used[k] {
                            n_unmatched += 1;
                            corpus.unmatched.push(UnmatchedRecord {
                                image_id: img.to_string(),
                                rater_id: side.to_string(),
                                annotation_id: a.id.clone(),
                                image_count: anns.len(),
                                relative_area: bxs[k].area(),
                            });
                        }
                    }
                }
                corpus.pair_images.push(PairImageRecord {
                    image_id: img.to_string(),
                    rater_a: raters[ri].to_string(),
                    rater_b: raters[rj].to_string(),
                    mean_count: (aa.len() + ab.len()) as f64 / 2.0,
                    unmatched: n_unmatched,
                });

                let none_a = vec![false; ba.len()];
                let none_b = vec![false; bb.len()];
                for (t, acc) in sweep_thresholds.iter().zip(sweep.iter_mut()) {
                    let m = greedy_match(ba, bb, *t, &none_a, &none_b);
                    acc.0 += m.len();
                    acc.1 += ba.len() + bb.len() - 2 * m.len();
                    acc.2 += m.iter().map(|x| 1.0 - x.2).sum::<f64>();
                }
            }
        }

        let topo_members: BTreeSet<&str> = corpus
            .topology
            .iter()
            .filter(|t| t.image_id == img)
            .flat_map(|t| std::iter::once(t.parent.as_str()).chain(t.children.iter().map(String::as_str)))
            .collect();
        for (anns, bxs) in per_rater.iter().zip(&boxes) {
            for i in 0..anns.len() {
                for j in i + 1..anns.len() {
                    if anns[i].category_id == anns[j].category_id
                        && !topo_members.contains(anns[i].id.as_str())
                        && !topo_members.contains(anns[j].id.as_str())
                    {
                        corpus.siblings.push(SiblingPair::of(&bxs[i], &bxs[j]));
                    }
                }
            }
        }
    }
    if !shared {
        return Err(NoiseError::NoSharedImages);
    }
    corpus.sweep = sweep_thresholds
        .iter()
        .zip(sweep)
        .map(|(&threshold, (m, u, dsum))| SweepRow {
            threshold,
            matched: m,
            unmatched: u,
            mean_distance: (m > 0).then(|| dsum / m as f64),
        })
        .collect();
    Ok(corpus)
}

fn matched_pair(img: &str, a: &Annotation, b: &Annotation, ba: &BBox, bb: &BBox, iou: f64) -> MatchedPair {
    let (ca, cb) = (ba.center(), bb.center());
    let translation = [cb.0 - ca.0, cb.1 - ca.1];
    MatchedPair {
        image_id: img.to_string(),
        ann_a: a.id.clone(),
        ann_b: b.id.clone(),
        category_a: a.category_id.clone(),
        category_b: b.category_id.clone(),
        d_loc: 1.0 - iou,
        area_avg: (ba.area() + bb.area()) / 2.0,
        translation,
        log_scale: [(bb.w / ba.w).ln(), (bb.h / ba.h).ln()],
        direction: direction(translation),
        same_category: a.category_id == b.category_id,
    }
}

fn topology_record(img: &str, parent: &Annotation, pbox: &BBox, mut children: Vec<(&Annotation, BBox)>) -> TopologyRecord {
    children.sort_by(|x, y| y.1.area().total_cmp(&x.1.area()).then(x.0.id.cmp(&y.0.id)));
    let child_geometry: Vec<ChildRecord> = children.iter().map(|(_, b)| ChildRecord::of(pbox, b)).collect();
    TopologyRecord {
        image_id: img.to_string(),
        parent: parent.id.clone(),
        children: children.iter().map(|(a, _)| a.id.clone()).collect(),
        parent_area: pbox.area(),
        child_angle: normalized_angle(child_geometry[0].offset, child_geometry[1].offset),
        child_geometry,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kalos_core::dataset::parse_dataset_str;

    fn doc(a: &[(&str, [f64; 4])], b: &[(&str, [f64; 4])]) -> Dataset {
        let ann = |r: &str, (id, c): &(&str, [f64; 4])| {
            format!(
                r#"{{"id": "{r}{id}", "image_id": "i", "rater_id": "{r}", "category_id": "x", "geometry": {{"type": "bbox", "coordinates": [{}, {}, {}, {}]}}}}"#,
                c[0], c[1], c[2], c[3]
            )
        };
        let anns: Vec<String> = a.iter().map(|x| ann("A", x)).chain(b.iter().map(|x| ann("B", x))).collect();
        parse_dataset_str(&format!(
            r#"{{"format_version": "1", "coordinate_mode": "relative",
              "images": [{{"id": "i", "width": 100, "height": 100}}],
              "raters": [{{"id": "A"}}, {{"id": "B"}}],
              "assignments": [{{"image_id": "i", "rater_id": "A"}}, {{"image_id": "i", "rater_id": "B"}}],
              "categories": [{{"id": "x", "name": "x"}}],
              "annotations": [{}]}}"#,
            anns.join(",")
        ))
        .unwrap()
    }

    const BOXES: [(&str, [f64; 4]); 3] =
        [("1", [0.1, 0.1, 0.2, 0.2]), ("2", [0.5, 0.5, 0.3, 0.2]), ("3", [0.1, 0.6, 0.1, 0.1])];

    #[test]
    fn identical_twins() {
        let c = extract_errors(&doc(&BOXES, &BOXES), &[]).unwrap();
        assert_eq!(c.matched.len(), 3);
        assert!(c.matched.iter().all(|m| m.d_loc.abs() < 1e-12));
        assert!(c.unmatched.is_empty());
        assert!(c.topology.is_empty());
    }

    #[test]
    fn one_missing() {
        let c = extract_errors(&doc(&BOXES, &BOXES[..2]), &[]).unwrap();
        assert_eq!(c.unmatched.len(), 1);
        assert_eq!(c.unmatched[0].annotation_id, "A3");
        assert_eq!(c.pair_images[0].unmatched, 1);
    }

    #[test]
    fn split_into_halves() {
        let c = extract_errors(
            &doc(&[("p", [0.2, 0.2, 0.4, 0.2])], &[("l", [0.2, 0.2, 0.2, 0.2]), ("r", [0.4, 0.2, 0.2, 0.2])]),
            &[],
        )
        .unwrap();
        assert_eq!(c.topology.len(), 1);
        let t = &c.topology[0];
        assert_eq!(t.parent, "Ap");
        assert_eq!(t.children.len(), 2);
        assert!((t.child_angle.unwrap() - 1.0).abs() < 1e-12);
        assert!((t.child_geometry[0].area_ratio - 0.5).abs() < 1e-12);
        assert!(c.matched.is_empty());
        assert!(c.unmatched.is_empty());
    }

    #[test]
    fn nested_object_is_not_topology() {
        let c = extract_errors(
            &doc(&[("p", [0.2, 0.2, 0.4, 0.4])], &[("p", [0.21, 0.2, 0.4, 0.4]), ("s", [0.3, 0.3, 0.05, 0.05])]),
            &[],
        )
        .unwrap();
        assert!(c.topology.is_empty());
        assert_eq!(c.matched.len(), 1);
        assert_eq!(c.unmatched.len(), 1);
    }

    #[test]
    fn translation_and_direction() {
        let c = extract_errors(&doc(&[("1", [0.1, 0.1, 0.2, 0.2])], &[("1", [0.1, 0.12, 0.2, 0.2])]), &[0.5, 0.95]).unwrap();
        let m = &c.matched[0];
        assert!((m.translation[1] - 0.02).abs() < 1e-12);
        assert!((m.direction - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert_eq!(c.sweep[0].matched, 1);
        assert_eq!(c.sweep[1].matched, 0);
        assert_eq!(c.sweep[1].unmatched, 2);
    }

    #[test]
    fn single_rater_has_no_pairs() {
        let d = doc(&BOXES, &[]);
        let mut one = d.clone();
        one.assignments.retain(|a| a.rater_id == "A");
        assert!(matches!(extract_errors(&one, &[]), Err(NoiseError::NoSharedImages)));
    }
}
