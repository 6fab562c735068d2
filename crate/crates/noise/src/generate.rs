//! Synthetic rater generation from a reference dataset.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use kalos_core::dataset::{Annotation, Assignment, BBox, CategoryScope, Dataset, Geometry, RaterRecord};
use kalos_core::rng::SeedPath;
use kalos_core::stats::{quantile, LinearTModel};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{bbox_of, require_boxes, SiblingPair};
use crate::model::{LocalizationModel, NoiseModel, TopologyModel};
use crate::NoiseError;

/// Random false-positive candidates drawn per event without a proposal pool.
const FALLBACK_CANDIDATES: usize = 16;
/// Children are at least 5% narrower than their parent on each axis.
const MAX_CHILD_LOG_SCALE: f64 = -0.05;
/// Poisson draws are truncated here.
const MAX_EVENTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Unmatched,
    Topology,
    Category,
    Localization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    FalseNegative,
    FalsePositive,
    Fragment,
    Merge,
    CategoryFlip,
}

impl EventKind {
    pub fn stage(self) -> Stage {
        match self {
            EventKind::FalseNegative | EventKind::FalsePositive => Stage::Unmatched,
            EventKind::Fragment | EventKind::Merge => Stage::Topology,
            EventKind::CategoryFlip => Stage::Category,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub rater_id: String,
    pub image_id: String,
    pub kind: EventKind,
    /// Reference annotations the event targeted.
    pub references: Vec<String>,
    /// Synthetic annotations it produced.
    pub outputs: Vec<String>,
    /// The target had already been consumed by an earlier event.
    pub cannibalized: bool,
    /// A false positive found no admissible proposal.
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLoss {
    pub theoretical: u64,
    pub cannibalized: u64,
}

/// Fraction of sampled events that could not execute because their target was consumed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalLoss {
    pub theoretical: u64,
    pub cannibalized: u64,
    pub ratio: f64,
    pub by_stage: BTreeMap<Stage, StageLoss>,
}

impl SignalLoss {
    fn from_stages(by_stage: BTreeMap<Stage, StageLoss>) -> Self {
        let theoretical = by_stage.values().map(|s| s.theoretical).sum();
        let cannibalized = by_stage.values().map(|s| s.cannibalized).sum();
        let ratio = if theoretical == 0 { 0.0 } else { cannibalized as f64 / theoretical as f64 };
        SignalLoss { theoretical, cannibalized, ratio, by_stage }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisResult {
    #[serde(skip)]
    pub dataset: Dataset,
    /// Synthetic annotation id to the reference annotation it derives from; `None` for false positives.
    pub correspondence: BTreeMap<String, Option<String>>,
    pub events: Vec<Event>,
    pub signal_loss: SignalLoss,
    pub lambda: f64,
}

struct Context<'a> {
    model: &'a NoiseModel,
    lambda: f64,
    seed: SeedPath,
    categories: Vec<String>,
    area_range: (f64, f64),
}

#[derive(Default)]
struct ImageOutput {
    annotations: Vec<Annotation>,
    correspondence: Vec<(String, Option<String>)>,
    events: Vec<Event>,
    loss: BTreeMap<Stage, StageLoss>,
}

impl ImageOutput {
    fn push(&mut self, id: String, image: &str, rater: &str, category: &str, geometry: Geometry, source: Option<&str>) {
        self.correspondence.push((id.clone(), source.map(str::to_string)));
        self.annotations.push(Annotation {
            id,
            image_id: image.to_string(),
            rater_id: rater.to_string(),
            category_id: category.to_string(),
            geometry,
        });
    }

    fn event(&mut self, ev: Event) {
        let s = self.loss.entry(ev.kind.stage()).or_default();
        s.theoretical += 1;
        s.cannibalized += u64::from(ev.cannibalized);
        self.events.push(ev);
    }
}

/// Inverse-CDF Poisson draw, so counts grow monotonically with the rate for a fixed `u`.
fn poisson_inverse(rate: f64, u: f64) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let mut p = (-rate).exp();
    let mut cdf = p;
    let mut k = 0;
    while u > cdf && k < MAX_EVENTS {
        k += 1;
        p *= rate / k as f64;
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}

fn weighted_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return ((u * weights.len() as f64) as usize).min(weights.len() - 1);
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn axis_factor<R: Rng + ?Sized>(m: &LinearTModel, area: f64, flip: f64, lambda: f64, rng: &mut R) -> f64 {
    let v = m.sample(area, rng);
    let sign = if rng.random::<f64>() < flip { -1.0 } else { 1.0 };
    (sign * v * lambda).exp()
}

/// Shifts and rescales a box; the centroid stays inside the unit square.
fn perturb<R: Rng + ?Sized>(b: &BBox, m: &LocalizationModel, lambda: f64, rng: &mut R) -> BBox {
    let area = b.area();
    let mag = m.translation.sample(area, rng).abs() * lambda;
    let theta = m.direction.sample(rng);
    let fw = axis_factor(&m.scale_w, area, m.sign_flip, lambda, rng);
    let fh = axis_factor(&m.scale_h, area, m.sign_flip, lambda, rng);
    let (cx, cy) = b.center();
    BBox::from_center(
        (cx + mag * theta.cos()).clamp(0.0, 1.0),
        (cy + mag * theta.sin()).clamp(0.0, 1.0),
        b.w * fw,
        b.h * fh,
    )
}

fn fragment<R: Rng + ?Sized>(loc: &LocalizationModel, topo: &TopologyModel, p: &BBox, rng: &mut R) -> [BBox; 2] {
    let area = p.area();
    let (cx, cy) = p.center();
    let first = loc.direction.sample(rng);
    let sep = topo.child_angle.sample(rng) * PI;
    let second = if rng.random::<bool>() { first + sep } else { first - sep };
    [first, second].map(|theta| {
        let mag = topo.child_translation.sample(area, rng).abs();
        let lw = (topo.kappa - topo.child_scale_w.sample(area, rng).abs()).min(MAX_CHILD_LOG_SCALE);
        let lh = (topo.kappa - topo.child_scale_h.sample(area, rng).abs()).min(MAX_CHILD_LOG_SCALE);
        BBox::from_center(
            (cx + mag * theta.cos()).clamp(0.0, 1.0),
            (cy + mag * theta.sin()).clamp(0.0, 1.0),
            p.w * lw.exp(),
            p.h * lh.exp(),
        )
    })
}

fn random_box<R: Rng + ?Sized>(area_range: (f64, f64), rng: &mut R) -> BBox {
    let (lo, hi) = (area_range.0.ln(), area_range.1.ln());
    let area = if hi > lo { rng.random_range(lo..hi) } else { lo }.exp();
    let aspect = rng.random_range(-LN_2..LN_2).exp();
    let w = (area * aspect).sqrt().min(1.0);
    let h = (area / aspect).sqrt().min(1.0);
    let cx = rng.random_range(w / 2.0..=1.0 - w / 2.0);
    let cy = rng.random_range(h / 2.0..=1.0 - h / 2.0);
    BBox::from_center(cx, cy, w, h)
}

impl Context<'_> {
    fn uniform_category<R: Rng + ?Sized>(&self, exclude: Option<&str>, rng: &mut R) -> Option<String> {
        let pool: Vec<&String> = self.categories.iter().filter(|c| Some(c.as_str()) != exclude).collect();
        (!pool.is_empty()).then(|| pool[rng.random_range(0..pool.len())].clone())
    }

    fn transition<R: Rng + ?Sized>(&self, source: &str, exclude_self: bool, rng: &mut R) -> Option<String> {
        let cat = &self.model.category;
        let probs = cat
            .similarity
            .as_ref()
            .and_then(|s| s.transition(source, cat.temperature, cat.top_k, exclude_self))
            .map(|p| p.into_iter().filter(|(c, _)| self.categories.contains(c)).collect::<Vec<_>>())
            .filter(|p| !p.is_empty());
        match probs {
            Some(p) => {
                let w: Vec<f64> = p.iter().map(|x| x.1).collect();
                Some(p[weighted_index(&w, rng.random())].0.clone())
            }
            None => self.uniform_category(exclude_self.then_some(source), rng),
        }
    }

    fn propose<R: Rng + ?Sized>(
        &self,
        image_id: &str,
        occupied: &[BBox],
        refs: &[&Annotation],
        rng: &mut R,
    ) -> Option<(BBox, String)> {
        let um = &self.model.unmatched;
        let mut cands: Vec<(BBox, Option<String>)> = match &um.proposals {
            Some(pool) => pool
                .for_image(image_id)
                .map(|p| (BBox::new(p.bbox[0], p.bbox[1], p.bbox[2], p.bbox[3]), p.category_id.clone()))
                .collect(),
            None => (0..FALLBACK_CANDIDATES).map(|_| (random_box(self.area_range, rng), None)).collect(),
        };
        cands.retain(|(b, _)| occupied.iter().all(|o| o.iou(b) < um.admissible_iou));
        if cands.is_empty() {
            return None;
        }
        let weights: Vec<f64> = cands.iter().map(|(b, _)| um.select.probability(b.area().ln())).collect();
        let (b, cat) = cands.swap_remove(weighted_index(&weights, rng.random()));
        let cat = match cat.filter(|c| self.categories.contains(c)) {
            Some(c) => c,
            None if !refs.is_empty() => {
                let src = &refs[rng.random_range(0..refs.len())].category_id;
                self.transition(src, false, rng)?
            }
            None => self.uniform_category(None, rng)?,
        };
        Some((b, cat))
    }

    fn synthesize(&self, rater_idx: usize, rater: &str, image: &str, refs: &[&Annotation]) -> ImageOutput {
        let model = self.model;
        let lambda = self.lambda;
        let boxes: Vec<BBox> = refs.iter().map(|a| bbox_of(a).expect("checked bbox")).collect();
        let n = refs.len();
        let mut consumed = vec![false; n];
        let mut out = ImageOutput::default();
        let base = self.seed.with_u64(rater_idx as u64).with_str(image);
        let ev = |kind, references: Vec<String>, outputs: Vec<String>, cannibalized, skipped| Event {
            rater_id: rater.to_string(),
            image_id: image.to_string(),
            kind,
            references,
            outputs,
            cannibalized,
            skipped,
        };

        let um = &model.unmatched;
        let stream = base.with_str("unmatched");
        let k = poisson_inverse(um.rate.rate(n as f64) * lambda, stream.rng().random());
        let select: Vec<f64> = boxes.iter().map(|b| um.select.probability(b.area().ln())).collect();
        let mut inserted: Vec<BBox> = Vec::new();
        for e in 0..k {
            let mut rng = stream.with_u64(e as u64).rng();
            if rng.random::<f64>() < um.fp_share {
                let occupied: Vec<BBox> =
                    (0..n).filter(|&i| !consumed[i]).map(|i| boxes[i]).chain(inserted.iter().copied()).collect();
                match self.propose(image, &occupied, refs, &mut rng) {
                    Some((b, cat)) => {
                        let id = format!("{rater}:{image}:fp{e}");
                        out.push(id.clone(), image, rater, &cat, Geometry::Box2D(b), None);
                        inserted.push(b);
                        out.event(ev(EventKind::FalsePositive, vec![], vec![id], false, false));
                    }
                    None => out.event(ev(EventKind::FalsePositive, vec![], vec![], false, true)),
                }
            } else if n > 0 {
                let i = weighted_index(&select, rng.random());
                let hit = consumed[i];
                consumed[i] = true;
                out.event(ev(EventKind::FalseNegative, vec![refs[i].id.clone()], vec![], hit, false));
            }
        }

        if let Some(topo) = &model.topology {
            for i in 0..n {
                let mut rng = base.with_str("fragment").with_str(&refs[i].id).rng();
                let p = (topo.parent.probability(boxes[i].area().ln()) * lambda).min(1.0);
                if rng.random::<f64>() >= p {
                    continue;
                }
                if consumed[i] {
                    out.event(ev(EventKind::Fragment, vec![refs[i].id.clone()], vec![], true, false));
                    continue;
                }
                consumed[i] = true;
                let children = fragment(&model.localization, topo, &boxes[i], &mut rng);
                let mut ids = Vec::new();
                for (c, b) in children.iter().enumerate() {
                    let id = format!("{rater}:{}#{c}", refs[i].id);
                    out.push(id.clone(), image, rater, &refs[i].category_id, Geometry::Box2D(*b), Some(&refs[i].id));
                    ids.push(id);
                }
                out.event(ev(EventKind::Fragment, vec![refs[i].id.clone()], ids, false, false));
            }
            if let (Some(threshold), true) = (topo.merge_threshold, lambda > 0.0) {
                let effective = threshold - lambda.ln();
                let mut cands = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if refs[i].category_id == refs[j].category_id {
                            let s = topo.merge_score(&SiblingPair::of(&boxes[i], &boxes[j]));
                            if s > effective {
                                cands.push((s, i, j));
                            }
                        }
                    }
                }
                cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                for (_, i, j) in cands {
                    let targets = vec![refs[i].id.clone(), refs[j].id.clone()];
                    if consumed[i] || consumed[j] {
                        out.event(ev(EventKind::Merge, targets, vec![], true, false));
                        continue;
                    }
                    consumed[i] = true;
                    consumed[j] = true;
                    let keep = if boxes[j].area() > boxes[i].area() { j } else { i };
                    let id = format!("{rater}:{}+{}", refs[i].id, refs[j].id);
                    let union = boxes[i].union_box(&boxes[j]);
                    out.push(id.clone(), image, rater, &refs[i].category_id, Geometry::Box2D(union), Some(&refs[keep].id));
                    out.event(ev(EventKind::Merge, targets, vec![id], false, false));
                }
            }
        }

        let p_flip = (model.category.p_global * lambda).min(1.0);
        for i in 0..n {
            let mut rng = base.with_str("category").with_str(&refs[i].id).rng();
            if rng.random::<f64>() >= p_flip {
                continue;
            }
            let Some(cat) = self.transition(&refs[i].category_id, true, &mut rng) else {
                continue;
            };
            if consumed[i] {
                out.event(ev(EventKind::CategoryFlip, vec![refs[i].id.clone()], vec![], true, false));
                continue;
            }
            consumed[i] = true;
            let b = perturb(&boxes[i], &model.category.misclassified, lambda, &mut rng);
            let id = format!("{rater}:{}", refs[i].id);
            out.push(id.clone(), image, rater, &cat, Geometry::Box2D(b), Some(&refs[i].id));
            out.event(ev(EventKind::CategoryFlip, vec![refs[i].id.clone()], vec![id], false, false));
        }

        for i in (0..n).filter(|&i| !consumed[i]) {
            let geometry = if lambda == 0.0 {
                refs[i].geometry.clone()
            } else {
                let mut rng = base.with_str("localization").with_str(&refs[i].id).rng();
                Geometry::Box2D(perturb(&boxes[i], &model.localization, lambda, &mut rng))
            };
            out.push(format!("{rater}:{}", refs[i].id), image, rater, &refs[i].category_id, geometry, Some(&refs[i].id));
        }
        out.annotations.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }
}

fn rater_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}_{k:02}")).collect()
}

fn generate_named(
    reference: &Dataset,
    model: &NoiseModel,
    lambda: f64,
    raters: &[String],
    seed: SeedPath,
) -> Result<SynthesisResult, NoiseError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(NoiseError::Magnitude(lambda));
    }
    require_boxes(reference)?;
    for a in &reference.annotations {
        bbox_of(a)?;
    }
    let index = reference.index();
    let mut image_ids: Vec<&str> = reference.images.iter().map(|i| i.id.as_str()).collect();
    image_ids.sort_unstable();
    let refs: BTreeMap<&str, Vec<&Annotation>> = image_ids
        .iter()
        .map(|&img| {
            let mut v = index.annotations(img).to_vec();
            v.sort_by(|a, b| a.id.cmp(&b.id));
            (img, v)
        })
        .collect();
    let areas: Vec<f64> = reference.annotations.iter().map(|a| a.geometry.relative_area()).collect();
    let area_range = if areas.is_empty() { (0.005, 0.05) } else { (quantile(&areas, 0.05), quantile(&areas, 0.95)) };
    let ctx = Context {
        model,
        lambda,
        seed,
        categories: reference.categories.iter().map(|c| c.id.clone()).collect(),
        area_range,
    };

    let jobs: Vec<(usize, &str)> = (0..raters.len()).flat_map(|k| image_ids.iter().map(move |&img| (k, img))).collect();
    let outputs: Vec<ImageOutput> =
        jobs.par_iter().map(|&(k, img)| ctx.synthesize(k, &raters[k], img, &refs[img])).collect();

    let mut dataset = Dataset {
        images: reference.images.clone(),
        raters: raters.iter().map(|r| RaterRecord { id: r.clone(), name: None }).collect(),
        assignments: Vec::with_capacity(jobs.len()),
        categories: reference.categories.clone(),
        annotations: Vec::new(),
    };
    let mut correspondence = BTreeMap::new();
    let mut events = Vec::new();
    let mut stages: BTreeMap<Stage, StageLoss> = BTreeMap::new();
    for (&(k, img), out) in jobs.iter().zip(outputs) {
        dataset.assignments.push(Assignment {
            image_id: img.to_string(),
            rater_id: raters[k].clone(),
            scope: CategoryScope::All,
        });
        dataset.annotations.extend(out.annotations);
        correspondence.extend(out.correspondence);
        events.extend(out.events);
        for (stage, l) in out.loss {
            let s = stages.entry(stage).or_default();
            s.theoretical += l.theoretical;
            s.cannibalized += l.cannibalized;
        }
    }
    Ok(SynthesisResult { dataset, correspondence, events, signal_loss: SignalLoss::from_stages(stages), lambda })
}

/// Generates `n_raters` synthetic raters named `synth_00`, `synth_01`, ... from a
/// bbox reference. Every annotation of the reference is treated as ground truth.
pub fn generate(
    reference: &Dataset,
    model: &NoiseModel,
    lambda: f64,
    n_raters: usize,
    seed: u64,
) -> Result<SynthesisResult, NoiseError> {
    generate_named(reference, model, lambda, &rater_names("synth", n_raters), SeedPath::new(seed))
}

/// A single perturbed copy of the reference, usable as a second annotation style.
pub fn perturb_style(reference: &Dataset, model: &NoiseModel, lambda: f64, seed: u64) -> Result<Dataset, NoiseError> {
    let names = vec!["style".to_string()];
    Ok(generate_named(reference, model, lambda, &names, SeedPath::new(seed).with_str("style"))?.dataset)
}

/// Two groups of raters, `a_NN` generated from `style_a` and `b_NN` from `style_b`.
/// Both styles must cover the same images.
pub fn generate_collaboration(
    style_a: &Dataset,
    style_b: &Dataset,
    group_sizes: (usize, usize),
    model: &NoiseModel,
    lambda: f64,
    seed: u64,
) -> Result<SynthesisResult, NoiseError> {
    let ids = |d: &Dataset| {
        let mut v: Vec<String> = d.images.iter().map(|i| i.id.clone()).collect();
        v.sort();
        v
    };
    if ids(style_a) != ids(style_b) {
        return Err(NoiseError::Input { path: "styles".into(), message: "the two styles cover different images".into() });
    }
    let root = SeedPath::new(seed);
    let a = generate_named(style_a, model, lambda, &rater_names("a", group_sizes.0), root.with_str("group_a"))?;
    let b = generate_named(style_b, model, lambda, &rater_names("b", group_sizes.1), root.with_str("group_b"))?;
    let mut dataset = a.dataset;
    dataset.raters.extend(b.dataset.raters);
    dataset.assignments.extend(b.dataset.assignments);
    dataset.annotations.extend(b.dataset.annotations);
    for c in b.dataset.categories {
        if !dataset.categories.iter().any(|x| x.id == c.id) {
            dataset.categories.push(c);
        }
    }
    let mut correspondence = a.correspondence;
    correspondence.extend(b.correspondence);
    let mut events = a.events;
    events.extend(b.events);
    let mut stages = a.signal_loss.by_stage;
    for (stage, l) in b.signal_loss.by_stage {
        let s = stages.entry(stage).or_default();
        s.theoretical += l.theoretical;
        s.cannibalized += l.cannibalized;
    }
    Ok(SynthesisResult { dataset, correspondence, events, signal_loss: SignalLoss::from_stages(stages), lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{synthetic_reference, ReferenceSpec};
    use kalos_core::dataset::validate_dataset;

    fn reference() -> Dataset {
        synthetic_reference(&ReferenceSpec { images: 12, ..ReferenceSpec::default() })
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let r = reference();
        let out = generate(&r, &NoiseModel::reference(), 0.0, 2, 3).unwrap();
        assert!(out.events.is_empty());
        assert_eq!(out.signal_loss.ratio, 0.0);
        let by_id: BTreeMap<&str, &Annotation> = r.annotations.iter().map(|a| (a.id.as_str(), a)).collect();
        assert_eq!(out.dataset.annotations.len(), 2 * r.annotations.len());
        for a in &out.dataset.annotations {
            let src = out.correspondence[&a.id].as_deref().unwrap();
            assert_eq!(a.geometry, by_id[src].geometry);
            assert_eq!(a.category_id, by_id[src].category_id);
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let r = reference();
        let m = NoiseModel::reference();
        let a = generate(&r, &m, 2.0, 3, 11).unwrap();
        let b = generate(&r, &m, 2.0, 3, 11).unwrap();
        assert_eq!(a, b);
        assert!(validate_dataset(&a.dataset).is_valid());
        assert!(a.dataset.annotations.iter().all(|x| a.correspondence.contains_key(&x.id)));
        for e in a.events.iter().filter(|e| e.kind == EventKind::FalsePositive && !e.skipped) {
            assert_eq!(a.correspondence[&e.outputs[0]], None);
        }
    }

    #[test]
    fn rates_clamp() {
        let m = NoiseModel::reference();
        assert!((m.category.p_global * 2.0 - 0.052).abs() < 1e-15);
        let r = reference();
        let out = generate(&r, &m, 100.0, 1, 5).unwrap();
        assert!(out.signal_loss.by_stage[&Stage::Category].theoretical as usize >= r.annotations.len() - 1);
    }

    #[test]
    fn negative_magnitude_rejected() {
        assert!(matches!(generate(&reference(), &NoiseModel::reference(), -1.0, 1, 0), Err(NoiseError::Magnitude(_))));
    }

    #[test]
    fn stage_exclusivity() {
        let r = reference();
        let out = generate(&r, &NoiseModel::reference(), 3.0, 2, 8).unwrap();
        for rater in ["synth_00", "synth_01"] {
            let mut touched: BTreeMap<&str, usize> = BTreeMap::new();
            for e in out.events.iter().filter(|e| e.rater_id == rater && !e.cannibalized) {
                for id in &e.references {
                    *touched.entry(id).or_default() += 1;
                }
            }
            assert!(touched.values().all(|&c| c == 1));
            for a in &r.annotations {
                let derived = out
                    .dataset
                    .annotations
                    .iter()
                    .filter(|s| s.rater_id == rater && out.correspondence[&s.id].as_deref() == Some(a.id.as_str()))
                    .count();
                let event = touched.contains_key(a.id.as_str());
                assert!(event || derived == 1, "{} untouched but has {derived} outputs", a.id);
            }
        }
    }

    #[test]
    fn poisson_inverse_is_monotone() {
        for u in [0.1, 0.5, 0.9, 0.999] {
            let ks: Vec<usize> = [0.1, 0.5, 1.0, 2.0, 5.0].iter().map(|&r| poisson_inverse(r, u)).collect();
            assert!(ks.windows(2).all(|w| w[0] <= w[1]));
        }
        assert_eq!(poisson_inverse(0.0, 0.99), 0);
    }

    #[test]
    fn collaboration_groups() {
        let r = reference();
        let m = NoiseModel::reference();
        let style = perturb_style(&r, &m, 1.0, 4).unwrap();
        let out = generate_collaboration(&r, &style, (1, 1), &m, 0.5, 9).unwrap();
        let ids: Vec<&str> = out.dataset.raters.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a_00", "b_00"]);
        assert_eq!(out, generate_collaboration(&r, &style, (1, 1), &m, 0.5, 9).unwrap());
    }
}
