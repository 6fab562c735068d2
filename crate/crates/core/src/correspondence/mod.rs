//! Cross-rater correspondence: sparse candidate pairs and the solvers that
//! group them into per-image units with at most one annotation per rater.

mod ahc;
mod greedy;
mod hungarian;
mod shm;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Annotation;
use crate::geometry::{bounds, distance, DistanceMetric, GeometryError};

pub use ahc::solve_ahc;
pub use greedy::solve_greedy;
pub use hungarian::min_cost_assignment;
pub use shm::solve_shm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFunction {
    /// Category-aware: matching categories earn an extra −1.
    Soft,
    /// Localization only.
    Neg,
}

impl CostFunction {
    pub fn name(self) -> &'static str {
        match self {
            CostFunction::Soft => "soft",
            CostFunction::Neg => "neg",
        }
    }
}

impl fmt::Display for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostFunction {
    type Err = CorrespondenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soft" => Ok(CostFunction::Soft),
            "neg" => Ok(CostFunction::Neg),
            _ => Err(CorrespondenceError::UnknownName { kind: "cost function", name: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Greedy,
    Shm,
    Ahc,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Greedy, SolverKind::Shm, SolverKind::Ahc];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Greedy => "greedy",
            SolverKind::Shm => "shm",
            SolverKind::Ahc => "ahc",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = CorrespondenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CorrespondenceError::UnknownName { kind: "solver", name: s.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrespondenceError {
    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unit set on image '{image}' is invalid: {reason}")]
    InvalidUnits { image: String, reason: String },
}

/// Matching cost of a pair; lower is preferred.
///
/// `Soft`: `−(1 − d) − 1` for equal categories, `−(1 − d)` otherwise.
/// `Neg`: `−(1 − d)`, i.e. the negated overlap, blind to categories.
pub fn pair_cost(d_loc: f64, different_category: bool, f: CostFunction) -> f64 {
    match f {
        CostFunction::Soft => {
            if different_category {
                -(1.0 - d_loc)
            } else {
                -(1.0 - d_loc) - 1.0
            }
        }
        CostFunction::Neg => -(1.0 - d_loc),
    }
}

/// A cross-rater pair within the distance threshold. `a` and `b` index the
/// canonically ordered annotation slice of one image, with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub a: usize,
    pub b: usize,
    pub d_loc: f64,
    pub different_category: bool,
    pub cost: f64,
}

/// Disjoint cover of one image's annotations by units (annotation ids).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSet {
    pub image_id: String,
    pub units: Vec<Vec<String>>,
}

impl UnitSet {
    /// Builds a canonical unit set: members sorted, units ordered by first member.
    pub fn from_groups(image_id: &str, anns: &[&Annotation], groups: Vec<Vec<usize>>) -> Self {
        let mut units: Vec<Vec<String>> = groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|g| {
                let mut ids: Vec<String> = g.iter().map(|&i| anns[i].id.clone()).collect();
                ids.sort();
                ids
            })
            .collect();
        units.sort();
        UnitSet { image_id: image_id.to_string(), units }
    }

    /// Map from annotation id to unit index.
    pub fn membership(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for (u, members) in self.units.iter().enumerate() {
            for id in members {
                m.insert(id.as_str(), u);
            }
        }
        m
    }
}

/// Pipeline configuration shared by every image of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalosConfig {
    pub metric: DistanceMetric,
    pub tau: f64,
    pub solver: SolverKind,
    pub cost: CostFunction,
    /// Skip pairs whose bounding boxes share no grid cell (overlap metrics only).
    #[serde(default)]
    pub prefilter: bool,
}

impl KalosConfig {
    pub fn new(metric: DistanceMetric, tau: f64) -> Self {
        KalosConfig { metric, tau, solver: SolverKind::Greedy, cost: CostFunction::Soft, prefilter: false }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_cost(mut self, cost: CostFunction) -> Self {
        self.cost = cost;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Compact notation, e.g. `KaLOS(d=box_iou, tau=0.5, S=greedy, psi=soft)`.
    pub fn notation(&self) -> String {
        format!("KaLOS(d={}, tau={}, S={}, psi={})", self.metric, self.tau, self.solver, self.cost)
    }
}

/// Content-based total order on annotations, independent of input position.
pub fn annotation_order(x: &Annotation, y: &Annotation) -> Ordering {
    x.rater_id
        .cmp(&y.rater_id)
        .then_with(|| x.geometry.content_cmp(&y.geometry))
        .then_with(|| x.category_id.cmp(&y.category_id))
        .then_with(|| x.id.cmp(&y.id))
}

pub fn canonical_order<'a>(anns: &[&'a Annotation]) -> Vec<&'a Annotation> {
    let mut v = anns.to_vec();
    v.sort_by(|x, y| annotation_order(x, y));
    v
}

const GRID: usize = 16;

fn grid_cells(anns: &[&Annotation]) -> Vec<BTreeSet<usize>> {
    let cell = |v: f64| ((v.clamp(0.0, 1.0) * GRID as f64) as usize).min(GRID - 1);
    anns.iter()
        .map(|a| {
            let [x0, y0, x1, y1] = bounds(&a.geometry);
            let mut s = BTreeSet::new();
            for gx in cell(x0)..=cell(x1) {
                for gy in cell(y0)..=cell(y1) {
                    s.insert(gx * GRID + gy);
                }
            }
            s
        })
        .collect()
}

/// All cross-rater pairs with `d_loc ≤ τ`, in `(a, b)` index order.
///
/// `anns` must already be in canonical order (see [`canonical_order`]).
pub fn build_candidates(
    anns: &[&Annotation],
    metric: DistanceMetric,
    tau: f64,
    cost: CostFunction,
    prefilter: bool,
) -> Result<Vec<CandidatePair>, CorrespondenceError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(CorrespondenceError::Threshold(tau));
    }
    let use_grid = prefilter && metric.is_overlap_based() && tau < 1.0;
    let cells = if use_grid { grid_cells(anns) } else { Vec::new() };
    let mut out = Vec::new();
    for a in 0..anns.len() {
        for b in a + 1..anns.len() {
            if anns[a].rater_id == anns[b].rater_id {
                continue;
            }
            if use_grid && cells[a].is_disjoint(&cells[b]) {
                continue;
            }
            let d = distance(&anns[a].geometry, &anns[b].geometry, metric)?;
            if d <= tau {
                let different_category = anns[a].category_id != anns[b].category_id;
                out.push(CandidatePair { a, b, d_loc: d, different_category, cost: pair_cost(d, different_category, cost) });
            }
        }
    }
    Ok(out)
}

/// Deterministic content-based order on pairs: cost, distance, geometry,
/// categories, raters, ids.
pub fn pair_order(anns: &[&Annotation], p: &CandidatePair, q: &CandidatePair) -> Ordering {
    p.cost
        .total_cmp(&q.cost)
        .then_with(|| p.d_loc.total_cmp(&q.d_loc))
        .then_with(|| {
            let key = |c: &CandidatePair| (anns[c.a], anns[c.b]);
            let (pa, pb) = key(p);
            let (qa, qb) = key(q);
            pa.geometry
                .content_cmp(&qa.geometry)
                .then_with(|| pb.geometry.content_cmp(&qb.geometry))
                .then_with(|| pa.category_id.cmp(&qa.category_id))
                .then_with(|| pb.category_id.cmp(&qb.category_id))
                .then_with(|| pa.rater_id.cmp(&qa.rater_id))
                .then_with(|| pb.rater_id.cmp(&qb.rater_id))
                .then_with(|| pa.id.cmp(&qa.id))
                .then_with(|| pb.id.cmp(&qb.id))
        })
}

/// Groups one image's annotations into units with the configured solver.
pub fn solve_image(image_id: &str, anns: &[&Annotation], cfg: &KalosConfig) -> Result<UnitSet, CorrespondenceError> {
    let anns = canonical_order(anns);
    let units = match cfg.solver {
        SolverKind::Greedy => {
            let pairs = build_candidates(&anns, cfg.metric, cfg.tau, cfg.cost, cfg.prefilter)?;
            solve_greedy(image_id, &anns, &pairs)
        }
        SolverKind::Ahc => {
            let pairs = build_candidates(&anns, cfg.metric, cfg.tau, cfg.cost, cfg.prefilter)?;
            solve_ahc(image_id, &anns, &pairs, cfg.tau)
        }
        SolverKind::Shm => solve_shm(image_id, &anns, cfg.metric, cfg.tau, cfg.cost)?,
    };
    check_unit_set(&units, &anns)?;
    Ok(units)
}

/// Asserts disjoint cover and at most one annotation per rater per unit.
pub fn check_unit_set(units: &UnitSet, anns: &[&Annotation]) -> Result<(), CorrespondenceError> {
    let by_id: BTreeMap<&str, &Annotation> = anns.iter().map(|a| (a.id.as_str(), *a)).collect();
    let mut seen = BTreeSet::new();
    let fail = |reason: String| CorrespondenceError::InvalidUnits { image: units.image_id.clone(), reason };
    for unit in &units.units {
        let mut raters = BTreeSet::new();
        for id in unit {
            let a = by_id.get(id.as_str()).ok_or_else(|| fail(format!("unknown annotation '{id}'")))?;
            if !seen.insert(id.as_str()) {
                return Err(fail(format!("annotation '{id}' appears twice")));
            }
            if !raters.insert(a.rater_id.as_str()) {
                return Err(fail(format!("rater '{}' appears twice in one unit", a.rater_id)));
            }
        }
    }
    if seen.len() != by_id.len() {
        return Err(fail(format!("{} of {} annotations covered", seen.len(), by_id.len())));
    }
    Ok(())
}
