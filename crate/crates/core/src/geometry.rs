//! Normalized localization distances `d ∈ [0, 1]` and their similarities.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{shoelace, Geometry, GeometryKind, Keypoint, VoxelBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    BoxIou,
    PolygonIou,
    MaskGiou,
    L2Centroid,
    VoxelIou,
    PoseNmpjpe,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 6] = [
        DistanceMetric::BoxIou,
        DistanceMetric::PolygonIou,
        DistanceMetric::MaskGiou,
        DistanceMetric::L2Centroid,
        DistanceMetric::VoxelIou,
        DistanceMetric::PoseNmpjpe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::BoxIou => "box_iou",
            DistanceMetric::PolygonIou => "polygon_iou",
            DistanceMetric::MaskGiou => "mask_giou",
            DistanceMetric::L2Centroid => "l2_centroid",
            DistanceMetric::VoxelIou => "voxel_iou",
            DistanceMetric::PoseNmpjpe => "pose_nmpjpe",
        }
    }

    pub fn accepts(self, kind: GeometryKind) -> bool {
        use GeometryKind as K;
        match self {
            DistanceMetric::BoxIou => kind == K::Bbox,
            DistanceMetric::PolygonIou | DistanceMetric::MaskGiou => matches!(kind, K::Bbox | K::Polygon),
            DistanceMetric::L2Centroid => matches!(kind, K::Bbox | K::Polygon | K::Keypoints),
            DistanceMetric::VoxelIou => kind == K::VoxelBox,
            DistanceMetric::PoseNmpjpe => kind == K::Keypoints,
        }
    }

    /// Whether two geometries with disjoint bounding boxes are always at distance 1.
    pub fn is_overlap_based(self) -> bool {
        matches!(self, DistanceMetric::BoxIou | DistanceMetric::PolygonIou | DistanceMetric::VoxelIou)
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistanceMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GeometryError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("metric {metric} cannot compare {kind} geometries")]
    Incompatible { metric: DistanceMetric, kind: GeometryKind },
    #[error("keypoint skeletons differ in length ({0} vs {1})")]
    SkeletonMismatch(usize, usize),
    #[error("unknown distance metric '{0}'")]
    UnknownMetric(String),
}

/// Normalized distance between two geometries under `m`.
///
/// Arguments are put in canonical content order first, so the result is
/// bit-identical when `a` and `b` are swapped.
pub fn distance(a: &Geometry, b: &Geometry, m: DistanceMetric) -> Result<f64, GeometryError> {
    for g in [a, b] {
        if !m.accepts(g.kind()) {
            return Err(GeometryError::Incompatible { metric: m, kind: g.kind() });
        }
    }
    let (a, b) = match a.content_cmp(b) {
        Ordering::Equal => return Ok(0.0),
        Ordering::Greater => (b, a),
        Ordering::Less => (a, b),
    };
    let d = match m {
        DistanceMetric::BoxIou => match (a, b) {
            (Geometry::Box2D(p), Geometry::Box2D(q)) => iou_distance(p.intersection_area(q), p.area(), q.area()),
            _ => unreachable!("checked by accepts"),
        },
        DistanceMetric::PolygonIou => {
            let (p, q) = (outline(a), outline(b));
            let inter = polygon_intersection_area(&p, &q);
            iou_distance(inter, shoelace(&p).abs(), shoelace(&q).abs())
        }
        DistanceMetric::MaskGiou => {
            let (p, q) = (outline(a), outline(b));
            mask_giou_distance(&p, &q)
        }
        DistanceMetric::L2Centroid => {
            let (ca, cb) = (centroid(a), centroid(b));
            ((ca[0] - cb[0]).hypot(ca[1] - cb[1])) / std::f64::consts::SQRT_2
        }
        DistanceMetric::VoxelIou => match (a, b) {
            (Geometry::VoxelBox(p), Geometry::VoxelBox(q)) => {
                iou_distance(voxel_intersection(p, q), p.w * p.h * p.d, q.w * q.h * q.d)
            }
            _ => unreachable!("checked by accepts"),
        },
        DistanceMetric::PoseNmpjpe => match (a, b) {
            (Geometry::KeypointSet(p), Geometry::KeypointSet(q)) => pose_distance(p, q)?,
            _ => unreachable!("checked by accepts"),
        },
    };
    Ok(if d.is_nan() { 1.0 } else { d.clamp(0.0, 1.0) })
}

pub fn similarity(a: &Geometry, b: &Geometry, m: DistanceMetric) -> Result<f64, GeometryError> {
    distance(a, b, m).map(|d| 1.0 - d)
}

fn iou_distance(inter: f64, area_a: f64, area_b: f64) -> f64 {
    let union = area_a + area_b - inter;
    if union <= 0.0 || !union.is_finite() {
        1.0
    } else {
        1.0 - inter / union
    }
}

fn voxel_intersection(p: &VoxelBox, q: &VoxelBox) -> f64 {
    let span = |a0: f64, al: f64, b0: f64, bl: f64| ((a0 + al).min(b0 + bl) - a0.max(b0)).max(0.0);
    span(p.x, p.w, q.x, q.w) * span(p.y, p.h, q.y, q.h) * span(p.z, p.d, q.z, q.d)
}

fn pose_distance(a: &[Keypoint], b: &[Keypoint]) -> Result<f64, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::SkeletonMismatch(a.len(), b.len()));
    }
    let mut total = 0.0;
    let mut joints = 0usize;
    for (p, q) in a.iter().zip(b) {
        match (p.visible, q.visible) {
            (true, true) => {
                total += (p.x - q.x).hypot(p.y - q.y) / std::f64::consts::SQRT_2;
                joints += 1;
            }
            (true, false) | (false, true) => {
                total += 1.0;
                joints += 1;
            }
            (false, false) => {}
        }
    }
    Ok(if joints == 0 { 1.0 } else { total / joints as f64 })
}

fn mask_giou_distance(p: &[[f64; 2]], q: &[[f64; 2]]) -> f64 {
    let area_p = shoelace(p).abs();
    let area_q = shoelace(q).abs();
    let inter = polygon_intersection_area(p, q);
    let union = area_p + area_q - inter;
    let mut all: Vec<[f64; 2]> = p.iter().chain(q.iter()).copied().collect();
    let hull = convex_hull(&mut all);
    let hull_area = shoelace(&hull).abs().max(union);
    if union <= 0.0 || hull_area <= 0.0 {
        return 1.0;
    }
    let giou = inter / union - (hull_area - union) / hull_area;
    (1.0 - giou) / 2.0
}

/// Centroid in relative coordinates; the third entry is present for voxel boxes.
pub fn centroid(g: &Geometry) -> Vec<f64> {
    match g {
        Geometry::Box2D(b) => {
            let (x, y) = b.center();
            vec![x, y]
        }
        Geometry::VoxelBox(v) => vec![v.x + v.w / 2.0, v.y + v.h / 2.0, v.z + v.d / 2.0],
        Geometry::Polygon(pts) => polygon_centroid(pts).to_vec(),
        Geometry::KeypointSet(kps) => {
            let vis: Vec<&Keypoint> = kps.iter().filter(|k| k.visible).collect();
            if vis.is_empty() {
                return vec![f64::NAN, f64::NAN];
            }
            let n = vis.len() as f64;
            vec![vis.iter().map(|k| k.x).sum::<f64>() / n, vis.iter().map(|k| k.y).sum::<f64>() / n]
        }
    }
}

fn polygon_centroid(pts: &[[f64; 2]]) -> [f64; 2] {
    let a = shoelace(pts);
    let n = pts.len();
    if a.abs() < 1e-15 {
        let k = n.max(1) as f64;
        return [pts.iter().map(|p| p[0]).sum::<f64>() / k, pts.iter().map(|p| p[1]).sum::<f64>() / k];
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let cross = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

/// Axis-aligned bounding rectangle `(x0, y0, x1, y1)` of any 2D geometry.
pub fn bounds(g: &Geometry) -> [f64; 4] {
    match g {
        Geometry::Box2D(b) => [b.x, b.y, b.x + b.w, b.y + b.h],
        Geometry::VoxelBox(v) => [v.x, v.y, v.x + v.w, v.y + v.h],
        Geometry::Polygon(pts) => bounds_of(pts.iter().copied()),
        Geometry::KeypointSet(kps) => bounds_of(kps.iter().filter(|k| k.visible).map(|k| [k.x, k.y])),
    }
}

fn bounds_of(pts: impl Iterator<Item = [f64; 2]>) -> [f64; 4] {
    let mut r = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in pts {
        r[0] = r[0].min(p[0]);
        r[1] = r[1].min(p[1]);
        r[2] = r[2].max(p[0]);
        r[3] = r[3].max(p[1]);
    }
    r
}

fn outline(g: &Geometry) -> Vec<[f64; 2]> {
    match g {
        Geometry::Box2D(b) => b.corners(),
        Geometry::Polygon(pts) => pts.clone(),
        _ => Vec::new(),
    }
}

/// Convex hull (counter-clockwise, no collinear points) by monotone chain.
pub fn convex_hull(pts: &mut [[f64; 2]]) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let n = pts.len();
    if n < 3 {
        return pts.to_vec();
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Area of the intersection of two simple polygons.
///
/// Both polygons are fan-triangulated; the signed triangle indicators sum
/// to the polygon indicator, so the intersection area is the signed sum of
/// pairwise convex triangle intersections. Self-intersecting input can
/// break that identity, in which case a raster estimate is used instead.
pub fn polygon_intersection_area(p: &[[f64; 2]], q: &[[f64; 2]]) -> f64 {
    if p.len() < 3 || q.len() < 3 {
        return 0.0;
    }
    let bp = bounds_of(p.iter().copied());
    let bq = bounds_of(q.iter().copied());
    if bp[2] <= bq[0] || bq[2] <= bp[0] || bp[3] <= bq[1] || bq[3] <= bp[1] {
        return 0.0;
    }
    let area_p = shoelace(p);
    let area_q = shoelace(q);
    let tp = fan(p);
    let tq = fan(q);
    let mut total = 0.0;
    for (ta, sa) in &tp {
        for (tb, sb) in &tq {
            total += sa * sb * convex_intersection_area(ta, tb);
        }
    }
    let inter = total * area_p.signum() * area_q.signum();
    let max = area_p.abs().min(area_q.abs());
    let eps = 1e-9 * (1.0 + max);
    if inter < -eps || inter > max + eps {
        return raster_intersection_area(p, q, 1024);
    }
    inter.clamp(0.0, max)
}

fn fan(p: &[[f64; 2]]) -> Vec<([[f64; 2]; 3], f64)> {
    (1..p.len() - 1)
        .filter_map(|i| {
            let t = [p[0], p[i], p[i + 1]];
            let s = cross(t[0], t[1], t[2]);
            if s == 0.0 {
                None
            } else if s > 0.0 {
                Some((t, 1.0))
            } else {
                Some(([t[0], t[2], t[1]], -1.0))
            }
        })
        .collect()
}

/// Sutherland–Hodgman clip of a counter-clockwise triangle by another.
fn convex_intersection_area(subject: &[[f64; 2]; 3], clip: &[[f64; 2]; 3]) -> f64 {
    let mut poly: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..3 {
        if poly.is_empty() {
            return 0.0;
        }
        let a = clip[i];
        let b = clip[(i + 1) % 3];
        let input = std::mem::take(&mut poly);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let cin = cross(a, b, cur) >= 0.0;
            let pin = cross(a, b, prev) >= 0.0;
            if cin {
                if !pin {
                    poly.push(line_intersection(prev, cur, a, b));
                }
                poly.push(cur);
            } else if pin {
                poly.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    shoelace(&poly).max(0.0)
}

fn line_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Even-odd raster estimate of the intersection area on an `n × n` grid
/// spanning the joint bounding box.
pub fn raster_intersection_area(p: &[[f64; 2]], q: &[[f64; 2]], n: usize) -> f64 {
    let bp = bounds_of(p.iter().copied());
    let bq = bounds_of(q.iter().copied());
    let x0 = bp[0].min(bq[0]);
    let y0 = bp[1].min(bq[1]);
    let sx = (bp[2].max(bq[2]) - x0) / n as f64;
    let sy = (bp[3].max(bq[3]) - y0) / n as f64;
    let mut hits = 0usize;
    for iy in 0..n {
        let y = y0 + (iy as f64 + 0.5) * sy;
        for ix in 0..n {
            let x = x0 + (ix as f64 + 0.5) * sx;
            if point_in_polygon(p, x, y) && point_in_polygon(q, x, y) {
                hits += 1;
            }
        }
    }
    hits as f64 * sx * sy
}

fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi[1] > y) != (pj[1] > y) && x < (pj[0] - pi[0]) * (y - pi[1]) / (pj[1] - pi[1]) + pi[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}
