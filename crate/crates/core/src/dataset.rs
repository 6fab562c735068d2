//! Canonical multi-rater dataset model and its JSON file format.
//!
//! Coordinates are stored relative to the owning image (`[0, 1]` on every
//! axis). Files in `absolute` coordinate mode are converted at parse time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Relative-area upper bound of the small size class (32² px on 640×480).
pub const SMALL_AREA_LIMIT: f64 = (32.0 * 32.0) / (640.0 * 480.0);
/// Relative-area upper bound of the medium size class (96² px on 640×480).
pub const MEDIUM_AREA_LIMIT: f64 = (96.0 * 96.0) / (640.0 * 480.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub name: String,
}

/// Which categories a rater was asked to annotate on an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CategoryScope {
    All,
    Only(BTreeSet<String>),
}

impl CategoryScope {
    pub fn contains(&self, category: &str) -> bool {
        match self {
            CategoryScope::All => true,
            CategoryScope::Only(set) => set.contains(category),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub image_id: String,
    pub rater_id: String,
    pub scope: CategoryScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox { x: cx - w / 2.0, y: cy - h / 2.0, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            0.0
        } else {
            ix * iy
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Smallest box enclosing both.
    pub fn union_box(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = (self.x + self.w).max(other.x + other.w);
        let y1 = (self.y + self.h).max(other.y + other.h);
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn corners(&self) -> Vec<[f64; 2]> {
        vec![
            [self.x, self.y],
            [self.x + self.w, self.y],
            [self.x + self.w, self.y + self.h],
            [self.x, self.y + self.h],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelBox {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub h: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

/// Localization payload of an annotation, in relative coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub enum Geometry {
    Box2D(BBox),
    Polygon(Vec<[f64; 2]>),
    VoxelBox(VoxelBox),
    KeypointSet(Vec<Keypoint>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Bbox,
    Polygon,
    VoxelBox,
    Keypoints,
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GeometryKind::Bbox => "bbox",
            GeometryKind::Polygon => "polygon",
            GeometryKind::VoxelBox => "voxel_box",
            GeometryKind::Keypoints => "keypoints",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    /// Half-open COCO-derived intervals on relative area.
    pub fn from_relative_area(area: f64) -> Self {
        if area < SMALL_AREA_LIMIT {
            SizeClass::Small
        } else if area < MEDIUM_AREA_LIMIT {
            SizeClass::Medium
        } else {
            SizeClass::Large
        }
    }
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::Box2D(_) => GeometryKind::Bbox,
            Geometry::Polygon(_) => GeometryKind::Polygon,
            Geometry::VoxelBox(_) => GeometryKind::VoxelBox,
            Geometry::KeypointSet(_) => GeometryKind::Keypoints,
        }
    }

    /// Fraction of the image area (or volume) covered.
    pub fn relative_area(&self) -> f64 {
        match self {
            Geometry::Box2D(b) => b.area(),
            Geometry::Polygon(pts) => shoelace(pts).abs(),
            Geometry::VoxelBox(v) => v.w * v.h * v.d,
            Geometry::KeypointSet(kps) => {
                let vis: Vec<&Keypoint> = kps.iter().filter(|k| k.visible).collect();
                if vis.is_empty() {
                    return 0.0;
                }
                let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
                for k in vis {
                    x0 = x0.min(k.x);
                    y0 = y0.min(k.y);
                    x1 = x1.max(k.x);
                    y1 = y1.max(k.y);
                }
                (x1 - x0) * (y1 - y0)
            }
        }
    }

    pub fn size_class(&self) -> SizeClass {
        SizeClass::from_relative_area(self.relative_area())
    }

    /// Flat coordinate list used for content-based ordering.
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            Geometry::Box2D(b) => vec![b.x, b.y, b.w, b.h],
            Geometry::Polygon(pts) => pts.iter().flat_map(|p| [p[0], p[1]]).collect(),
            Geometry::VoxelBox(v) => vec![v.x, v.y, v.z, v.w, v.h, v.d],
            Geometry::KeypointSet(kps) => kps
                .iter()
                .flat_map(|k| [k.x, k.y, if k.visible { 1.0 } else { 0.0 }])
                .collect(),
        }
    }

    /// Total order on geometry content: variant first, then coordinates.
    pub fn content_cmp(&self, other: &Geometry) -> std::cmp::Ordering {
        self.kind().cmp(&other.kind()).then_with(|| {
            let a = self.coordinates();
            let b = other.coordinates();
            for (x, y) in a.iter().zip(b.iter()) {
                let o = x.total_cmp(y);
                if o != std::cmp::Ordering::Equal {
                    return o;
                }
            }
            a.len().cmp(&b.len())
        })
    }

    fn is_finite(&self) -> bool {
        self.coordinates().iter().all(|v| v.is_finite())
    }
}

/// Signed shoelace area (positive for counter-clockwise vertex order).
pub fn shoelace(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        s += p[0] * q[1] - q[0] * p[1];
    }
    s / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates", rename_all = "snake_case")]
enum RawGeometry {
    Bbox([f64; 4]),
    Polygon(Vec<[f64; 2]>),
    VoxelBox([f64; 6]),
    Keypoints(Vec<[f64; 3]>),
}

impl TryFrom<RawGeometry> for Geometry {
    type Error = String;

    fn try_from(raw: RawGeometry) -> Result<Self, Self::Error> {
        Ok(match raw {
            RawGeometry::Bbox([x, y, w, h]) => Geometry::Box2D(BBox { x, y, w, h }),
            RawGeometry::Polygon(pts) => Geometry::Polygon(pts),
            RawGeometry::VoxelBox([x, y, z, w, h, d]) => Geometry::VoxelBox(VoxelBox { x, y, z, w, h, d }),
            RawGeometry::Keypoints(kps) => {
                let mut out = Vec::with_capacity(kps.len());
                for [x, y, v] in kps {
                    let visible = if v == 0.0 {
                        false
                    } else if v == 1.0 {
                        true
                    } else {
                        return Err(format!("keypoint visibility must be 0 or 1, got {v}"));
                    };
                    out.push(Keypoint { x, y, visible });
                }
                Geometry::KeypointSet(out)
            }
        })
    }
}

impl From<Geometry> for RawGeometry {
    fn from(g: Geometry) -> Self {
        match g {
            Geometry::Box2D(b) => RawGeometry::Bbox([b.x, b.y, b.w, b.h]),
            Geometry::Polygon(pts) => RawGeometry::Polygon(pts),
            Geometry::VoxelBox(v) => RawGeometry::VoxelBox([v.x, v.y, v.z, v.w, v.h, v.d]),
            Geometry::KeypointSet(kps) => RawGeometry::Keypoints(
                kps.into_iter()
                    .map(|k| [k.x, k.y, if k.visible { 1.0 } else { 0.0 }])
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub image_id: String,
    pub rater_id: String,
    pub category_id: String,
    pub geometry: Geometry,
}

/// A multi-rater annotation set. Immutable once parsed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub raters: Vec<RaterRecord>,
    pub assignments: Vec<Assignment>,
    pub categories: Vec<Category>,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset document: {0}")]
    Malformed(String),
    #[error("schema violation in {record}: {message}")]
    Schema { record: String, message: String },
    #[error("mixed geometry variants: annotation '{record}' is {found}, dataset uses {expected}")]
    MixedGeometry {
        record: String,
        found: GeometryKind,
        expected: GeometryKind,
    },
    #[error("{0}")]
    Invalid(Violation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    DuplicateId,
    Image,
    Reference,
    Assignment,
    CategoryScope,
    Geometry,
    MixedGeometry,
    Skeleton,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Check::DuplicateId => "duplicate id",
            Check::Image => "image",
            Check::Reference => "referential integrity",
            Check::Assignment => "assignment",
            Check::CategoryScope => "category scope",
            Check::Geometry => "geometry",
            Check::MixedGeometry => "mixed geometry",
            Check::Skeleton => "keypoint skeleton",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: Check,
    pub record: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation in '{}': {}", self.check, self.record, self.message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckCount {
    pub checked: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: BTreeMap<Check, CheckCount>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, check: Check, ok: bool, record: &str, message: impl FnOnce() -> String) {
        let c = self.checks.entry(check).or_default();
        c.checked += 1;
        if !ok {
            c.failed += 1;
            self.violations.push(Violation { check, record: record.to_string(), message: message() });
        }
    }
}

/// Checks every dataset invariant and reports all violations.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut rep = ValidationReport::default();

    let mut image_ids = BTreeMap::new();
    for img in &d.images {
        let fresh = image_ids.insert(img.id.as_str(), img).is_none();
        rep.record(Check::DuplicateId, fresh, &img.id, || "duplicate image id".into());
        let dims_ok = img.width > 0 && img.height > 0 && img.depth.is_none_or(|z| z > 0);
        rep.record(Check::Image, dims_ok, &img.id, || "image dimensions must be positive".into());
    }
    let mut rater_ids = BTreeSet::new();
    for r in &d.raters {
        let fresh = rater_ids.insert(r.id.as_str());
        rep.record(Check::DuplicateId, fresh, &r.id, || "duplicate rater id".into());
    }
    let mut category_ids = BTreeSet::new();
    for c in &d.categories {
        let fresh = category_ids.insert(c.id.as_str());
        rep.record(Check::DuplicateId, fresh, &c.id, || "duplicate category id".into());
    }

    let mut assigned: BTreeMap<(&str, &str), &CategoryScope> = BTreeMap::new();
    for a in &d.assignments {
        let key = format!("{}/{}", a.image_id, a.rater_id);
        let fresh = assigned.insert((a.image_id.as_str(), a.rater_id.as_str()), &a.scope).is_none();
        rep.record(Check::DuplicateId, fresh, &key, || "duplicate (image, rater) assignment".into());
        rep.record(Check::Reference, image_ids.contains_key(a.image_id.as_str()), &key, || {
            format!("assignment references unknown image '{}'", a.image_id)
        });
        rep.record(Check::Reference, rater_ids.contains(a.rater_id.as_str()), &key, || {
            format!("assignment references unknown rater '{}'", a.rater_id)
        });
        if let CategoryScope::Only(set) = &a.scope {
            for c in set {
                rep.record(Check::Reference, category_ids.contains(c.as_str()), &key, || {
                    format!("assignment scope references unknown category '{c}'")
                });
            }
        }
    }

    let mut ann_ids = BTreeSet::new();
    let expected_kind = d.annotations.first().map(|a| a.geometry.kind());
    let skeleton_len = d.annotations.iter().find_map(|a| match &a.geometry {
        Geometry::KeypointSet(k) => Some(k.len()),
        _ => None,
    });
    for a in &d.annotations {
        let fresh = ann_ids.insert(a.id.as_str());
        rep.record(Check::DuplicateId, fresh, &a.id, || "duplicate annotation id".into());
        rep.record(Check::Reference, image_ids.contains_key(a.image_id.as_str()), &a.id, || {
            format!("annotation references unknown image '{}'", a.image_id)
        });
        rep.record(Check::Reference, rater_ids.contains(a.rater_id.as_str()), &a.id, || {
            format!("annotation references unknown rater '{}'", a.rater_id)
        });
        rep.record(Check::Reference, category_ids.contains(a.category_id.as_str()), &a.id, || {
            format!("annotation references unknown category '{}'", a.category_id)
        });
        let scope = assigned.get(&(a.image_id.as_str(), a.rater_id.as_str()));
        rep.record(Check::Assignment, scope.is_some(), &a.id, || {
            format!("rater '{}' is not assigned to image '{}'", a.rater_id, a.image_id)
        });
        if let Some(scope) = scope {
            rep.record(Check::CategoryScope, scope.contains(&a.category_id), &a.id, || {
                format!("category '{}' is outside the rater's scope", a.category_id)
            });
        }
        if let Some(kind) = expected_kind {
            rep.record(Check::MixedGeometry, a.geometry.kind() == kind, &a.id, || {
                format!("geometry is {}, dataset uses {}", a.geometry.kind(), kind)
            });
        }
        let geom = geometry_problem(&a.geometry);
        rep.record(Check::Geometry, geom.is_none(), &a.id, || geom.clone().unwrap_or_default());
        if let (Geometry::KeypointSet(k), Some(len)) = (&a.geometry, skeleton_len) {
            rep.record(Check::Skeleton, k.len() == len, &a.id, || {
                format!("skeleton has {} keypoints, dataset uses {len}", k.len())
            });
        }
    }
    rep
}

fn geometry_problem(g: &Geometry) -> Option<String> {
    if !g.is_finite() {
        return Some("non-finite coordinate".into());
    }
    match g {
        Geometry::Box2D(b) => {
            if b.w <= 0.0 || b.h <= 0.0 {
                Some(format!("box extent must be positive (w={}, h={})", b.w, b.h))
            } else if !(b.x < 1.0 && b.y < 1.0 && b.x + b.w > 0.0 && b.y + b.h > 0.0) {
                Some("box does not intersect the image".into())
            } else {
                None
            }
        }
        Geometry::Polygon(pts) => {
            if pts.len() < 3 {
                Some(format!("polygon needs at least 3 vertices, got {}", pts.len()))
            } else if shoelace(pts).abs() <= 1e-12 {
                Some("polygon has zero area".into())
            } else {
                None
            }
        }
        Geometry::VoxelBox(v) => {
            if v.w <= 0.0 || v.h <= 0.0 || v.d <= 0.0 {
                Some("voxel box extent must be positive".into())
            } else if !(v.x < 1.0 && v.y < 1.0 && v.z < 1.0 && v.x + v.w > 0.0 && v.y + v.h > 0.0 && v.z + v.d > 0.0) {
                Some("voxel box does not intersect the volume".into())
            } else {
                None
            }
        }
        Geometry::KeypointSet(kps) => {
            if kps.iter().any(|k| k.visible) {
                None
            } else {
                Some("keypoint set has no visible point".into())
            }
        }
    }
}

/// Lookup tables over a dataset, built once per pipeline run.
#[derive(Debug, Clone)]
pub struct DatasetIndex<'a> {
    pub by_image: BTreeMap<&'a str, Vec<&'a Annotation>>,
    pub assigned: BTreeMap<&'a str, BTreeMap<&'a str, &'a CategoryScope>>,
    pub images: BTreeMap<&'a str, &'a ImageRecord>,
}

impl<'a> DatasetIndex<'a> {
    pub fn new(d: &'a Dataset) -> Self {
        let mut by_image: BTreeMap<&str, Vec<&Annotation>> = BTreeMap::new();
        let mut images = BTreeMap::new();
        for img in &d.images {
            by_image.entry(img.id.as_str()).or_default();
            images.insert(img.id.as_str(), img);
        }
        for a in &d.annotations {
            by_image.entry(a.image_id.as_str()).or_default().push(a);
        }
        let mut assigned: BTreeMap<&str, BTreeMap<&str, &CategoryScope>> = BTreeMap::new();
        for img in &d.images {
            assigned.entry(img.id.as_str()).or_default();
        }
        for a in &d.assignments {
            assigned.entry(a.image_id.as_str()).or_default().insert(a.rater_id.as_str(), &a.scope);
        }
        DatasetIndex { by_image, assigned, images }
    }

    pub fn annotations(&self, image_id: &str) -> &[&'a Annotation] {
        self.by_image.get(image_id).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn assigned_raters(&self, image_id: &str) -> Vec<&'a str> {
        self.assigned.get(image_id).map(|m| m.keys().copied().collect()).unwrap_or_default()
    }

    pub fn scope(&self, image_id: &str, rater_id: &str) -> Option<&'a CategoryScope> {
        self.assigned.get(image_id).and_then(|m| m.get(rater_id).copied())
    }
}

impl Dataset {
    pub fn geometry_kind(&self) -> Option<GeometryKind> {
        self.annotations.first().map(|a| a.geometry.kind())
    }

    pub fn image(&self, id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn index(&self) -> DatasetIndex<'_> {
        DatasetIndex::new(self)
    }

    /// Sub-dataset keeping only the listed raters (assignments and annotations).
    pub fn restrict_raters(&self, keep: &BTreeSet<String>) -> Dataset {
        Dataset {
            images: self.images.clone(),
            raters: self.raters.iter().filter(|r| keep.contains(&r.id)).cloned().collect(),
            assignments: self.assignments.iter().filter(|a| keep.contains(&a.rater_id)).cloned().collect(),
            categories: self.categories.clone(),
            annotations: self.annotations.iter().filter(|a| keep.contains(&a.rater_id)).cloned().collect(),
        }
    }

    /// Sub-dataset keeping only the listed images.
    pub fn restrict_images(&self, keep: &BTreeSet<String>) -> Dataset {
        Dataset {
            images: self.images.iter().filter(|i| keep.contains(&i.id)).cloned().collect(),
            raters: self.raters.clone(),
            assignments: self.assignments.iter().filter(|a| keep.contains(&a.image_id)).cloned().collect(),
            categories: self.categories.clone(),
            annotations: self.annotations.iter().filter(|a| keep.contains(&a.image_id)).cloned().collect(),
        }
    }

    /// Canonical JSON document (relative coordinates).
    pub fn to_json(&self) -> Value {
        let assignments: Vec<Value> = self
            .assignments
            .iter()
            .map(|a| {
                let mut m = serde_json::Map::new();
                m.insert("image_id".into(), Value::String(a.image_id.clone()));
                m.insert("rater_id".into(), Value::String(a.rater_id.clone()));
                if let CategoryScope::Only(set) = &a.scope {
                    m.insert("categories".into(), set.iter().cloned().map(Value::String).collect());
                }
                Value::Object(m)
            })
            .collect();
        serde_json::json!({
            "format_version": "1",
            "coordinate_mode": "relative",
            "images": self.images,
            "raters": self.raters,
            "assignments": assignments,
            "categories": self.categories,
            "annotations": self.annotations,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssignment {
    image_id: String,
    rater_id: String,
    #[serde(default)]
    categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CoordinateMode {
    Relative,
    Absolute,
}

fn record_name(section: &str, idx: usize, v: &Value) -> String {
    match v.get("id").and_then(Value::as_str) {
        Some(id) => format!("{section}[{idx}] '{id}'"),
        None => match (v.get("image_id").and_then(Value::as_str), v.get("rater_id").and_then(Value::as_str)) {
            (Some(i), Some(r)) => format!("{section}[{idx}] '{i}/{r}'"),
            _ => format!("{section}[{idx}]"),
        },
    }
}

fn section<T: serde::de::DeserializeOwned>(doc: &serde_json::Map<String, Value>, key: &str) -> Result<Vec<T>, DatasetError> {
    let arr = match doc.get(key) {
        Some(Value::Array(a)) => a,
        Some(_) => {
            return Err(DatasetError::Schema { record: key.into(), message: "expected an array".into() })
        }
        None => {
            return Err(DatasetError::Schema { record: "document".into(), message: format!("missing field '{key}'") })
        }
    };
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v.clone())
                .map_err(|e| DatasetError::Schema { record: record_name(key, i, v), message: e.to_string() })
        })
        .collect()
}

/// Parses and validates a canonical dataset document.
pub fn parse_dataset_str(text: &str) -> Result<Dataset, DatasetError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| DatasetError::Malformed(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| DatasetError::Malformed("top-level value must be an object".into()))?;
    match obj.get("format_version") {
        Some(Value::String(v)) if v == "1" => {}
        Some(other) => {
            return Err(DatasetError::Schema {
                record: "document".into(),
                message: format!("unsupported format_version {other}"),
            })
        }
        None => {
            return Err(DatasetError::Schema { record: "document".into(), message: "missing field 'format_version'".into() })
        }
    }
    let mode: CoordinateMode = match obj.get("coordinate_mode") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| DatasetError::Schema {
            record: "document".into(),
            message: format!("coordinate_mode: {e}"),
        })?,
        None => {
            return Err(DatasetError::Schema { record: "document".into(), message: "missing field 'coordinate_mode'".into() })
        }
    };

    let images: Vec<ImageRecord> = section(obj, "images")?;
    let raters: Vec<RaterRecord> = section(obj, "raters")?;
    let raw_assignments: Vec<RawAssignment> = section(obj, "assignments")?;
    let categories: Vec<Category> = section(obj, "categories")?;
    let mut annotations: Vec<Annotation> = section(obj, "annotations")?;

    let assignments = raw_assignments
        .into_iter()
        .map(|a| Assignment {
            image_id: a.image_id,
            rater_id: a.rater_id,
            scope: match a.categories {
                None => CategoryScope::All,
                Some(c) => CategoryScope::Only(c.into_iter().collect()),
            },
        })
        .collect();

    if mode == CoordinateMode::Absolute {
        let dims: BTreeMap<&str, &ImageRecord> = images.iter().map(|i| (i.id.as_str(), i)).collect();
        for a in &mut annotations {
            let img = dims.get(a.image_id.as_str()).ok_or_else(|| {
                DatasetError::Invalid(Violation {
                    check: Check::Reference,
                    record: a.id.clone(),
                    message: format!("annotation references unknown image '{}'", a.image_id),
                })
            })?;
            a.geometry = to_relative(&a.geometry, img).map_err(|message| DatasetError::Schema {
                record: format!("annotations '{}'", a.id),
                message,
            })?;
        }
    }

    let d = Dataset { images, raters, assignments, categories, annotations };
    let report = validate_dataset(&d);
    if let Some(v) = report.violations.into_iter().next() {
        if v.check == Check::MixedGeometry {
            let ann = d.annotations.iter().find(|a| a.id == v.record);
            let expected = d.geometry_kind().unwrap_or(GeometryKind::Bbox);
            let found = ann.map(|a| a.geometry.kind()).unwrap_or(expected);
            return Err(DatasetError::MixedGeometry { record: v.record, found, expected });
        }
        return Err(DatasetError::Invalid(v));
    }
    Ok(d)
}

/// Reads and validates a dataset file.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_dataset_str(&text)
}

fn to_relative(g: &Geometry, img: &ImageRecord) -> Result<Geometry, String> {
    let w = f64::from(img.width);
    let h = f64::from(img.height);
    if w <= 0.0 || h <= 0.0 {
        return Err(format!("image '{}' has zero extent", img.id));
    }
    Ok(match g {
        Geometry::Box2D(b) => Geometry::Box2D(BBox::new(b.x / w, b.y / h, b.w / w, b.h / h)),
        Geometry::Polygon(pts) => Geometry::Polygon(pts.iter().map(|p| [p[0] / w, p[1] / h]).collect()),
        Geometry::VoxelBox(v) => {
            let d = f64::from(
                img.depth
                    .ok_or_else(|| format!("voxel annotation on image '{}' without depth", img.id))?,
            );
            Geometry::VoxelBox(VoxelBox { x: v.x / w, y: v.y / h, z: v.z / d, w: v.w / w, h: v.h / h, d: v.d / d })
        }
        Geometry::KeypointSet(k) => Geometry::KeypointSet(
            k.iter().map(|p| Keypoint { x: p.x / w, y: p.y / h, visible: p.visible }).collect(),
        ),
    })
}
