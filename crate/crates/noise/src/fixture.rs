//! Seeded single-rater reference datasets of non-overlapping boxes.

use kalos_core::dataset::{Annotation, Assignment, BBox, Category, CategoryScope, Dataset, Geometry, ImageRecord, RaterRecord};
use kalos_core::rng::SeedPath;
use rand::Rng;

pub const REFERENCE_RATER: &str = "reference";
const PLACEMENT_TRIES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpec {
    pub images: usize,
    /// Inclusive range of annotations per image.
    pub per_image: (usize, usize),
    pub categories: usize,
    /// Relative area range, sampled log-uniformly.
    pub area_range: (f64, f64),
    pub seed: u64,
}

impl Default for ReferenceSpec {
    /// 50 images with about 300 annotations in 5 categories.
    fn default() -> Self {
        ReferenceSpec { images: 50, per_image: (3, 9), categories: 5, area_range: (0.004, 0.08), seed: 0 }
    }
}

pub fn synthetic_reference(spec: &ReferenceSpec) -> Dataset {
    let categories: Vec<Category> =
        (0..spec.categories).map(|k| Category { id: format!("c{k}"), name: format!("category {k}") }).collect();
    let mut d = Dataset {
        images: Vec::new(),
        raters: vec![RaterRecord { id: REFERENCE_RATER.into(), name: None }],
        assignments: Vec::new(),
        categories,
        annotations: Vec::new(),
    };
    let (lo, hi) = (spec.area_range.0.ln(), spec.area_range.1.ln());
    for i in 0..spec.images {
        let image_id = format!("img_{i:04}");
        let mut rng = SeedPath::new(spec.seed).with_str("reference").with_u64(i as u64).rng();
        let target = rng.random_range(spec.per_image.0..=spec.per_image.1);
        let mut placed: Vec<BBox> = Vec::new();
        for _ in 0..PLACEMENT_TRIES {
            if placed.len() == target {
                break;
            }
            let area = rng.random_range(lo..=hi).exp();
            let aspect = rng.random_range(-0.7f64..=0.7).exp();
            let (w, h) = ((area * aspect).sqrt(), (area / aspect).sqrt());
            let b = BBox::new(rng.random_range(0.0..=1.0 - w), rng.random_range(0.0..=1.0 - h), w, h);
            if placed.iter().all(|p| p.intersection_area(&b) == 0.0) {
                placed.push(b);
            }
        }
        for (j, b) in placed.into_iter().enumerate() {
            d.annotations.push(Annotation {
                id: format!("{image_id}_{j:02}"),
                image_id: image_id.clone(),
                rater_id: REFERENCE_RATER.into(),
                category_id: format!("c{}", rng.random_range(0..spec.categories)),
                geometry: Geometry::Box2D(b),
            });
        }
        d.assignments.push(Assignment {
            image_id: image_id.clone(),
            rater_id: REFERENCE_RATER.into(),
            scope: CategoryScope::All,
        });
        d.images.push(ImageRecord { id: image_id, width: 640, height: 480, depth: None, tag: None });
    }
    d
}
