//! Hand-built and seeded fixtures for solver validation.

use kalos_core::dataset::{
    Annotation, Assignment, BBox, Category, CategoryScope, Dataset, Geometry, ImageRecord, RaterRecord,
};
use kalos_core::rng::SeedPath;
use rand::Rng;

fn category(id: &str) -> Category {
    Category { id: id.into(), name: id.into() }
}

fn bbox_ann(id: &str, image: &str, rater: &str, cat: &str, b: BBox) -> Annotation {
    Annotation {
        id: id.into(),
        image_id: image.into(),
        rater_id: rater.into(),
        category_id: cat.into(),
        geometry: Geometry::Box2D(b),
    }
}

fn skeleton(images: &[String], raters: &[&str], categories: &[&str]) -> Dataset {
    Dataset {
        images: images.iter().map(|id| ImageRecord { id: id.clone(), width: 640, height: 480, depth: None, tag: None }).collect(),
        raters: raters.iter().map(|r| RaterRecord { id: (*r).into(), name: None }).collect(),
        assignments: images
            .iter()
            .flat_map(|i| raters.iter().map(move |r| Assignment { image_id: i.clone(), rater_id: (*r).into(), scope: CategoryScope::All }))
            .collect(),
        categories: categories.iter().map(|c| category(c)).collect(),
        annotations: Vec::new(),
    }
}

/// Cow with a calf inside it, drawn by two raters. Rater B's cow is shrunk so
/// that it overlaps A's calf more than A's cow; only the category term keeps
/// the units category-consistent.
pub fn cow_calf_fixture() -> Dataset {
    let mut d = skeleton(&["field".to_string()], &["A", "B"], &["calf", "cow"]);
    d.annotations = vec![
        bbox_ann("A_cow", "field", "A", "cow", BBox::new(0.1, 0.1, 0.4, 0.4)),
        bbox_ann("A_calf", "field", "A", "calf", BBox::new(0.25, 0.25, 0.25, 0.25)),
        bbox_ann("B_cow", "field", "B", "cow", BBox::new(0.2, 0.2, 0.3, 0.3)),
        bbox_ann("B_calf", "field", "B", "calf", BBox::new(0.28, 0.28, 0.2, 0.2)),
    ];
    d
}

/// Single-rater reference of co-located pairs: each scene is a large `cow`
/// box with a `calf` box nested inside it.
pub fn colocated_reference(images: usize, seed: u64) -> Dataset {
    let ids: Vec<String> = (0..images).map(|i| format!("scene_{i:03}")).collect();
    let mut d = skeleton(&ids, &["reference"], &["calf", "cow"]);
    for (i, img) in ids.iter().enumerate() {
        let mut rng = SeedPath::new(seed).with_str("colocated").with_u64(i as u64).rng();
        let scenes = rng.random_range(1..=3);
        let mut placed: Vec<BBox> = Vec::new();
        for _ in 0..100 {
            if placed.len() == scenes {
                break;
            }
            let (w, h) = (rng.random_range(0.18..0.3), rng.random_range(0.18..0.3));
            let cow = BBox::new(rng.random_range(0.0..1.0 - w), rng.random_range(0.0..1.0 - h), w, h);
            if placed.iter().all(|p| p.intersection_area(&cow) == 0.0) {
                placed.push(cow);
            }
        }
        for (k, cow) in placed.iter().enumerate() {
            let (fw, fh) = (rng.random_range(0.75..0.9), rng.random_range(0.75..0.9));
            let (cw, ch) = (cow.w * fw, cow.h * fh);
            let calf = BBox::new(cow.x + rng.random_range(0.0..cow.w - cw), cow.y + rng.random_range(0.0..cow.h - ch), cw, ch);
            d.annotations.push(bbox_ann(&format!("{img}_{k}_cow"), img, "reference", "cow", *cow));
            d.annotations.push(bbox_ann(&format!("{img}_{k}_calf"), img, "reference", "calf", calf));
        }
    }
    d
}
