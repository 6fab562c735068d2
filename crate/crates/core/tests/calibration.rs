use kalos_core::calibration::{bootstrap_samples, calibrate, estimate_tau_star, BootstrapOptions, PairingMode, SamplingOptions, DEFAULT_GRID_SIZE};
use kalos_core::dataset::parse_dataset_str;
use kalos_core::report::to_canonical_json;
use kalos_core::DistanceMetric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

fn gaussians(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = Normal::new(0.3, 0.1).unwrap();
    let e = Normal::new(0.7, 0.1).unwrap();
    let obs = (0..1000).map(|_| o.sample(&mut rng)).collect();
    let exp = (0..1000).map(|_| e.sample(&mut rng)).collect();
    (obs, exp)
}

#[test]
fn two_gaussians_cross_at_the_midpoint() {
    for seed in 0..5 {
        let (obs, exp) = gaussians(seed);
        let r = estimate_tau_star(&obs, &exp, DEFAULT_GRID_SIZE).unwrap();
        assert!((0.47..=0.53).contains(&r.tau_star), "seed {seed}: {}", r.tau_star);
        assert!(r.ks > 0.9, "seed {seed}: {}", r.ks);
        assert!(!r.no_crossover);
    }
}

#[test]
fn bootstrap_interval_covers_truth_and_is_reproducible() {
    let (obs, exp) = gaussians(42);
    let opts = BootstrapOptions { iterations: 100, seed: 9, ..BootstrapOptions::default() };
    let a = bootstrap_samples(&obs, &exp, &opts).unwrap();
    let b = bootstrap_samples(&obs, &exp, &opts).unwrap();
    assert_eq!(to_canonical_json(&a).unwrap(), to_canonical_json(&b).unwrap());
    let ci = a.entries[0].tau_star.unwrap();
    assert!(ci.lo <= 0.5 && 0.5 <= ci.hi, "{ci:?}");
    assert!(ci.hi - ci.lo < 0.1, "{ci:?}");
}

#[test]
fn identical_samples_have_no_separation() {
    let (obs, _) = gaussians(1);
    let r = estimate_tau_star(&obs, &obs, DEFAULT_GRID_SIZE).unwrap();
    assert_eq!(r.ks, 0.0);
}

/// Three raters draw jittered copies of the same objects; chance pairs come from other images.
#[test]
fn consistent_raters_separate_observed_from_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut anns = Vec::new();
    let images = 20;
    for i in 0..images {
        let objects: Vec<[f64; 2]> = (0..4).map(|_| [rng.random_range(0.0..0.8), rng.random_range(0.0..0.8)]).collect();
        for r in 0..3 {
            for (k, o) in objects.iter().enumerate() {
                let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.01..0.01);
                anns.push(json!({
                    "id": format!("i{i}r{r}o{k}"), "image_id": format!("img{i}"), "rater_id": format!("r{r}"), "category_id": "c",
                    "geometry": {"type": "bbox", "coordinates": [o[0] + jitter(&mut rng), o[1] + jitter(&mut rng), 0.15, 0.15]},
                }));
            }
        }
    }
    let doc = json!({
        "format_version": "1", "coordinate_mode": "relative",
        "images": (0..images).map(|i| json!({"id": format!("img{i}"), "width": 100, "height": 100})).collect::<Vec<_>>(),
        "raters": (0..3).map(|r| json!({"id": format!("r{r}")})).collect::<Vec<_>>(),
        "assignments": (0..images).flat_map(|i| (0..3).map(move |r| json!({"image_id": format!("img{i}"), "rater_id": format!("r{r}")}))).collect::<Vec<_>>(),
        "categories": [{"id": "c", "name": "c"}],
        "annotations": anns,
    });
    let d = parse_dataset_str(&doc.to_string()).unwrap();
    let opts = SamplingOptions { pairing: PairingMode::BestMatch, images_per_anchor: 1, seed: 0 };
    let (samples, r) = calibrate(&d, DistanceMetric::BoxIou, &opts, DEFAULT_GRID_SIZE).unwrap();
    assert!(!samples.observed.is_empty() && !samples.expected.is_empty());
    assert!(r.ks > 0.8, "{}", r.ks);
    assert!(r.tau_star > 0.1 && r.tau_star < 1.0, "{}", r.tau_star);
    let (again, r2) = calibrate(&d, DistanceMetric::BoxIou, &opts, DEFAULT_GRID_SIZE).unwrap();
    assert_eq!(samples.expected, again.expected);
    assert_eq!(r.tau_star, r2.tau_star);
}
