use std::collections::BTreeMap;

use kalos_core::{run_pipeline, CostFunction, DistanceMetric, KalosConfig, SolverKind, UnitSet};
use kalos_noise::{generate, synthetic_reference, NoiseModel, ReferenceSpec, SynthesisResult};
use kalos_validation::fixtures::{colocated_reference, cow_calf_fixture};
use kalos_validation::metrics::{adjusted_rand_index, clustering_ari, filtered_rand_index, pair_metrics, PairOutcome};
use kalos_validation::stability::permutation_stability;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

/// Units read straight off the generator's ground truth: one per reference
/// annotation, false positives alone.
fn truth_units(s: &SynthesisResult) -> Vec<UnitSet> {
    let mut by_image: BTreeMap<&str, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for a in &s.dataset.annotations {
        let key = s.correspondence[&a.id].clone().unwrap_or_else(|| format!("fp:{}", a.id));
        by_image.entry(a.image_id.as_str()).or_default().entry(key).or_default().push(a.id.clone());
    }
    by_image
        .into_iter()
        .map(|(img, units)| UnitSet { image_id: img.to_string(), units: units.into_values().collect() })
        .collect()
}

fn synth(lambda: f64, raters: usize, seed: u64) -> SynthesisResult {
    let reference = synthetic_reference(&ReferenceSpec { images: 8, seed, ..ReferenceSpec::default() });
    generate(&reference, &NoiseModel::reference(), lambda, raters, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 32,
        rng_seed: RngSeed::Fixed(3),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn reproducing_the_truth_scores_perfectly(lambda in 0.0..4.0f64, raters in 2..5usize, seed in 0..1000u64) {
        let s = synth(lambda, raters, seed);
        let units = truth_units(&s);
        if let Some(ri) = filtered_rand_index(&units, &s.dataset, &s.correspondence) {
            prop_assert_eq!(ri, 1.0);
        }
        let pm = pair_metrics(&units, &s.dataset, &s.correspondence, DistanceMetric::BoxIou);
        prop_assert_eq!(pm.fp, 0);
        prop_assert_eq!(pm.missed, 0);
        prop_assert_eq!(pm.cuckoo_eggs, 0);
    }

    #[test]
    fn pair_outcomes_are_conserved(lambda in 0.0..4.0f64, raters in 2..5usize, seed in 0..1000u64, solver in 0..3usize) {
        let s = synth(lambda, raters, seed);
        let cfg = KalosConfig::new(DistanceMetric::BoxIou, 0.5).with_solver(SolverKind::ALL[solver]);
        let pred = run_pipeline(&s.dataset, &cfg).unwrap().units;
        let pm = pair_metrics(&pred, &s.dataset, &s.correspondence, DistanceMetric::BoxIou);
        let count = |f: fn(&PairOutcome) -> bool| pm.outcomes.iter().filter(|o| f(o)).count();
        prop_assert_eq!(count(|o| matches!(o, PairOutcome::TruePositive { .. })), pm.tp);
        prop_assert_eq!(count(|o| matches!(o, PairOutcome::FalsePositive { .. })), pm.fp);
        prop_assert_eq!(count(|o| matches!(o, PairOutcome::MissedOpportunity { .. })), pm.missed);
        prop_assert_eq!(count(|o| matches!(o, PairOutcome::CuckooEgg { .. })), pm.cuckoo_eggs);
        prop_assert!(pm.cuckoo_eggs <= pm.missed);

        let truth_pm = pair_metrics(&truth_units(&s), &s.dataset, &s.correspondence, DistanceMetric::BoxIou);
        prop_assert_eq!(pm.tp + pm.missed, truth_pm.tp);
        if let Some(ri) = filtered_rand_index(&pred, &s.dataset, &s.correspondence) {
            prop_assert!((0.0..=1.0).contains(&ri));
        }
    }
}

#[test]
fn soft_cost_keeps_cow_and_calf_apart() {
    let d = cow_calf_fixture();
    let run = run_pipeline(&d, &KalosConfig::new(DistanceMetric::BoxIou, 0.5).with_cost(CostFunction::Soft)).unwrap();
    let mut units: Vec<Vec<String>> = run.units[0].units.clone();
    units.sort();
    assert_eq!(units, vec![vec!["A_calf".to_string(), "B_calf".to_string()], vec!["A_cow".to_string(), "B_cow".to_string()]]);
}

#[test]
fn greedy_ignores_input_order() {
    let reference = colocated_reference(30, 2);
    let s = generate(&reference, &NoiseModel::reference(), 1.0, 3, 2).unwrap();
    let r = permutation_stability(&s.dataset, &KalosConfig::new(DistanceMetric::BoxIou, 0.5), 20, 11).unwrap();
    assert_eq!(r.aris.len(), 20);
    assert!(r.aris.iter().all(|&a| a == 1.0), "{:?}", r.aris);
}

#[test]
fn ari_conventions() {
    assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &["x", "x", "y", "y"]), 1.0);
    assert_eq!(adjusted_rand_index(&[0, 0, 0], &[1, 1, 1]), 1.0);
    assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    let s = synth(1.0, 3, 4);
    let units = truth_units(&s);
    assert_eq!(clustering_ari(&units, &units), 1.0);
}
