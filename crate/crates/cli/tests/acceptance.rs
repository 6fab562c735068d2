//! Acceptance suite: every criterion runs, prints one PASS/FAIL line, and the
//! process exits non-zero if any failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use kalos_core::calibration::{bootstrap_samples, estimate_tau_star, BootstrapOptions, DEFAULT_GRID_SIZE};
use kalos_core::dataset::{BBox, Keypoint, VoxelBox};
use kalos_core::geometry::distance;
use kalos_core::reliability::{krippendorff_alpha, Cell, CoincidenceCounts, Value};
use kalos_core::report::to_canonical_json;
use kalos_core::stats::{
    fit_beta, fit_logistic, fit_normal, fit_poisson, fit_student_t, fit_vonmises_mixture, sample_vonmises, MixtureMode, CARDINALS,
};
use kalos_core::{run_pipeline, CostFunction, Dataset, DistanceMetric, Geometry, KalosConfig, SolverKind};
use kalos_noise::{extract_errors, fit_noise_model, generate, perturb_style, synthetic_reference, NoiseModel, ReferenceSpec};
use kalos_validation::fixtures::{colocated_reference, cow_calf_fixture};
use kalos_validation::stability::permutation_stability;
use kalos_validation::suite::{collaboration_alpha, evaluate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, Poisson, StudentT};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    ensure(start.elapsed() < limit, || format!("took {:.1?}, limit {limit:?}", start.elapsed()))
}

fn rel(got: f64, want: f64) -> f64 {
    (got / want - 1.0).abs()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn box_cfg() -> KalosConfig {
    KalosConfig::new(DistanceMetric::BoxIou, 0.5)
}

fn mean_alpha(d: &Dataset, cfg: &KalosConfig) -> f64 {
    kalos_core::pipeline::mean_alpha_of(d, cfg).unwrap().expect("alpha defined")
}

/// Nominal alpha by direct enumeration of ordered value pairs.
fn alpha_oracle(columns: &[Vec<Cell>]) -> Option<f64> {
    let units: Vec<Vec<Value>> =
        columns.iter().map(|c| c.iter().filter_map(Cell::value).collect::<Vec<_>>()).filter(|v| v.len() >= 2).collect();
    let all: Vec<&Value> = units.iter().flatten().collect();
    let n = all.len() as f64;
    if n < 2.0 {
        return None;
    }
    let mut d_o = 0.0;
    for u in &units {
        let w = 1.0 / (u.len() as f64 - 1.0);
        for (i, a) in u.iter().enumerate() {
            d_o += u.iter().enumerate().filter(|&(j, b)| i != j && a != b).count() as f64 * w;
        }
    }
    let d_e = all.iter().enumerate().map(|(i, a)| all.iter().enumerate().filter(|&(j, b)| i != j && a != b).count()).sum::<usize>() as f64;
    let (d_o, d_e) = (d_o / n, d_e / (n * (n - 1.0)));
    Some(if d_e == 0.0 { 1.0 } else { 1.0 - d_o / d_e })
}

fn alpha_of(columns: &[Vec<Cell>]) -> Option<f64> {
    krippendorff_alpha(&CoincidenceCounts::from_columns(columns)).value
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let raters = rng.random_range(2..=5);
        let units = rng.random_range(1..=10);
        let categories = rng.random_range(1..=4);
        let columns: Vec<Vec<Cell>> = (0..units)
            .map(|_| {
                (0..raters)
                    .map(|_| {
                        if rng.random::<f64>() < 0.2 {
                            Cell::Missing
                        } else {
                            match rng.random_range(0..=categories) {
                                k if k == categories => Cell::NoObject,
                                k => Cell::Category(format!("c{k}")),
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        match (alpha_of(&columns), alpha_oracle(&columns)) {
            (None, None) => {}
            (Some(got), Some(want)) => worst = worst.max((got - want).abs()),
            (got, want) => return Err(format!("case {case}: {got:?} vs oracle {want:?}")),
        }
    }
    ensure(worst < 1e-12, || format!("max deviation {worst:e}"))?;
    within(Duration::from_secs(10), start)?;
    Ok(format!("1000 matrices, max deviation {worst:.1e}"))
}

fn alpha_anchors() -> Outcome {
    let cat = |s: &str| Cell::Category(s.into());
    let cols = |rows: [Vec<Cell>; 2]| -> Vec<Vec<Cell>> { (0..rows[0].len()).map(|u| vec![rows[0][u].clone(), rows[1][u].clone()]).collect() };
    let a = alpha_of(&cols([vec![cat("a"), cat("a"), cat("b"), cat("b")], vec![cat("a"), cat("b"), cat("b"), cat("b")]]));
    ensure(a == Some(16.0 / 30.0), || format!("(a,a,b,b)/(a,b,b,b) gave {a:?}"))?;
    let b = alpha_of(&cols([vec![cat("a"), cat("b")], vec![cat("b"), cat("a")]]));
    ensure(b == Some(-0.5), || format!("(a,b)/(b,a) gave {b:?}"))?;
    let c = alpha_of(&[vec![cat("a"); 3], vec![cat("b"); 3], vec![Cell::NoObject; 3]]);
    ensure(c == Some(1.0), || format!("unanimous gave {c:?}"))?;
    Ok("16/30, -0.5 and 1.0 exact".into())
}

fn monotonic_decrease() -> Outcome {
    let start = Instant::now();
    let reference = synthetic_reference(&ReferenceSpec::default());
    let model = NoiseModel::reference();
    let lambdas = [0.25, 0.5, 1.0, 2.0, 5.0];
    let means: Vec<f64> = lambdas
        .iter()
        .map(|&l| mean(&(0..5).map(|s| mean_alpha(&generate(&reference, &model, l, 3, s).unwrap().dataset, &box_cfg())).collect::<Vec<_>>()))
        .collect();
    ensure(means.windows(2).all(|w| w[1] < w[0]), || format!("not decreasing: {}", fmt(&means)))?;
    ensure(means[0] > 0.8 && means[4] < 0.3, || format!("range not spanned: {}", fmt(&means)))?;
    let jump = means.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    ensure(jump <= 0.6, || format!("adjacent jump {jump:.3}: {}", fmt(&means)))?;
    within(Duration::from_secs(120), start)?;
    Ok(format!("{} annotations; mean alpha {}", reference.annotations.len(), fmt(&means)))
}

fn rater_returns() -> Outcome {
    let reference = synthetic_reference(&ReferenceSpec::default());
    let model = NoiseModel::reference();
    let seeds = 20;
    let means: Vec<f64> = (2..=8)
        .map(|n| mean(&(0..seeds).map(|s| mean_alpha(&generate(&reference, &model, 1.0, n, s).unwrap().dataset, &box_cfg())).collect::<Vec<_>>()))
        .collect();
    ensure(means.windows(2).all(|w| w[1] >= w[0]), || format!("decrease: {}", fmt(&means)))?;
    let (first, last) = (means[1] - means[0], means[6] - means[5]);
    ensure(last < first, || format!("increment 7→8 {last:.4} not below 2→3 {first:.4}"))?;
    Ok(format!("{seeds} seeds; raters 2..8 alpha {}", fmt(&means)))
}

fn collaboration_clusters() -> Outcome {
    let reference = synthetic_reference(&ReferenceSpec::default());
    let model = NoiseModel::reference();
    let mut lines = Vec::new();
    for s in 0..5u64 {
        let style = perturb_style(&reference, &model, 2.0, s).unwrap();
        let alpha = |g| collaboration_alpha(&reference, &style, g, &model, 1.0, &box_cfg(), s).unwrap().0.unwrap();
        let (a51, a33, a22) = (alpha((5, 1)), alpha((3, 3)), alpha((2, 2)));
        ensure(a51 - a33 > 0.02 && a51 - a22 > 0.02, || format!("seed {s}: 5-1 {a51:.3}, 3-3 {a33:.3}, 2-2 {a22:.3}"))?;
        lines.push(format!("{a51:.2}/{a33:.2}/{a22:.2}"));
    }
    Ok(format!("5-1/3-3/2-2 per seed {}", lines.join(" ")))
}

fn greedy_stability() -> Outcome {
    let reference = synthetic_reference(&ReferenceSpec { images: 30, seed: 6, ..ReferenceSpec::default() });
    let noisy = generate(&reference, &NoiseModel::reference(), 1.0, 3, 6).unwrap();
    let r = permutation_stability(&noisy.dataset, &box_cfg().with_solver(SolverKind::Greedy), 20, 6).unwrap();
    ensure(r.aris.len() == 20 && r.aris.iter().all(|&a| a == 1.0), || format!("ARIs {:?}", r.aris))?;
    Ok(format!("20 permutations, {} annotations, ARI 1.0", noisy.dataset.annotations.len()))
}

fn solver_ordering() -> Outcome {
    let reference = synthetic_reference(&ReferenceSpec::default());
    let model = NoiseModel::reference();
    let mut ordered = 0;
    let mut min_precision = f64::INFINITY;
    let mut lines = Vec::new();
    for s in 0..5u64 {
        let synths: Vec<_> = [0.5, 1.0, 2.0].iter().map(|&l| generate(&reference, &model, l, 3, s).unwrap()).collect();
        let f1: Vec<f64> = SolverKind::ALL
            .iter()
            .map(|&solver| {
                mean(&synths
                    .iter()
                    .map(|g| {
                        let row = evaluate(g, &box_cfg().with_solver(solver)).unwrap();
                        min_precision = min_precision.min(row.precision.unwrap());
                        row.f1.unwrap()
                    })
                    .collect::<Vec<_>>())
            })
            .collect();
        if f1[0] >= f1[1] && f1[1] >= f1[2] {
            ordered += 1;
        }
        lines.push(fmt(&f1));
    }
    ensure(SolverKind::ALL == [SolverKind::Greedy, SolverKind::Shm, SolverKind::Ahc], || "unexpected solver order".into())?;
    ensure(ordered >= 4, || format!("ordered in {ordered}/5 seeds: {}", lines.join(" | ")))?;
    ensure(min_precision >= 0.9, || format!("precision {min_precision:.3}"))?;
    Ok(format!("greedy ≥ shm ≥ ahc in {ordered}/5 seeds, min precision {min_precision:.3}"))
}

fn cost_ordering() -> Outcome {
    let model = NoiseModel::reference();
    let mut pairs = Vec::new();
    for s in 0..5u64 {
        let synth = generate(&colocated_reference(30, s), &model, 1.0, 3, s).unwrap();
        let ri = |c| evaluate(&synth, &box_cfg().with_cost(c)).unwrap().filtered_rand_index.unwrap();
        let (soft, neg) = (ri(CostFunction::Soft), ri(CostFunction::Neg));
        ensure(soft >= neg, || format!("seed {s}: soft {soft:.4} < neg {neg:.4}"))?;
        pairs.push(format!("{soft:.3}/{neg:.3}"));
    }
    let run = run_pipeline(&cow_calf_fixture(), &box_cfg().with_cost(CostFunction::Soft)).unwrap();
    let mut units = run.units[0].units.clone();
    units.sort();
    let want = vec![vec!["A_calf".to_string(), "B_calf".into()], vec!["A_cow".into(), "B_cow".into()]];
    ensure(units == want, || format!("cow/calf units {units:?}"))?;
    Ok(format!("soft/neg filtered RI {}; cow/calf resolved", pairs.join(" ")))
}

fn calibration_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (o, e) = (Normal::new(0.3f64, 0.1).unwrap(), Normal::new(0.7f64, 0.1).unwrap());
    let obs: Vec<f64> = (0..1000).map(|_| o.sample(&mut rng).clamp(0.0, 1.0)).collect();
    let exp: Vec<f64> = (0..1000).map(|_| e.sample(&mut rng).clamp(0.0, 1.0)).collect();
    let r = estimate_tau_star(&obs, &exp, DEFAULT_GRID_SIZE).unwrap();
    ensure((0.47..=0.53).contains(&r.tau_star), || format!("tau* {}", r.tau_star))?;
    ensure(r.ks > 0.9, || format!("KS {}", r.ks))?;
    let opts = BootstrapOptions { iterations: 100, seed: 17, ..BootstrapOptions::default() };
    let a = to_canonical_json(&bootstrap_samples(&obs, &exp, &opts).unwrap()).unwrap();
    let table = bootstrap_samples(&obs, &exp, &opts).unwrap();
    ensure(a == to_canonical_json(&table).unwrap(), || "bootstrap not reproducible".into())?;
    let ci = table.entries[0].tau_star.ok_or("no bootstrap interval")?;
    ensure(ci.lo <= 0.5 && 0.5 <= ci.hi, || format!("CI [{:.4}, {:.4}]", ci.lo, ci.hi))?;
    Ok(format!("tau* {:.4}, KS {:.3}, CI [{:.4}, {:.4}]", r.tau_star, r.ks, ci.lo, ci.hi))
}

fn closed_loop() -> Outcome {
    let truth = NoiseModel::reference();
    let reference = synthetic_reference(&ReferenceSpec { images: 1700, ..ReferenceSpec::default() });
    let synth = generate(&reference, &truth, 1.0, 1, 7).unwrap();
    let corpus = extract_errors(&common::with_reference(&synth.dataset, &reference), &[]).unwrap();
    let fit = fit_noise_model(&corpus, None, None).unwrap();
    let (t, f) = (&truth.localization.translation, &fit.localization.translation);
    let mut checks = vec![
        ("translation slope", f.slope, t.slope),
        ("residual scale", f.residual.sigma, t.residual.sigma),
        ("category rate", fit.category.p_global, truth.category.p_global),
    ];
    for (k, (tc, fc)) in truth.localization.direction.components.iter().zip(&fit.localization.direction.components).enumerate() {
        checks.push((["weight 0", "weight π/2", "weight π", "weight 3π/2"][k], fc.weight, tc.weight));
    }
    for &(name, got, want) in &checks {
        ensure(rel(got, want) < 0.25, || format!("{name}: {got:.5} vs {want:.5}"))?;
    }

    let small = synthetic_reference(&ReferenceSpec::default());
    let zero = generate(&small, &truth, 0.0, 1, 3).unwrap();
    let mut by_src: Vec<_> = zero.dataset.annotations.iter().map(|a| (zero.correspondence[&a.id].clone().unwrap(), a)).collect();
    by_src.sort_by(|a, b| a.0.cmp(&b.0));
    let mut want: Vec<_> = small.annotations.iter().collect();
    want.sort_by(|a, b| a.id.cmp(&b.id));
    ensure(
        by_src.len() == want.len()
            && by_src.iter().zip(&want).all(|((src, a), r)| *src == r.id && a.geometry == r.geometry && a.category_id == r.category_id),
        || "lambda 0 differs from the reference".into(),
    )?;

    let losses: Vec<f64> =
        [0.25, 0.5, 1.0, 2.0, 5.0].iter().map(|&l| generate(&small, &truth, l, 3, 1).unwrap().signal_loss.ratio).collect();
    ensure(losses.windows(2).all(|w| w[0] <= w[1]), || format!("signal loss {}", fmt(&losses)))?;
    let worst = checks.iter().map(|c| rel(c.1, c.2)).fold(0.0, f64::max);
    Ok(format!(
        "{} annotations, worst relative error {:.1}%; lambda 0 exact; signal loss {}",
        reference.annotations.len(),
        100.0 * worst,
        fmt(&losses)
    ))
}

fn distribution_fitters() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;

    let t5 = StudentT::new(5.0).unwrap();
    let xs: Vec<f64> = (0..n).map(|_| t5.sample(&mut rng)).collect();
    let t = fit_student_t(&xs).unwrap();
    ensure((4.0..=6.5).contains(&t.nu) && t.mu.abs() <= 0.05, || format!("t fit {t:?}"))?;
    let t3 = StudentT::new(3.0).unwrap();
    let heavy: Vec<f64> = (0..n).map(|_| t3.sample(&mut rng)).collect();
    let (ht, hn) = (fit_student_t(&heavy).unwrap(), fit_normal(&heavy).unwrap());
    ensure(ht.loglik > hn.loglik, || format!("t loglik {} vs normal {}", ht.loglik, hn.loglik))?;

    let beta = Beta::new(4.53, 0.53).unwrap();
    let bs: Vec<f64> = (0..n).map(|_| beta.sample(&mut rng)).collect();
    let b = fit_beta(&bs).unwrap();
    ensure(rel(b.alpha, 4.53) < 0.25 && rel(b.beta, 0.53) < 0.25, || format!("beta fit {b:?}"))?;

    let weights = [0.3, 0.2, 0.3, 0.2];
    let comps: Vec<usize> = (0..4).collect();
    let angles: Vec<f64> = (0..n)
        .map(|_| {
            let k = *comps.choose_weighted(&mut rng, |&k| weights[k]).unwrap();
            sample_vonmises(&mut rng, CARDINALS[k], 25.0)
        })
        .collect();
    let axis = fit_vonmises_mixture(&angles, MixtureMode::AxisCentered).unwrap();
    let uni = fit_vonmises_mixture(&angles, MixtureMode::UnimodalDoubled).unwrap();
    for (c, w) in axis.components.iter().zip(weights) {
        ensure((c.weight - w).abs() < 0.05, || format!("cardinal weights {:?}", axis.components))?;
    }
    ensure(axis.aic < uni.aic, || format!("AIC axis {} vs unimodal {}", axis.aic, uni.aic))?;

    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y: Vec<bool> = x.iter().map(|&v| rng.random::<f64>() < 1.0 / (1.0 + (-(-0.5 + 1.2 * v)).exp())).collect();
    let lg = fit_logistic(&x, &y).unwrap();
    ensure((lg.intercept + 0.5).abs() < 0.1 && (lg.slope - 1.2).abs() < 0.1, || format!("logistic fit {lg:?}"))?;

    for (a, bt) in [(0.5, 0.021), (-1.0, 0.256)] {
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..15u32))).collect();
        let c: Vec<u64> = x.iter().map(|&v| Poisson::new((a + bt * v).exp()).unwrap().sample(&mut rng) as u64).collect();
        let p = fit_poisson(&x, &c).unwrap();
        ensure((p.intercept - a).abs() < 0.1 && (p.slope - bt).abs() < 0.01, || format!("poisson ({a}, {bt}) fit {p:?}"))?;
    }
    within(Duration::from_secs(60), start)?;
    Ok(format!(
        "t nu {:.2}; beta ({:.2}, {:.3}); AIC axis {:.0} < unimodal {:.0}; logistic ({:.2}, {:.2})",
        t.nu, b.alpha, b.beta, axis.aic, uni.aic, lg.intercept, lg.slope
    ))
}

fn random_geometry(rng: &mut ChaCha8Rng, kind: usize) -> Geometry {
    match kind {
        0 => {
            let (x, y) = (rng.random_range(0.0..0.9), rng.random_range(0.0..0.9));
            Geometry::Box2D(BBox::new(x, y, rng.random_range(0.01..0.5f64).min(1.0 - x), rng.random_range(0.01..0.5f64).min(1.0 - y)))
        }
        1 => {
            let (cx, cy) = (rng.random_range(0.25..0.75), rng.random_range(0.25..0.75));
            let k = rng.random_range(3..9);
            Geometry::Polygon(
                (0..k)
                    .map(|i| {
                        let t = (i as f64 + 0.8 * rng.random::<f64>()) / k as f64 * std::f64::consts::TAU;
                        let r = rng.random_range(0.02..0.25);
                        [cx + r * t.cos(), cy + r * t.sin()]
                    })
                    .collect(),
            )
        }
        2 => Geometry::VoxelBox(VoxelBox {
            x: rng.random_range(0.0..0.8),
            y: rng.random_range(0.0..0.8),
            z: rng.random_range(0.0..0.8),
            w: rng.random_range(0.01..0.2),
            h: rng.random_range(0.01..0.2),
            d: rng.random_range(0.01..0.2),
        }),
        _ => {
            let forced = rng.random_range(0..5);
            Geometry::KeypointSet(
                (0..5)
                    .map(|i| Keypoint { x: rng.random(), y: rng.random(), visible: i == forced || rng.random::<bool>() })
                    .collect(),
            )
        }
    }
}

fn geometry_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let kinds: [(DistanceMetric, &[usize]); 6] = [
        (DistanceMetric::BoxIou, &[0]),
        (DistanceMetric::PolygonIou, &[0, 1]),
        (DistanceMetric::MaskGiou, &[0, 1]),
        (DistanceMetric::L2Centroid, &[0, 1, 3]),
        (DistanceMetric::VoxelIou, &[2]),
        (DistanceMetric::PoseNmpjpe, &[3]),
    ];
    for i in 0..10_000 {
        let (m, allowed) = kinds[i % kinds.len()];
        let (ka, kb) = (*allowed.choose(&mut rng).unwrap(), *allowed.choose(&mut rng).unwrap());
        let (a, b) = (random_geometry(&mut rng, ka), random_geometry(&mut rng, kb));
        let (ab, ba) = (distance(&a, &b, m).unwrap(), distance(&b, &a, m).unwrap());
        ensure(ab.to_bits() == ba.to_bits(), || format!("{} asymmetric: {ab} vs {ba}", m.name()))?;
        ensure((0.0..=1.0).contains(&ab), || format!("{} out of range: {ab}", m.name()))?;
        ensure(distance(&a, &a, m).unwrap() == 0.0, || format!("{} identity non-zero for {a:?}", m.name()))?;
    }
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (a, b) = (random_geometry(&mut rng, 0), random_geometry(&mut rng, 0));
        let poly = |g: &Geometry| match g {
            Geometry::Box2D(bb) => Geometry::Polygon(bb.corners()),
            _ => unreachable!(),
        };
        let d = distance(&a, &b, DistanceMetric::BoxIou).unwrap() - distance(&poly(&a), &poly(&b), DistanceMetric::PolygonIou).unwrap();
        worst = worst.max(d.abs());
    }
    ensure(worst < 1e-9, || format!("polygon vs box IoU differ by {worst:e}"))?;
    let kp = |v: bool| Keypoint { x: 0.5, y: 0.5, visible: v };
    let pa = Geometry::KeypointSet(vec![Keypoint { x: 0.3, y: 0.3, visible: true }, kp(true)]);
    let pb = Geometry::KeypointSet(vec![Keypoint { x: 0.3, y: 0.3, visible: true }, kp(false)]);
    let pose = distance(&pa, &pb, DistanceMetric::PoseNmpjpe).unwrap();
    ensure(pose == 0.5, || format!("pose example {pose}"))?;
    Ok(format!("10000 pairs; polygon/box max diff {worst:.1e}; pose example 0.5"))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::write_inputs(dir.path());
    let run_all = || -> Result<_, String> {
        for args in common::SUBCOMMANDS {
            let out = common::kalos(dir.path(), args);
            ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
        }
        let snap = common::snapshot(&dir.path().join("out"));
        std::fs::remove_dir_all(dir.path().join("out")).map_err(|e| e.to_string())?;
        Ok(snap)
    };
    let (first, second) = (run_all()?, run_all()?);
    ensure(first.keys().eq(second.keys()), || "different file sets".into())?;
    for (path, bytes) in &first {
        ensure(second[path] == *bytes, || format!("{} differs between runs", path.display()))?;
    }
    Ok(format!("{} subcommands, {} files byte-identical", common::SUBCOMMANDS.len(), first.len()))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("alpha oracle equivalence", oracle_equivalence),
        ("alpha anchors", alpha_anchors),
        ("monotonic decrease over noise magnitude", monotonic_decrease),
        ("diminishing returns over rater count", rater_returns),
        ("collaboration clusters", collaboration_clusters),
        ("greedy permutation stability", greedy_stability),
        ("solver ordering", solver_ordering),
        ("cost-function ordering", cost_ordering),
        ("calibration recovery", calibration_recovery),
        ("noise-generator closed loop", closed_loop),
        ("distribution fitters", distribution_fitters),
        ("geometry identities", geometry_identities),
        ("end-to-end determinism", cli_determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
