//! Acceptance gate. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajtax::config::{sidecar_path, ExperimentConfig};
use trajtax::cv::{DEFAULT_FOLDS, DEFAULT_SEEDS};
use trajtax::experiment::{median, outer_folds, prepare_split, run_experiment, write_results_jsonl, ExperimentPlan};
use trajtax::features::{describe, distance_geometry_signature, extract_features, FeatureMatrix, SeriesDescriptor};
use trajtax::metrics::{f1_scores, ConfusionCounts};
use trajtax::models::mlp::Network;
use trajtax::models::{
    accuracy, train, BoostedParams, ClassifierSpec, Family, ForestParams, LogisticParams, ModelParams, Penalty,
};
use trajtax::selection::{forward_select, taxonomy_select, Method, SelectionConfig};
use trajtax::synthetic::{gaussian_matrix, planted_speed_set, PlantedSpeed};
use trajtax::taxonomy::{enumerate_combinations, Taxonomy, TaxonomyLeaf};
use trajtax::trajectory::{
    haversine_distance, parse_trajectory_csv, resample_set, ColumnMapping, GeoPoint, ResampleOptions, Trajectory,
    EARTH_RADIUS_M,
};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn main() {
    let criteria: [(u32, &str, Duration, Check); 9] = [
        (1, "metric oracle equivalence", Duration::from_secs(1), metric_oracle),
        (2, "taxonomy enumeration", Duration::from_secs(1), taxonomy_enumeration),
        (3, "geometry suite", Duration::from_secs(1), geometry_suite),
        (4, "descriptor suite", Duration::from_secs(5), descriptor_suite),
        (5, "planted-signal recovery", Duration::from_secs(120), planted_recovery),
        (6, "fit-count efficiency", Duration::from_secs(300), efficiency),
        (7, "protocol reproduction", Duration::MAX, protocol_reproduction),
        (8, "public hurricane data", Duration::from_secs(1800), hurricane_check),
        (9, "model sanity", Duration::MAX, model_sanity),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let v = match v {
            Verdict::Pass(d) if elapsed > budget => Verdict::Fail(format!("{d}; exceeded time budget {budget:?}")),
            other => other,
        };
        let (tag, detail) = match &v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{id}] {name} ({:.2}s): {detail}", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn metric_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=50);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let got = f1_scores(&ConfusionCounts::from_predictions(&truth, &pred).unwrap()).unwrap();

        let classes: BTreeSet<usize> = truth.iter().chain(&pred).copied().collect();
        let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
        let (mut f1_sum, mut weighted, mut support_sum) = (0.0, 0.0, 0.0);
        for &c in &classes {
            let mut tp = 0.0;
            let mut fp = 0.0;
            let mut fneg = 0.0;
            for i in 0..n {
                match (truth[i] == c, pred[i] == c) {
                    (true, true) => tp += 1.0,
                    (false, true) => fp += 1.0,
                    (true, false) => fneg += 1.0,
                    _ => {}
                }
            }
            let denom = 2.0 * tp + fp + fneg;
            let f1 = if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
            f1_sum += f1;
            weighted += (tp + fneg) * f1;
            support_sum += tp + fneg;
            tp_all += tp;
            fp_all += fp;
            fn_all += fneg;
        }
        let expect = [
            f1_sum / classes.len() as f64,
            2.0 * tp_all / (2.0 * tp_all + fp_all + fn_all),
            weighted / support_sum,
        ];
        for (a, b) in [got.macro_avg, got.micro, got.weighted].iter().zip(expect) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(worst <= 1e-12, format!("200 confusions, max abs deviation {worst:.2e}"))
}

fn taxonomy_enumeration() -> Verdict {
    for n in 1..=6usize {
        let leaves: Vec<TaxonomyLeaf> = (0..n)
            .map(|i| TaxonomyLeaf::new(&format!("leaf{i}"), &format!("L{i}"), "root", &format!("p{i}_")))
            .collect();
        let combos = enumerate_combinations(&leaves).unwrap();
        let distinct: BTreeSet<Vec<String>> = combos
            .iter()
            .map(|c| {
                let mut l = c.leaves.clone();
                l.sort();
                l
            })
            .collect();
        if combos.len() != (1 << n) - 1 || distinct.len() != combos.len() {
            return Verdict::Fail(format!("n={n}: {} combinations, {} distinct", combos.len(), distinct.len()));
        }
    }
    let expected: BTreeSet<&str> = [
        "C", "I", "S", "Ac", "C+I", "C+S", "C+Ac", "I+S", "I+Ac", "S+Ac", "C+I+S", "C+I+Ac", "C+S+Ac", "I+S+Ac",
        "C+I+S+Ac",
    ]
    .into_iter()
    .collect();
    let combos = Taxonomy::builtin().combinations();
    let got: BTreeSet<&str> = combos.iter().map(|c| c.label.as_str()).collect();
    verdict(
        got == expected && combos.len() == 15,
        format!("2^n-1 for n=1..6; built-in labels {:?}", combos.iter().map(|c| &c.label).collect::<Vec<_>>()),
    )
}

fn line(points: &[(f64, f64)]) -> Trajectory {
    let pts = points
        .iter()
        .enumerate()
        .map(|(i, &(lat, lon))| GeoPoint::new(lat, lon, i as f64 * 10.0).unwrap())
        .collect();
    Trajectory::new("t", "x", pts).unwrap()
}

/// Spherical law of cosines, independent of the haversine formulation.
fn law_of_cosines(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let dl = (b.1 - a.1).to_radians();
    let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
    EARTH_RADIUS_M * c.acos()
}

fn geometry_suite() -> Verdict {
    let straight: Vec<(f64, f64)> = (0..31).map(|i| (0.0, f64::from(i) * 0.1)).collect();
    let sig = distance_geometry_signature(&line(&straight));
    let worst = sig.0.iter().map(|v| (v.unwrap_or(f64::NAN) - 1.0).abs()).fold(0.0, f64::max);
    if worst.is_nan() || worst > 1e-9 {
        return Verdict::Fail(format!("straight path deviation {worst:e}"));
    }
    let loop_path = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)];
    let closed = distance_geometry_signature(&line(&loop_path)).get(1, 1);
    if closed != Some(0.0) {
        return Verdict::Fail(format!("closed loop level-1 value {closed:?}"));
    }
    let cases = [((0.0, 0.0), (0.0, 1.0)), ((0.0, 0.0), (0.0, 180.0)), ((0.0, 0.0), (1.0, 1.0))];
    let mut max_err: f64 = 0.0;
    for (a, b) in cases {
        let d = haversine_distance(&GeoPoint::new(a.0, a.1, 0.0).unwrap(), &GeoPoint::new(b.0, b.1, 0.0).unwrap());
        max_err = max_err.max((d - law_of_cosines(a, b)).abs());
    }
    let closed_form = [EARTH_RADIUS_M * std::f64::consts::PI / 180.0, EARTH_RADIUS_M * std::f64::consts::PI];
    for (i, expect) in closed_form.iter().enumerate() {
        let (a, b) = cases[i];
        let d = haversine_distance(&GeoPoint::new(a.0, a.1, 0.0).unwrap(), &GeoPoint::new(b.0, b.1, 0.0).unwrap());
        max_err = max_err.max((d - expect).abs());
    }
    verdict(
        max_err <= 1.0,
        format!("straight max deviation {worst:.1e}, loop 0, haversine max error {max_err:.2e} m"),
    )
}

fn rel_close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0),
        _ => false,
    }
}

fn descriptor_suite() -> Verdict {
    let d = describe(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    let hand = [
        (d.mean, 3.0),
        (d.q50, 3.0),
        (d.min, 1.0),
        (d.max, 5.0),
        (d.q25, 2.0),
        (d.q75, 4.0),
        (d.iqr, 2.0),
        (d.skewness, 0.0),
        (d.std, 2f64.sqrt()),
        (d.unique_count, 5.0),
        (d.zero_count, 0.0),
    ];
    if let Some((got, want)) = hand.iter().find(|(g, w)| !rel_close(*g, Some(*w), 1e-9)) {
        return Verdict::Fail(format!("[1..5]: got {got:?}, expected {want}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100 {
        let n = rng.gen_range(3..60);
        let series: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let base = describe(&series);
        let mut shuffled = series.clone();
        shuffled.shuffle(&mut rng);
        let perm = describe(&shuffled);
        if !base.values().iter().zip(perm.values()).all(|(a, b)| rel_close(*a, b, 1e-9)) {
            return Verdict::Fail(format!("trial {trial}: permutation changed descriptors"));
        }
        let a = loop {
            let a: f64 = rng.gen_range(-5.0..5.0);
            if a.abs() > 0.1 {
                break a;
            }
        };
        let b = rng.gen_range(-100.0..100.0);
        let t: SeriesDescriptor = describe(&series.iter().map(|x| a * x + b).collect::<Vec<_>>());
        let checks = [
            (t.mean, base.mean.map(|m| a * m + b)),
            (t.std, base.std.map(|s| a.abs() * s)),
            (t.skewness, base.skewness.map(|s| a.signum() * s)),
            (t.kurtosis, base.kurtosis),
        ];
        if !checks.iter().all(|(x, y)| rel_close(*x, *y, 1e-9)) {
            return Verdict::Fail(format!("trial {trial}: affine property violated for a={a}, b={b}"));
        }
    }
    Verdict::Pass("[1..5] hand values; permutation and affine properties on 100 series".into())
}

fn planted_matrix() -> FeatureMatrix {
    extract_features(&planted_speed_set(&PlantedSpeed::default()).unwrap()).unwrap()
}

fn planted_recovery() -> Verdict {
    let data = planted_matrix();
    let plan = ExperimentPlan {
        dataset: "planted".into(),
        methods: vec![Method::Taxonomy],
        families: vec![Family::RandomForest],
        tuned: vec![false],
        ..Default::default()
    };
    let out = run_experiment(&data, &plan).unwrap();
    if !out.failures.is_empty() {
        return Verdict::Fail(format!("{} failed iterations: {}", out.failures.len(), out.failures[0].error));
    }
    let with_speed = out
        .results
        .iter()
        .filter(|r| r.chosen_leaves.as_ref().is_some_and(|l| l.iter().any(|x| x == "speed")))
        .count();
    let f1: Vec<f64> = out.results.iter().map(|r| r.weighted_f1).collect();
    let med = median(&f1).unwrap();
    let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &out.results {
        *labels.entry(r.chosen_label.as_deref().unwrap_or("?")).or_default() += 1;
    }
    verdict(
        out.results.len() == 20 && with_speed >= 18 && med >= 0.90,
        format!(
            "{} iterations, speed chosen in {with_speed}, median weighted F1 {med:.4}, choices {labels:?}",
            out.results.len()
        ),
    )
}

fn efficiency() -> Verdict {
    let data = planted_matrix();
    let seed = DEFAULT_SEEDS[0];
    let folds = outer_folds(&data, DEFAULT_FOLDS, seed).unwrap();
    let split = prepare_split(&data, &folds[0]);
    let config = SelectionConfig {
        folds: DEFAULT_FOLDS,
        seed: trajtax::cv::inner_seed(seed, 0),
        ..Default::default()
    };
    let spec = ClassifierSpec::default_for(Family::RandomForest, config.seed);
    let tax = taxonomy_select(&spec, &split.train, &Taxonomy::builtin(), &config).unwrap();
    let fwd = forward_select(&spec, &split.train, &config).unwrap();
    let first_round = fwd.candidate_scores.keys().filter(|k| k.starts_with("r1+")).count() * DEFAULT_FOLDS;
    let ok = data.n_cols() == 72
        && tax.fit_count == 15 * DEFAULT_FOLDS
        && first_round == 72 * DEFAULT_FOLDS
        && fwd.fit_count >= first_round
        && tax.fit_count < first_round
        && tax.wall_time < fwd.wall_time;
    verdict(
        ok,
        format!(
            "taxonomy {} fits in {:.2}s; forward first round {first_round} fits, {} total in {:.2}s",
            tax.fit_count, tax.wall_time, fwd.fit_count, fwd.wall_time
        ),
    )
}

fn protocol_reproduction() -> Verdict {
    let leaves = [
        "curvature",
        "curvature",
        "indentation",
        "indentation",
        "speed",
        "speed",
        "acceleration",
        "acceleration",
    ];
    let data = gaussian_matrix(15, 3, &[0.0, 0.3, 0.0, 0.5, 1.2, 0.8, 0.0, 0.2], &leaves, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("features.csv");
    data.write_csv(std::fs::File::create(&features).unwrap()).unwrap();
    data.write_sidecar(std::fs::File::create(sidecar_path(&features)).unwrap()).unwrap();
    let config_path = dir.path().join("experiment.toml");
    std::fs::write(
        &config_path,
        r#"
[dataset]
name = "protocol"
features = "features.csv"

[grid.logistic_regression]
c = [0.1, 1.0]
penalty = ["l2"]
solver = ["liblinear"]

[grid.random_forest]
n_estimators = [20, 50]
max_depth = ["none"]
max_features = ["sqrt"]

[grid.gradient_boosted_trees]
n_estimators = [20, 50]
max_depth = [3]
learning_rate = [0.1]
sub_sample = [1.0]

[grid.mlp]
hidden_layer_sizes = [[10], [20]]
alpha = [1e-4]
learning_rate_init = [1e-2]
"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::from_path(&config_path).unwrap();
    let plan = cfg.plan().unwrap();
    let loaded = cfg.load_data().unwrap().matrix;

    let mut max_spread = 0;
    for &seed in &plan.protocol.seeds {
        let folds = outer_folds(&loaded, plan.protocol.folds, seed).unwrap();
        let ids = loaded.class_ids();
        let mut per_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for f in &folds {
            let mut counts = BTreeMap::new();
            for &r in f {
                *counts.entry(ids[r]).or_insert(0usize) += 1;
            }
            for c in 0..3 {
                per_class.entry(c).or_default().push(counts.get(&c).copied().unwrap_or(0));
            }
        }
        for v in per_class.values() {
            max_spread = max_spread.max(v.iter().max().unwrap() - v.iter().min().unwrap());
        }
    }

    let run = || {
        let out = run_experiment(&loaded, &plan).unwrap();
        let mut buf = Vec::new();
        write_results_jsonl(&mut buf, &out.results).unwrap();
        (out, buf)
    };
    let (first, bytes_a) = run();
    let (_, bytes_b) = run();

    let mut cells: BTreeMap<(Method, Family, bool), BTreeSet<(u64, usize)>> = BTreeMap::new();
    for r in &first.results {
        cells.entry((r.method, r.family, r.tuned)).or_default().insert((r.seed, r.fold));
    }
    let expected: BTreeSet<(u64, usize)> =
        DEFAULT_SEEDS.iter().flat_map(|&s| (0..DEFAULT_FOLDS).map(move |f| (s, f))).collect();
    let per_cell_ok = cells.len() == 24 && cells.values().all(|s| *s == expected);
    let ok = per_cell_ok
        && first.failures.is_empty()
        && first.results.len() == 480
        && max_spread <= 1
        && bytes_a == bytes_b;
    verdict(
        ok,
        format!(
            "{} cells x 20 iterations ({} results, {} failures), max per-class fold spread {max_spread}, identical results files: {}{}",
            cells.len(),
            first.results.len(),
            first.failures.len(),
            bytes_a == bytes_b,
            first
                .failures
                .first()
                .map(|f| format!("; first failure {} {} tuned={}: {}", f.key.method, f.key.family, f.key.tuned, f.error))
                .unwrap_or_default()
        ),
    )
}

fn hurricane_check() -> Verdict {
    let Ok(path) = std::env::var("IBTRACS_CSV") else {
        return Verdict::Skip("set IBTRACS_CSV to an IBTrACS CSV to run this check".into());
    };
    let mapping = ColumnMapping {
        trajectory_id: "SID".into(),
        latitude: "LAT".into(),
        longitude: "LON".into(),
        timestamp: "ISO_TIME".into(),
        label: "BASIN".into(),
        delimiter: ',',
    };
    let file = std::fs::File::open(&path).unwrap();
    let (set, _) = parse_trajectory_csv(std::io::BufReader::new(file), &mapping).unwrap();
    let set = resample_set(
        &set,
        &ResampleOptions {
            per_class: 200,
            top_classes: Some(5),
            replace: false,
            seed: 42,
        },
    )
    .unwrap();
    let data = extract_features(&set).unwrap();
    let plan = ExperimentPlan {
        dataset: "hurricanes".into(),
        methods: vec![Method::Taxonomy],
        families: vec![Family::RandomForest],
        tuned: vec![false],
        ..Default::default()
    };
    let out = run_experiment(&data, &plan).unwrap();
    let f1: Vec<f64> = out.results.iter().map(|r| r.weighted_f1).collect();
    let med = median(&f1).unwrap_or(f64::NAN);
    verdict((0.39..=0.59).contains(&med), format!("median weighted F1 {med:.4} over {} iterations", f1.len()))
}

fn model_sanity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = Network::init(&[2, 2, 2], &mut rng);
    let x = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-2.0..2.0));
    let y = [0, 1, 1, 0, 1, 0];
    let alpha = 0.1;
    let (_, grad) = net.loss_and_gradient(x.view(), &y, alpha);
    let analytic = grad.to_flat();
    let theta = net.to_flat();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let mut t = theta.clone();
        t[i] += h;
        net.set_flat(&t);
        let up = net.loss_and_gradient(x.view(), &y, alpha).0;
        t[i] -= 2.0 * h;
        net.set_flat(&t);
        let down = net.loss_and_gradient(x.view(), &y, alpha).0;
        let numeric = (up - down) / (2.0 * h);
        let rel = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    net.set_flat(&theta);
    if worst > 1e-4 {
        return Verdict::Fail(format!("MLP gradient relative error {worst:.2e}"));
    }

    let data = gaussian_matrix(30, 3, &[1.0, 0.7, 0.2, 0.0], &[], 5).unwrap();
    let xv = data.values().view();
    let yv = data.class_ids();
    for penalty in [Penalty::L2, Penalty::L1] {
        let norms: Vec<f64> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&c| {
                let spec = ClassifierSpec::new(
                    ModelParams::LogisticRegression(LogisticParams {
                        c,
                        penalty,
                        ..Default::default()
                    }),
                    0,
                );
                train(&spec, xv, &yv).unwrap().as_logistic().unwrap().coef_norm()
            })
            .collect();
        if !norms.windows(2).all(|w| w[0] <= w[1]) {
            return Verdict::Fail(format!("{penalty:?} coefficient norms not monotone in c: {norms:?}"));
        }
    }

    let small = gaussian_matrix(25, 2, &[0.6, 0.4, 0.0], &[], 8).unwrap();
    let (sx, sy) = (small.values().select(Axis(1), &[0, 1, 2]), small.class_ids());
    let mut accs = Vec::new();
    for family in [Family::RandomForest, Family::GradientBoostedTrees] {
        let series: Vec<f64> = [10, 50, 100]
            .iter()
            .map(|&n| {
                let params = match family {
                    Family::RandomForest => ModelParams::RandomForest(ForestParams {
                        n_estimators: n,
                        ..Default::default()
                    }),
                    _ => ModelParams::GradientBoostedTrees(BoostedParams {
                        n_estimators: n,
                        max_depth: 2,
                        learning_rate: 0.1,
                        ..Default::default()
                    }),
                };
                let m = train(&ClassifierSpec::new(params, 3), sx.view(), &sy).unwrap();
                accuracy(&m, sx.view(), &sy).unwrap()
            })
            .collect();
        if !series.windows(2).all(|w| w[0] <= w[1]) {
            return Verdict::Fail(format!("{family} training accuracy not monotone: {series:?}"));
        }
        accs.push((family, series));
    }
    Verdict::Pass(format!("gradient rel error {worst:.1e}; logistic norms monotone; training accuracy {accs:?}"))
}
