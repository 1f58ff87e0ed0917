use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;

use trajtax::cv::stratified_kfold;
use trajtax::features::{
    describe, distance_geometry_signature, impute_fit_transform, standardize_fit_transform, ColumnMeta, FeatureMatrix,
    ImputeState, ScaleState,
};
use trajtax::metrics::{f1_scores, ClassCounts, ConfusionCounts};
use trajtax::selection::{cfs_merit, MeritInputs};
use trajtax::taxonomy::{enumerate_combinations, TaxonomyLeaf};
use trajtax::trajectory::{
    haversine_distance, parse_trajectory_csv, write_trajectory_csv, ColumnMapping, GeoPoint, LabeledTrajectorySet,
    Trajectory,
};

fn point() -> impl Strategy<Value = GeoPoint> {
    (-89.0..89.0f64, -179.0..179.0f64).prop_map(|(lat, lon)| GeoPoint::new_unchecked(lat, lon, 0.0))
}

fn trajectory(id: usize) -> impl Strategy<Value = Trajectory> {
    (prop::collection::vec((-60.0..60.0f64, -120.0..120.0f64, 0u32..5000), 2..12), 0usize..3).prop_filter_map(
        "needs two distinct timestamps",
        move |(pts, label)| {
            let points = pts
                .into_iter()
                .map(|(lat, lon, t)| GeoPoint::new(lat, lon, f64::from(t)).unwrap())
                .collect();
            Trajectory::new(format!("t{id}"), format!("class{label}"), points).ok()
        },
    )
}

fn matrix(values: Array2<f64>) -> FeatureMatrix {
    let n = values.nrows();
    let columns = (0..values.ncols())
        .map(|j| ColumnMeta {
            name: format!("c{j}"),
            leaf: None,
        })
        .collect();
    FeatureMatrix::new(
        (0..n).map(|i| format!("r{i}")).collect(),
        (0..n).map(|i| format!("l{}", i % 2)).collect(),
        columns,
        values,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn haversine_is_symmetric_and_metric(a in point(), b in point(), c in point()) {
        let ab = haversine_distance(&a, &b);
        let ba = haversine_distance(&b, &a);
        prop_assert!((ab - ba).abs() <= 1e-6 * ab.max(1.0));
        let ac = haversine_distance(&a, &c);
        let cb = haversine_distance(&c, &b);
        prop_assert!(ab <= (ac + cb) * (1.0 + 1e-6) + 1e-6);
        prop_assert_eq!(haversine_distance(&a, &a), 0.0);
    }

    #[test]
    fn trajectories_are_strictly_time_ordered(t in trajectory(0)) {
        prop_assert!(t.len() >= 2);
        prop_assert!(t.points().windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn csv_round_trip_is_stable(ts in prop::collection::vec(any::<u8>(), 1..6)
        .prop_flat_map(|v| (0..v.len()).map(trajectory).collect::<Vec<_>>()))
    {
        let set = LabeledTrajectorySet::new(ts).unwrap();
        let mapping = ColumnMapping::default();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &set, &mapping).unwrap();
        let (back, report) = parse_trajectory_csv(buf.as_slice(), &mapping).unwrap();
        prop_assert_eq!(report.rows_rejected, 0);
        let mut buf2 = Vec::new();
        write_trajectory_csv(&mut buf2, &back, &mapping).unwrap();
        let (again, _) = parse_trajectory_csv(buf2.as_slice(), &mapping).unwrap();
        prop_assert_eq!(&back, &again);
        prop_assert_eq!(back.len(), set.len());
        for (a, b) in set.trajectories().iter().zip(back.trajectories()) {
            prop_assert_eq!(a.id(), b.id());
            prop_assert_eq!(a.label(), b.label());
            prop_assert_eq!(a.len(), b.len());
            for (p, q) in a.points().iter().zip(b.points()) {
                prop_assert!((p.latitude - q.latitude).abs() < 1e-9);
                prop_assert!((p.longitude - q.longitude).abs() < 1e-9);
                prop_assert_eq!(p.timestamp, q.timestamp);
            }
        }
    }

    #[test]
    fn curvature_entries_are_ratios(t in trajectory(0)) {
        for v in distance_geometry_signature(&t).0.iter().flatten() {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn descriptors_are_ordered_and_bounded(series in prop::collection::vec(-1e3..1e3f64, 1..80)) {
        let d = describe(&series);
        let q = [d.min, d.q01, d.q05, d.q25, d.q50, d.q75, d.q95, d.q99, d.max].map(Option::unwrap);
        prop_assert!(q.windows(2).all(|w| w[0] <= w[1] + 1e-9));
        if series.len() >= 2 {
            prop_assert!((d.iqr.unwrap() - (d.q75.unwrap() - d.q25.unwrap())).abs() < 1e-9);
        } else {
            prop_assert!(d.iqr.is_none());
        }
        let n = series.len() as f64;
        prop_assert!(d.zero_count.unwrap() <= n && d.unique_count.unwrap() <= n);
    }

    #[test]
    fn imputation_and_scaling_fit_on_train_only(
        train in prop::collection::vec(prop::option::weighted(0.8, -50.0..50.0f64), 24),
        test in prop::collection::vec(prop::option::weighted(0.8, -50.0..50.0f64), 9),
        poke in -1e6..1e6f64,
    ) {
        let to_arr = |v: &[Option<f64>], rows| Array2::from_shape_vec((rows, 3), v.iter().map(|x| x.unwrap_or(f64::NAN)).collect()).unwrap();
        let tr = matrix(to_arr(&train, 8));
        let te = matrix(to_arr(&test, 3));
        let (tr_i, te_i, state) = impute_fit_transform(&tr, &te);
        prop_assert_eq!(tr_i.missing_count() + te_i.missing_count(), 0);

        let mut poked = te.values().clone();
        poked[[0, 0]] = poke;
        let (_, _, state2) = impute_fit_transform(&tr, &matrix(poked.clone()));
        prop_assert_eq!(&state, &state2);
        prop_assert_eq!(ImputeState::fit(tr.values().view()), state);

        let (tr_s, _, scale) = standardize_fit_transform(&tr_i, &te_i);
        for (j, col) in tr_s.values().columns().into_iter().enumerate() {
            let mean = col.sum() / 8.0;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            if scale.stds[j] > 1e-9 {
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
        }
        let (_, _, scale2) = standardize_fit_transform(&tr_i, &matrix(poked.mapv(|v| if v.is_nan() { 0.0 } else { v })));
        prop_assert_eq!(&scale, &scale2);
        prop_assert_eq!(ScaleState::fit(tr_i.values().view()), scale);
    }

    #[test]
    fn stratified_folds_partition_and_balance(
        sizes in prop::collection::vec(5usize..30, 1..5),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat(c).take(n)).collect();
        let folds = stratified_kfold(&labels, k, seed).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for c in 0..sizes.len() {
            let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == c).count()).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(stratified_kfold(&labels, k, seed).unwrap(), folds);
    }

    #[test]
    fn f1_scores_are_bounded_and_label_invariant(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60),
        perm in Just([3usize, 0, 4, 1, 2]),
    ) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let a = f1_scores(&ConfusionCounts::from_predictions(&truth, &pred).unwrap()).unwrap();
        for v in [a.macro_avg, a.micro, a.weighted] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let pt: Vec<usize> = truth.iter().map(|&c| perm[c]).collect();
        let pp: Vec<usize> = pred.iter().map(|&c| perm[c]).collect();
        let b = f1_scores(&ConfusionCounts::from_predictions(&pt, &pp).unwrap()).unwrap();
        prop_assert!((a.macro_avg - b.macro_avg).abs() < 1e-12);
        prop_assert!((a.micro - b.micro).abs() < 1e-12);
        prop_assert!((a.weighted - b.weighted).abs() < 1e-12);
    }

    #[test]
    fn equal_class_f1_makes_weighted_equal_micro(
        base in (1usize..5, 0usize..5, 0usize..5),
        scales in prop::collection::vec(1usize..8, 1..5),
    ) {
        let counts = scales.iter().map(|&m| ClassCounts {
            true_positives: base.0 * m,
            false_positives: base.1 * m,
            false_negatives: base.2 * m,
        });
        let s = f1_scores(&ConfusionCounts::from_counts(counts)).unwrap();
        prop_assert!((s.weighted - s.micro).abs() < 1e-12);
    }

    #[test]
    fn balanced_supports_make_macro_equal_weighted(
        rows in prop::collection::vec((0usize..10, 0usize..10), 1..5),
        support in 10usize..20,
    ) {
        let counts = rows.iter().map(|&(tp, fp)| ClassCounts {
            true_positives: tp,
            false_positives: fp,
            false_negatives: support - tp,
        });
        let s = f1_scores(&ConfusionCounts::from_counts(counts)).unwrap();
        prop_assert!((s.macro_avg - s.weighted).abs() < 1e-12);
    }

    #[test]
    fn merit_is_monotone(k in 2usize..30, r_cf in 0.01..1.0f64, r_ff in 0.0..0.98f64, step in 0.001..0.02f64) {
        let m = |r_cf_bar, r_ff_bar| cfs_merit(&MeritInputs { k, r_cf_bar, r_ff_bar }).unwrap();
        prop_assert!(m(r_cf + step, r_ff) > m(r_cf, r_ff));
        prop_assert!(m(r_cf, r_ff + step) < m(r_cf, r_ff));
    }
}

#[test]
fn combination_counts_match_powerset() {
    for n in 1..=6usize {
        let leaves: Vec<TaxonomyLeaf> = (0..n)
            .map(|i| TaxonomyLeaf::new(&format!("x{i}"), &format!("X{i}"), "root", &format!("x{i}_")))
            .collect();
        let combos = enumerate_combinations(&leaves).unwrap();
        let distinct: BTreeSet<BTreeSet<String>> =
            combos.iter().map(|c| c.leaves.iter().cloned().collect()).collect();
        assert_eq!(combos.len(), (1 << n) - 1);
        assert_eq!(distinct.len(), combos.len());
        assert!(combos.windows(2).all(|w| w[0].len() <= w[1].len()));
    }
}
