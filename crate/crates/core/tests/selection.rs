use ndarray::Array2;

use trajtax::cv::CvScorer;
use trajtax::features::{extract_features, impute_fit_transform, ColumnMeta, FeatureMatrix};
use trajtax::models::{ClassifierSpec, Family};
use trajtax::selection::{backward_select, forward_select, taxonomy_select, SelectionConfig};
use trajtax::synthetic::{gaussian_matrix, planted_speed_set, PlantedSpeed};
use trajtax::taxonomy::{columns_for, Taxonomy};
use trajtax::Error;

fn logistic() -> ClassifierSpec {
    ClassifierSpec::default_for(Family::LogisticRegression, 0)
}

fn config(seed: u64) -> SelectionConfig {
    SelectionConfig {
        folds: 5,
        seed,
        ..Default::default()
    }
}

#[test]
fn forward_picks_the_informative_column_first() {
    let data = gaussian_matrix(30, 2, &[0.0, 0.0, 2.0, 0.0, 0.1], &[], 3).unwrap();
    let cfg = config(9);
    let out = forward_select(&logistic(), &data, &cfg).unwrap();
    assert!(out.chosen_columns.contains(&2));

    let y = data.class_ids();
    let oracle = CvScorer::new(data.values().view(), &y, cfg.folds, cfg.seed).unwrap();
    let singles: Vec<f64> = (0..5).map(|c| oracle.score(&logistic(), &[c]).unwrap()).collect();
    let best = (0..5).fold(0, |b, c| if singles[c] > singles[b] { c } else { b });
    assert_eq!(best, 2);
    for c in 0..5 {
        assert_eq!(out.candidate_scores[&format!("r1+f{c}")], singles[c]);
    }
    let rounds = out.candidate_scores.keys().map(|k| k[1..].split('+').next().unwrap().to_string()).max().unwrap();
    let expected: usize = (0..rounds.parse::<usize>().unwrap()).map(|r| (5 - r) * cfg.folds).sum();
    assert_eq!(out.fit_count, expected);
}

#[test]
fn forward_on_constant_columns_stops_after_first_round() {
    let values = Array2::zeros((20, 3));
    let columns = (0..3)
        .map(|j| ColumnMeta {
            name: format!("z{j}"),
            leaf: None,
        })
        .collect();
    let data = FeatureMatrix::new(
        (0..20).map(|i| format!("{i:02}")).collect(),
        (0..20).map(|i| format!("c{}", i % 2)).collect(),
        columns,
        values,
    )
    .unwrap();
    let out = forward_select(&logistic(), &data, &config(1)).unwrap();
    assert_eq!(out.chosen_columns, vec![0]);
    assert_eq!(out.fit_count, (3 + 2) * 5);
    assert_eq!(out.best_score, out.candidate_scores["r1+z0"]);
}

#[test]
fn backward_prefers_dropping_the_noise_column() {
    let forest = ClassifierSpec::default_for(Family::RandomForest, 0);
    let mut noise_ranked_first = 0;
    let runs = 10;
    for seed in 0..runs {
        let data = gaussian_matrix(40, 2, &[2.0, 2.0, 0.0], &[], 100 + seed).unwrap();
        let out = backward_select(&forest, &data, &config(seed)).unwrap();
        let round1: Vec<(&String, &f64)> = out.candidate_scores.iter().filter(|(k, _)| k.starts_with("r1-")).collect();
        assert_eq!(round1.len(), 3);
        let best = round1.iter().fold(round1[0], |b, c| if c.1 > b.1 { *c } else { b });
        if best.0 == "r1-f2" {
            noise_ranked_first += 1;
        }
        if out.chosen_columns.len() < 3 {
            assert_eq!(best.0, "r1-f2", "seed {seed} dropped an informative column first");
            assert!(!out.chosen_columns.contains(&2));
        }
    }
    assert!(noise_ranked_first * 10 >= runs as usize * 9, "noise ranked first in {noise_ranked_first} of {runs} runs");
}

#[test]
fn backward_with_infinite_tolerance_keeps_everything() {
    let data = gaussian_matrix(20, 2, &[1.0, 0.0, 0.5], &[], 4).unwrap();
    let cfg = SelectionConfig {
        tolerance: f64::INFINITY,
        ..config(2)
    };
    let out = backward_select(&logistic(), &data, &cfg).unwrap();
    assert_eq!(out.chosen_columns, vec![0, 1, 2]);
    assert_eq!(out.fit_count, 5 + 3 * 5);
}

#[test]
fn selectors_reject_single_class_data() {
    let data = gaussian_matrix(10, 1, &[1.0], &["speed"], 1).unwrap();
    for result in [
        forward_select(&logistic(), &data, &config(0)),
        backward_select(&logistic(), &data, &config(0)),
        taxonomy_select(&logistic(), &data, &Taxonomy::builtin(), &config(0)),
    ] {
        assert!(matches!(result, Err(Error::Degenerate(_))));
    }
}

#[test]
fn taxonomy_select_recovers_planted_speed() {
    let set = planted_speed_set(&PlantedSpeed {
        per_class: 10,
        points: 25,
        ..Default::default()
    })
    .unwrap();
    let raw = extract_features(&set).unwrap();
    let (data, _, _) = impute_fit_transform(&raw, &raw);
    let tax = Taxonomy::builtin();
    let cfg = config(5);
    let out = taxonomy_select(&logistic(), &data, &tax, &cfg).unwrap();
    assert_eq!(out.candidate_scores.len(), 15);
    assert_eq!(out.fit_count, 15 * cfg.folds);
    let max = out.candidate_scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best_score, max);
    assert!(out.chosen_leaves.as_ref().unwrap().contains(&"speed".to_string()));

    let y = data.class_ids();
    let oracle = CvScorer::new(data.values().view(), &y, cfg.folds, cfg.seed).unwrap();
    for combo in tax.combinations() {
        let cols = columns_for(&combo, &data).unwrap();
        assert_eq!(oracle.score(&logistic(), &cols).unwrap(), out.candidate_scores[&combo.label]);
    }
    let again = taxonomy_select(&logistic(), &data, &tax, &cfg).unwrap();
    assert_eq!(again.candidate_scores, out.candidate_scores);
    assert_eq!(again.chosen_columns, out.chosen_columns);
}

#[test]
fn selectors_are_deterministic() {
    let data = gaussian_matrix(15, 3, &[0.4, 0.0, 1.0, 0.2], &[], 6).unwrap();
    let a = forward_select(&logistic(), &data, &config(3)).unwrap();
    let b = forward_select(&logistic(), &data, &config(3)).unwrap();
    assert_eq!((a.chosen_columns, a.candidate_scores), (b.chosen_columns, b.candidate_scores));
    let a = backward_select(&logistic(), &data, &config(3)).unwrap();
    let b = backward_select(&logistic(), &data, &config(3)).unwrap();
    assert_eq!((a.chosen_columns, a.candidate_scores), (b.chosen_columns, b.candidate_scores));
}
