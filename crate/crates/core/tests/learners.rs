use instatrait::featureset::{FeatureCatalog, FeatureCategory, FeatureColumn, FeatureMatrix};
use instatrait::learners::*;
use instatrait::psychometrics::{Level, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    let d = rows[0].len();
    let catalog = FeatureCatalog {
        version: 1,
        columns: (0..d)
            .map(|j| FeatureColumn {
                name: format!("ig:f{j}"),
                category: FeatureCategory::PostProfile,
            })
            .collect(),
        popular_accounts: None,
    };
    let values = rows.iter().flat_map(|r| r.iter().map(|v| Some(*v))).collect();
    FeatureMatrix::new((0..rows.len()).map(|i| format!("p{i:04}")).collect(), catalog, values).unwrap()
}

fn two_level(seed: u64, n: usize, d: usize, shift: f64) -> (FeatureMatrix, Vec<Level>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let high = rng.gen_bool(0.5);
        let s = if high { shift } else { -shift };
        let row: Vec<f64> = (0..d)
            .map(|j| if j < 2 { s + noise.sample(&mut rng) } else { noise.sample(&mut rng) })
            .collect();
        rows.push(row);
        labels.push(if high { Level::High } else { Level::Low });
    }
    (matrix(&rows), labels)
}

fn blobs(seed: u64, n: usize) -> (FeatureMatrix, Vec<Level>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let centers = [(-4.0, 0.0), (0.0, 4.0), (4.0, 0.0)];
    let levels = [Level::Low, Level::Medium, Level::High];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let c = i % 3;
        rows.push(vec![
            centers[c].0 + noise.sample(&mut rng),
            centers[c].1 + noise.sample(&mut rng),
        ]);
        labels.push(levels[c]);
    }
    (matrix(&rows), labels)
}

fn accuracy(model: &TrainedModel, m: &FeatureMatrix, labels: &[Level]) -> f64 {
    let preds = model.predict_matrix(m).unwrap();
    preds.iter().zip(labels).filter(|(p, l)| p.level == **l).count() as f64 / labels.len() as f64
}

#[test]
fn glm_two_level_equals_logistic_regression() {
    let (m, y) = two_level(1, 120, 4, 0.8);
    let lr = train_model(&ModelSpec::new(ModelFamily::Lr, Scheme::Two, 1), &m, &y).unwrap();
    let glm = train_model(&ModelSpec::new(ModelFamily::Glm, Scheme::Two, 1), &m, &y).unwrap();
    let (FittedParams::Linear(a), FittedParams::Linear(b)) = (&lr.params, &glm.params) else {
        panic!("linear models expected");
    };
    for (wa, wb) in a.coefficients[0].iter().zip(&b.coefficients[0]) {
        assert!((wa - wb).abs() < 1e-6);
    }
}

#[test]
fn glm_three_level_blobs() {
    let (train, ytr) = blobs(2, 150);
    let (test, yte) = blobs(3, 90);
    let glm = train_model(&ModelSpec::new(ModelFamily::Glm, Scheme::Three, 1), &train, &ytr).unwrap();
    assert!(accuracy(&glm, &test, &yte) >= 0.95);
    for p in glm.predict_matrix(&test).unwrap() {
        assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.scores.iter().all(|s| (0.0..=1.0).contains(s)));
    }
}

#[test]
fn logistic_regression_rejects_three_level_labels() {
    let (m, _) = blobs(4, 30);
    let labels = vec![Level::Medium; 30];
    let err = train_model(&ModelSpec::new(ModelFamily::Lr, Scheme::Two, 1), &m, &labels).unwrap_err();
    assert!(matches!(err, LearnerError::Scheme(_)));
    let err = train_logistic_regression(&m, &labels, &ModelSpec::new(ModelFamily::Lr, Scheme::Three, 1)).unwrap_err();
    assert!(matches!(err, LearnerError::Scheme(_)));
}

#[test]
fn single_class_training_predicts_that_class() {
    let (m, _) = two_level(5, 40, 3, 1.0);
    let all_high = vec![Level::High; 40];
    for family in [ModelFamily::Dt, ModelFamily::Lr, ModelFamily::Glm] {
        let model = train_model(&ModelSpec::new(family, Scheme::Two, 1), &m, &all_high).unwrap();
        assert!(model.predict_matrix(&m).unwrap().iter().all(|p| p.level == Level::High), "{family}");
    }
}

#[test]
fn every_family_is_deterministic_and_round_trips() {
    let (m, y) = two_level(6, 80, 5, 0.7);
    let (m3, y3) = blobs(7, 60);
    for family in ModelFamily::ALL {
        let mut spec = ModelSpec::new(family, Scheme::Two, 42);
        spec.hyper.forest.grid = vec![ForestConfig { trees: 8, max_depth: 3 }, ForestConfig { trees: 16, max_depth: 5 }];
        let a = train_model(&spec, &m, &y).unwrap();
        let b = train_model(&spec, &m, &y).unwrap();
        assert_eq!(a.to_json(), b.to_json(), "{family}");
        let loaded = TrainedModel::from_json(&a.to_json()).unwrap();
        assert_eq!(loaded, a);
        assert_eq!(loaded.predict_matrix(&m).unwrap(), a.predict_matrix(&m).unwrap());
        if family.supports(Scheme::Three) {
            spec.scheme = Scheme::Three;
            let c = train_model(&spec, &m3, &y3).unwrap();
            assert_eq!(c.to_json(), train_model(&spec, &m3, &y3).unwrap().to_json());
        }
    }
}

#[test]
fn predict_checks_feature_names() {
    let (m, y) = two_level(8, 50, 3, 1.0);
    let model = train_model(&ModelSpec::new(ModelFamily::Dt, Scheme::Two, 1), &m, &y).unwrap();
    let mut row = m.named_row(0);
    assert!(model.predict(&row).is_ok());
    row.reverse();
    assert_eq!(model.predict(&row).unwrap(), model.predict_matrix(&m).unwrap()[0]);
    row.push(("ig:unknown".into(), Some(1.0)));
    assert!(matches!(model.predict(&row), Err(LearnerError::Contract(_))));
    row.pop();
    row.pop();
    assert!(matches!(model.predict(&row), Err(LearnerError::Contract(_))));
}

#[test]
fn predicted_label_is_argmax_of_scores() {
    let (m, y) = two_level(9, 60, 3, 0.5);
    for family in [ModelFamily::Lr, ModelFamily::Mlp, ModelFamily::Dt] {
        let model = train_model(&ModelSpec::new(family, Scheme::Two, 3), &m, &y).unwrap();
        for p in model.predict_matrix(&m).unwrap() {
            let idx = Scheme::Two.class_index(p.level).unwrap();
            let cubed: Vec<f64> = p.scores.iter().map(|s| s.powi(3) + 2.0).collect();
            assert_eq!(argmax(&cubed), idx);
            assert_eq!(argmax(&p.scores), idx);
        }
    }
}

#[test]
fn duplicated_rows_leave_linear_boundaries_unchanged() {
    let (m, y) = two_level(10, 60, 3, 0.6);
    let twice: Vec<usize> = (0..60).chain(0..60).collect();
    let m2 = m.select_rows(&twice);
    // select_rows keeps ids, which must stay unique
    let m2 = FeatureMatrix::new(
        (0..120).map(|i| format!("d{i}")).collect(),
        m2.catalog.clone(),
        (0..120).flat_map(|r| m2.row(r).to_vec()).collect(),
    )
    .unwrap();
    let y2: Vec<Level> = twice.iter().map(|&i| y[i]).collect();
    let (grid, _) = two_level(11, 200, 3, 1.5);
    for (family, scheme) in [(ModelFamily::Lr, Scheme::Two), (ModelFamily::Glm, Scheme::Two)] {
        let a = train_model(&ModelSpec::new(family, scheme, 1), &m, &y).unwrap();
        let b = train_model(&ModelSpec::new(family, scheme, 1), &m2, &y2).unwrap();
        let pa: Vec<Level> = a.predict_matrix(&grid).unwrap().into_iter().map(|p| p.level).collect();
        let pb: Vec<Level> = b.predict_matrix(&grid).unwrap().into_iter().map(|p| p.level).collect();
        assert_eq!(pa, pb);
    }
    let (b3, y3) = blobs(12, 45);
    let idx: Vec<usize> = (0..45).chain(0..45).collect();
    let b3d = FeatureMatrix::new(
        (0..90).map(|i| format!("d{i}")).collect(),
        b3.catalog.clone(),
        idx.iter().flat_map(|&r| b3.row(r).to_vec()).collect(),
    )
    .unwrap();
    let y3d: Vec<Level> = idx.iter().map(|&i| y3[i]).collect();
    let a = train_model(&ModelSpec::new(ModelFamily::Glm, Scheme::Three, 1), &b3, &y3).unwrap();
    let b = train_model(&ModelSpec::new(ModelFamily::Glm, Scheme::Three, 1), &b3d, &y3d).unwrap();
    let (grid3, _) = blobs(13, 90);
    let pa: Vec<Level> = a.predict_matrix(&grid3).unwrap().into_iter().map(|p| p.level).collect();
    let pb: Vec<Level> = b.predict_matrix(&grid3).unwrap().into_iter().map(|p| p.level).collect();
    assert_eq!(pa, pb);
}

#[test]
fn training_loss_is_non_increasing() {
    let (m, y) = two_level(14, 200, 6, 0.5);
    for family in [ModelFamily::Lr, ModelFamily::Glm, ModelFamily::Mlp] {
        let model = train_model(&ModelSpec::new(family, Scheme::Two, DEFAULT_MLP_SEED), &m, &y).unwrap();
        let h = &model.metadata.loss_history;
        assert!(h.len() >= 2, "{family}");
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{family}: {h:?}");
        }
    }
    let (b, yb) = blobs(15, 90);
    let glm = train_model(&ModelSpec::new(ModelFamily::Glm, Scheme::Three, 1), &b, &yb).unwrap();
    for w in glm.metadata.loss_history.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn forest_beats_single_tree_on_planted_signal() {
    let (mut rf_total, mut dt_total) = (0.0, 0.0);
    for seed in 0..10 {
        let (m, y) = two_level(100 + seed, 300, 12, 0.6);
        let train: Vec<usize> = (0..240).collect();
        let test: Vec<usize> = (240..300).collect();
        let (mtr, mte) = (m.select_rows(&train), m.select_rows(&test));
        let ytr: Vec<Level> = train.iter().map(|&i| y[i]).collect();
        let yte: Vec<Level> = test.iter().map(|&i| y[i]).collect();
        let mut spec = ModelSpec::new(ModelFamily::Rf, Scheme::Two, seed);
        spec.hyper.forest.grid = vec![ForestConfig { trees: 50, max_depth: 4 }, ForestConfig { trees: 50, max_depth: 8 }];
        let rf = train_model(&spec, &mtr, &ytr).unwrap();
        let dt = train_model(&ModelSpec::new(ModelFamily::Dt, Scheme::Two, seed), &mtr, &ytr).unwrap();
        rf_total += accuracy(&rf, &mte, &yte);
        dt_total += accuracy(&dt, &mte, &yte);
    }
    assert!(rf_total >= dt_total, "rf {} dt {}", rf_total / 10.0, dt_total / 10.0);
}

#[test]
fn missing_cells_are_imputed_at_prediction() {
    let (m, y) = two_level(16, 60, 3, 1.0);
    let model = train_model(&ModelSpec::new(ModelFamily::Glm, Scheme::Two, 1), &m, &y).unwrap();
    let row: Vec<(String, Option<f64>)> = model.feature_names.iter().map(|n| (n.clone(), None)).collect();
    let p = model.predict(&row).unwrap();
    assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn unsupported_model_version_is_rejected() {
    let (m, y) = two_level(17, 30, 2, 1.0);
    let model = train_model(&ModelSpec::new(ModelFamily::Dt, Scheme::Two, 1), &m, &y).unwrap();
    let json = model.to_json().replacen("\"format_version\": 1", "\"format_version\": 99", 1);
    assert!(matches!(TrainedModel::from_json(&json), Err(LearnerError::Serialization(_))));
}
