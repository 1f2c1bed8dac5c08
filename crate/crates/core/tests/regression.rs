use moralvis::datamodel::{assign_split, FeatureKind, FeatureSpaceId, RatingsTable};
use moralvis::regression::{
    evaluate_spaces, fit_ridge, grid_search_cv, kfold_indices, load_model, predict, r_squared, save_model,
    train_final, RegressionError,
};
use moralvis::{CvConfig, FeatureMatrix};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn closed_form_examples() {
    let eye = DMatrix::<f64>::identity(2, 2);
    assert!(close(
        &fit_ridge(&eye, &[1.0, 2.0], 1.0, false).unwrap().weights,
        &[0.5, 1.0],
        1e-15
    ));
    assert!(close(
        &fit_ridge(&eye, &[1.0, 2.0], 0.0, false).unwrap().weights,
        &[1.0, 2.0],
        1e-15
    ));
    let col = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
    assert!(close(
        &fit_ridge(&col, &[1.0, 2.0], 1.0, false).unwrap().weights,
        &[5.0 / 6.0],
        1e-15
    ));
}

#[test]
fn rank_deficient_without_penalty_is_singular() {
    let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
    assert!(matches!(
        fit_ridge(&x, &[1.0, 2.0, 3.0], 0.0, false),
        Err(RegressionError::SingularSystem { .. })
    ));
}

#[test]
fn predict_examples() {
    let eye = DMatrix::<f64>::identity(2, 2);
    let mut model = fit_ridge(&eye, &[1.0, 2.0], 1.0, false).unwrap();
    assert!(close(&predict(&model, &eye).unwrap(), &[0.5, 1.0], 1e-15));
    model.weights = vec![0.0, 0.0];
    model.intercept = 3.0;
    let x = DMatrix::from_row_slice(3, 2, &[9.0, -1.0, 0.5, 0.2, 4.0, 4.0]);
    assert_eq!(predict(&model, &x).unwrap(), [3.0, 3.0, 3.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let square = DMatrix::from_fn(6, 6, |_, _| StandardNormal.sample(&mut rng));
    let y = [1.0, 4.0, 2.5, 3.0, 5.0, 1.5];
    let exact = fit_ridge(&square, &y, 0.0, false).unwrap();
    assert!(close(&predict(&exact, &square).unwrap(), &y, 1e-9));
}

#[test]
fn r2_examples() {
    assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    assert!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap().abs() < 1e-12);
    assert!((r_squared(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 3.0).abs() < 1e-12);
}

#[test]
fn fold_examples() {
    let folds = kfold_indices(10, 10, 1).unwrap();
    assert!(folds.iter().all(|f| f.len() == 1));
    let mut sizes: Vec<usize> = kfold_indices(5, 2, 1).unwrap().iter().map(Vec::len).collect();
    sizes.sort();
    assert_eq!(sizes, [2, 3]);
    assert_eq!(kfold_indices(37, 5, 9).unwrap(), kfold_indices(37, 5, 9).unwrap());
}

#[test]
fn grid_search_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = DMatrix::from_fn(100, 5, |_, _| StandardNormal.sample(&mut rng));
    let w = [0.5, -1.0, 2.0, 0.25, 1.5];
    let y: Vec<f64> = (0..100).map(|i| (0..5).map(|j| x[(i, j)] * w[j]).sum()).collect();
    let cfg = CvConfig {
        alpha_grid: vec![1e-6, 1e3],
        ..CvConfig::default()
    };
    let report = grid_search_cv(&x, &y, &cfg).unwrap();
    assert_eq!(report.best_alpha, 1e-6);
    assert_eq!(grid_search_cv(&x, &y, &cfg).unwrap(), report);

    let single = CvConfig {
        alpha_grid: vec![7.0],
        ..CvConfig::default()
    };
    assert_eq!(grid_search_cv(&x, &y, &single).unwrap().best_alpha, 7.0);
}

#[test]
fn final_model_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = DMatrix::from_fn(40, 4, |_, _| StandardNormal.sample(&mut rng));
    let y: Vec<f64> = (0..40).map(|i| 3.0 + x[(i, 0)] - 0.5 * x[(i, 2)]).collect();
    let model = train_final(&x, &y, 0.1).unwrap();
    assert_eq!(model, fit_ridge(&x, &y, 0.1, true).unwrap());
    assert_eq!(model.training_meta.n_train, 40);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(predict(&back, &x).unwrap(), predict(&model, &x).unwrap());

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(
        &path,
        text.replace("\"schema_version\": 1", "\"schema_version\": 2"),
    )
    .unwrap();
    assert!(matches!(
        load_model(&path),
        Err(RegressionError::SchemaVersionMismatch { found: 2, .. })
    ));
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&path), Err(RegressionError::CorruptFile(_))));
}

#[test]
fn noise_columns_do_not_help() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise = Normal::new(0.0, 0.2).unwrap();
    let n = 300;
    let a = DMatrix::from_fn(n, 8, |_, _| StandardNormal.sample(&mut rng));
    let junk = DMatrix::from_fn(n, 40, |_, _| StandardNormal.sample(&mut rng));
    let b = DMatrix::from_fn(n, 48, |i, j| if j < 8 { a[(i, j)] } else { junk[(i, j - 8)] });
    let ids: Vec<String> = (0..n).map(|i| format!("i{i:03}")).collect();
    let rows = (0..n).map(|i| {
        let s: f64 = (0..8).map(|j| a[(i, j)] * 0.2).sum();
        let targets: Vec<f64> = (0..6)
            .map(|t| (3.0 + s * (1.0 + t as f64 * 0.1) + noise.sample(&mut rng)).clamp(1.0, 5.0))
            .collect();
        (ids[i].clone(), targets)
    });
    let ratings = RatingsTable::new(&[], rows.collect::<Vec<_>>()).unwrap();
    let matrix = |x: DMatrix<f64>, label: &str| FeatureMatrix {
        ids: ids.clone(),
        x,
        space: FeatureSpaceId::new(FeatureKind::ImageEmbedding, label),
        degenerate_rows: 0,
    };
    let split = assign_split(&ids, 0.8, 1).unwrap();
    let targets: Vec<String> = moralvis::CANONICAL_TARGETS
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table = evaluate_spaces(
        &[matrix(a, "a"), matrix(b, "b")],
        &ratings,
        &targets,
        &split,
        &CvConfig::default(),
    )
    .unwrap();
    let avg = |s: &str| table.row(s).unwrap().average().unwrap();
    assert!(avg("image_embedding:a") >= avg("image_embedding:b") - 0.05);
    assert!(avg("image_embedding:a") > 0.5);
}
