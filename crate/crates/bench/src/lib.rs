//! Inputs shared by the criterion benchmarks under `benches/`.

use afrr_core::features::FeatureMatrix;
use afrr_core::gbt::{fit, Ensemble, LossSpec, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` rows of `m` uniform features, ~2% missing, with a nonlinear target
/// on the first three.
pub fn regression_data(n: usize, m: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| r[0] * r[1] + (3.0 * r[2]).sin() + 0.1 * rng.gen_range(-1.0..1.0))
        .collect();
    let names = (0..m).map(|f| format!("x{f}")).collect();
    let matrix = FeatureMatrix::from_rows(names, &rows).expect("rectangular rows");
    let columns = matrix
        .columns()
        .iter()
        .map(|c| c.iter().map(|v| v.filter(|_| rng.gen::<f64>() >= 0.02)).collect())
        .collect();
    let matrix = FeatureMatrix::new(matrix.index().to_vec(), matrix.names().to_vec(), columns)
        .expect("same shape");
    (matrix, y)
}

pub fn bench_config(num_rounds: usize) -> TrainConfig {
    TrainConfig {
        num_rounds,
        early_stopping_rounds: None,
        ..TrainConfig::default()
    }
}

pub fn trained_model(n: usize, m: usize, num_rounds: usize) -> (Ensemble, FeatureMatrix) {
    let (x, y) = regression_data(n, m, 1);
    let (model, _) = fit(&x, &y, LossSpec::L2, &bench_config(num_rounds), None).expect("fit");
    (model, x)
}
