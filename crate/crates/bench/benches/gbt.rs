use afrr_bench::{bench_config, regression_data};
use afrr_core::gbt::{bin_features, fit, grow_tree, LossSpec};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn grow(c: &mut Criterion) {
    let mut group = c.benchmark_group("grow_tree");
    for n in [10_000, 100_000] {
        let (x, y) = regression_data(n, 40, 7);
        let (binned, binning) = bin_features(&x, 255).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let grad: Vec<f64> = y.iter().map(|v| -v).collect();
        let hess = vec![1.0; n];
        let cfg = bench_config(1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| grow_tree(&binned, &binning, &rows, &grad, &hess, &cfg).unwrap())
        });
    }
    group.finish();
}

fn boost(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_50_rounds");
    group.sample_size(10);
    let (x, y) = regression_data(20_000, 40, 7);
    for loss in [LossSpec::L2, LossSpec::Quantile { q: 0.9 }] {
        group.bench_with_input(BenchmarkId::from_parameter(loss.tag()), &loss, |b, loss| {
            b.iter(|| fit(black_box(&x), &y, *loss, &bench_config(50), None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, grow, boost);
criterion_main!(benches);
