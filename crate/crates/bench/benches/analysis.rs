use criterion::{criterion_group, criterion_main, Criterion};
use spindle_bench::{sample, synthetic_table};
use spindle_core::distribution::{compare_distributions, residual_bootstrap, shapiro_wilk};
use spindle_core::interpret::{shap_values, variable_importance};
use spindle_core::learners::{fit, HyperParams};
use spindle_core::Seed;

fn shap(c: &mut Criterion) {
    let t = synthetic_table(10, 20);
    let model = fit(&HyperParams::Knn { k: 5 }, &t.x, &t.feature_names, &t.y, Seed(1)).unwrap();
    let instances = t.x.select_rows(&(0..20).collect::<Vec<_>>());
    let mut group = c.benchmark_group("shap");
    group.sample_size(10);
    group.bench_function("knn_20_instances_50_sims", |b| b.iter(|| shap_values(&model, &instances, &t.x, 50, Seed(3)).unwrap()));
    group.bench_function("knn_permutation_importance", |b| b.iter(|| variable_importance(&model, &t, Seed(4)).unwrap()));
    group.finish();
}

fn distributions(c: &mut Criterion) {
    let a = sample(1000, 150.0, 30.0);
    let b = sample(1200, 160.0, 35.0);
    c.bench_function("compare_1000_vs_1200", |bch| bch.iter(|| compare_distributions(&a, &b).unwrap()));
    c.bench_function("shapiro_wilk_5000", |bch| {
        let x = sample(5000, 0.0, 1.0);
        bch.iter(|| shapiro_wilk(&x).unwrap())
    });
    c.bench_function("bootstrap_100", |bch| bch.iter(|| residual_bootstrap(137.651, &a, 100, Seed(5)).unwrap()));
}

criterion_group!(benches, shap, distributions);
criterion_main!(benches);
