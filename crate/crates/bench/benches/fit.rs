use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use foldrpp::{fit, Hyperparams};
use foldrpp_bench::mixed_table;

fn fit_mixed(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(20);
    for rows in [500, 2_000, 8_000] {
        let d = mixed_table(rows, 6, 0);
        group.bench_with_input(BenchmarkId::new("mixed", rows), &d, |b, d| {
            b.iter(|| fit(d, Hyperparams::default()).expect("fit succeeds"))
        });
    }
    group.finish();
}

criterion_group!(benches, fit_mixed);
criterion_main!(benches);
