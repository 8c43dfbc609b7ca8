use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use parisian::mc::{simulate_parisian, McConfig};
use parisian::tables::TableSpec;
use parisian::{par, LevyModel, RefractedModel};

// Sequential loop against the rayon pool on the same seeds. The estimates are
// bit-identical, so only the wall time differs. Build with
// `--no-default-features` to see the fallback on both sides.
fn monte_carlo(c: &mut Criterion) {
    let models = [
        ("cramer_lundberg", RefractedModel::new(LevyModel::cramer_lundberg(9.0, 5.0, 1.0).unwrap(), 3.0).unwrap()),
        ("brownian", RefractedModel::new(LevyModel::brownian(6.0, 6.0).unwrap(), 2.0).unwrap()),
    ];
    let pool = par::available_workers().max(2);
    let paths = 20_000;
    let mut group = c.benchmark_group("parisian_mc");
    group.sample_size(10);
    group.throughput(Throughput::Elements(paths));
    for (name, rm) in &models {
        for workers in [1, pool] {
            let cfg = McConfig::new(paths, 7).with_workers(workers);
            group.bench_with_input(BenchmarkId::new(*name, format!("workers={workers}")), &cfg, |b, cfg| {
                b.iter(|| simulate_parisian(rm, 1.0, 1.0, cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn tables(c: &mut Criterion) {
    let spec = TableSpec::get(1).unwrap();
    let pool = par::available_workers().max(2);
    let mut group = c.benchmark_group("table_1");
    group.sample_size(10);
    for workers in [1, pool] {
        group.bench_function(format!("workers={workers}"), |b| b.iter(|| spec.compute(workers).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, tables);
criterion_main!(benches);
