use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use bernconv::{avg_entropy, build_level_n, min_value_poly_search, QuadratureSpec, ScaleVector, Strategy, SystemSpec};

fn golden() -> SystemSpec {
    let lambda = ScaleVector::new(vec![(5f64.sqrt() - 1.0) / 2.0]).unwrap();
    SystemSpec::bernoulli(lambda).unwrap()
}

fn level_n(c: &mut Criterion) {
    let spec = golden();
    let mut g = c.benchmark_group("build_level_n");
    for n in [12usize, 16, 20] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| build_level_n(black_box(&spec), n).unwrap())
        });
    }
    g.finish();
}

fn average_entropy(c: &mut Criterion) {
    let spec = golden();
    let mu = build_level_n(&spec, 14).unwrap();
    let r = ScaleVector::new(vec![1e-3]).unwrap();
    c.bench_function("avg_entropy/exact", |b| {
        b.iter(|| avg_entropy(black_box(&mu), &r, &QuadratureSpec::exact()).unwrap())
    });
    c.bench_function("avg_entropy/qmc", |b| {
        b.iter(|| avg_entropy(black_box(&mu), &r, &QuadratureSpec::qmc(1024, 0)).unwrap())
    });
}

fn poly_search(c: &mut Criterion) {
    let xi = (5f64.sqrt() - 1.0) / 2.0;
    let mut g = c.benchmark_group("poly_search");
    g.sample_size(10);
    for n in [12usize, 16] {
        g.bench_with_input(BenchmarkId::new("meet-in-middle", n), &n, |b, &n| {
            b.iter(|| min_value_poly_search(black_box(xi), n, &[-2, 0, 2], Strategy::MeetInMiddle).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, level_n, average_entropy, poly_search);
criterion_main!(benches);
