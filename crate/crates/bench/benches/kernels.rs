use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tsketch::sampling::complex_gaussian;
use tsketch::{
    build_measurement, build_trainer, precompute, Aggregator, Dataset, DeletionSet, Jet,
    MeasuredSketch, MeasurementKind, ModelKind, Seed, TrainerConfig,
};

fn random_jet(order: usize, stream: u64) -> Jet {
    let mut rng = Seed::from_u64(11).stream(stream);
    Jet::from_coeffs((0..=order).map(|_| complex_gaussian(&mut rng)).collect()).unwrap()
}

fn jet_mul(c: &mut Criterion) {
    let mut group = c.benchmark_group("jet_mul");
    for s in [4, 16, 32, 64, 256] {
        let a = random_jet(s, 0);
        let b = random_jet(s, 1);
        group.bench_with_input(BenchmarkId::new("naive", s), &s, |bench, _| {
            bench.iter(|| black_box(&a).mul_naive(black_box(&b)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fft", s), &s, |bench, _| {
            bench.iter(|| black_box(&a).mul_fft(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn toy_problem(n: usize) -> (Dataset, TrainerConfig, MeasurementKind) {
    let mut rng = Seed::from_u64(5).stream(0);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let a = complex_gaussian(&mut rng);
        let b = complex_gaussian(&mut rng);
        xs.push(vec![a.re, a.im, b.re]);
        ys.push(b.im);
    }
    let cfg = TrainerConfig {
        model: ModelKind::LinearRegression,
        learning_rate: 0.05,
        epochs: 2,
        init_seed: 1,
    };
    let loss = MeasurementKind::LossOnExample {
        features: vec![0.6, -0.2, 0.7],
        target: 0.3,
    };
    (Dataset::new(xs, ys).unwrap(), cfg, loss)
}

fn sketching(c: &mut Criterion) {
    let (data, cfg, _) = toy_problem(32);
    let a = build_trainer(&cfg, &data).unwrap();
    let mut group = c.benchmark_group("precompute");
    group.sample_size(10);
    for k in [64, 512] {
        group.bench_with_input(BenchmarkId::new("s3", k), &k, |bench, &k| {
            bench.iter(|| precompute(&a, 3, k, Seed::from_u64(2)).unwrap())
        });
    }
    group.finish();
}

fn predicting(c: &mut Criterion) {
    let (data, cfg, loss) = toy_problem(32);
    let a = build_trainer(&cfg, &data).unwrap();
    let phi = build_measurement(&loss, cfg.model, 3).unwrap();
    let sk = precompute(&a, 3, 512, Seed::from_u64(2)).unwrap();
    let deletion = DeletionSet::new(vec![1, 5, 9], 32).unwrap();

    c.bench_function("measure_sketch/k512", |bench| {
        bench.iter(|| MeasuredSketch::new(&sk, &phi).unwrap())
    });
    let measured = MeasuredSketch::new(&sk, &phi).unwrap();
    c.bench_function("predict/k512", |bench| {
        bench.iter(|| {
            measured
                .predict(
                    black_box(&deletion),
                    Aggregator::MedianOfMeans { blocks: 8 },
                    1.0,
                )
                .unwrap()
        })
    });
}

criterion_group!(benches, jet_mul, sketching, predicting);
criterion_main!(benches);
