//! Benchmarks for the hot paths: eigenspace splits, weight curves, the
//! sphere search and the full classifier.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use polystab_core::action::{presets as reps, Point, Space};
use polystab_core::liealg::presets::sl;
use polystab_core::maxweight::{weight_curve, zero_set_search, SearchOptions};
use polystab_core::stability::{classify, kempf_ness_flow, ClassifyOptions, FlowOptions};

fn bench_ad_eigenspaces(c: &mut Criterion) {
    let s = sl(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("ad_eigenspaces sl4", |b| {
        b.iter_batched(
            || {
                s.direction((0..s.dim_p()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap()
            },
            |beta| s.ad_eigenspaces(&beta).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_weight_curve(c: &mut Criterion) {
    let s = sl(3).unwrap();
    let rep = reps::adjoint(&s, Space::Affine).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = rep
        .point((0..rep.dim_v()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap();
    let beta = s
        .direction((0..s.dim_p()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap();
    c.bench_function("weight_curve sl3 adjoint", |b| {
        b.iter(|| weight_curve(&rep, &x, &beta, 8.0).unwrap())
    });
}

fn bench_zero_set_search(c: &mut Criterion) {
    let s = sl(2).unwrap();
    let rep = reps::defining(&s, Space::Affine).unwrap();
    let x = rep.point(vec![1.0, 0.0]).unwrap();
    let opts = SearchOptions::default();
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    group.bench_function("zero_set_search sl2 defining", |b| {
        b.iter(|| zero_set_search(&rep, &x, &opts).unwrap())
    });
    group.finish();
}

fn bench_flow(c: &mut Criterion) {
    let s = sl(2).unwrap();
    let rep = reps::adjoint(&s, Space::Affine).unwrap();
    let m = DMatrix::from_row_slice(2, 2, &[1.0, -10.0, 0.0, -1.0]);
    let x = Point {
        vec: s.g_coords(&m),
    };
    let opts = FlowOptions::default();
    c.bench_function("kempf_ness_flow far start", |b| {
        b.iter(|| kempf_ness_flow(&rep, &x, &opts).unwrap())
    });
}

fn bench_classify(c: &mut Criterion) {
    let s = sl(2).unwrap();
    let rep = reps::adjoint(&s, Space::Affine).unwrap();
    let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let x = Point {
        vec: s.g_coords(&h),
    };
    let opts = ClassifyOptions::default();
    let mut group = c.benchmark_group("classify");
    group.sample_size(10);
    group.bench_function("classify sl2 adjoint H", |b| {
        b.iter(|| classify(&rep, &x, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_ad_eigenspaces,
    bench_weight_curve,
    bench_zero_set_search,
    bench_flow,
    bench_classify
);
criterion_main!(benches);
