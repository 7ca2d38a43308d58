//! Parallel versus sequential group kernels.
//!
//! Run with `cargo bench -p air-core`. Each kernel is measured through its
//! public dispatch (rayon pool) and through its `_serial` twin on the same
//! inputs, at two problem sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use air_core::data::{generate_blobs, BlobSpec};
use air_core::reg::{group_activations, group_activations_serial, prox_all, prox_all_serial};
use air_core::rng::{rng_stream, streams};
use air_core::tensor::{GroupOperator, WeightRule};
use air_core::Weights;

struct Fixture {
    label: String,
    op: GroupOperator,
    w: Weights,
}

fn fixture(n: usize, p: usize, c: usize) -> Fixture {
    let spec = BlobSpec {
        num_examples: n,
        feature_dim: p,
        num_classes: c,
        separation: 3.0,
        stddev: 1.0,
    };
    let mut rng = rng_stream(17, streams::BLOBS);
    let ds = generate_blobs(&spec, &mut rng).expect("blob generation");
    let op = GroupOperator::from_dataset(&ds, WeightRule::SizeNormalized).expect("operator");
    let mut w = Weights::zeros((p, c));
    for (i, a) in w.iter_mut().enumerate() {
        *a = ((i as f64) * 0.61).sin() * 0.2;
    }
    Fixture {
        label: format!("n{n}_p{p}_c{c}"),
        op,
        w,
    }
}

fn bench_forward(criterion: &mut Criterion) {
    let mut group = criterion.benchmark_group("forward");
    for fx in [fixture(500, 20, 5), fixture(2000, 50, 10)] {
        group.bench_with_input(BenchmarkId::new("parallel", &fx.label), &fx, |b, fx| {
            b.iter(|| black_box(fx.op.apply_forward(&fx.w).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("serial", &fx.label), &fx, |b, fx| {
            b.iter(|| black_box(fx.op.apply_forward_serial(&fx.w).unwrap()))
        });
    }
    group.finish();
}

fn bench_adjoint(criterion: &mut Criterion) {
    let mut group = criterion.benchmark_group("adjoint");
    for fx in [fixture(500, 20, 5), fixture(2000, 50, 10)] {
        let v = fx.op.apply_forward(&fx.w).unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", &fx.label), &fx, |b, fx| {
            b.iter(|| black_box(fx.op.apply_adjoint(&v).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("serial", &fx.label), &fx, |b, fx| {
            b.iter(|| black_box(fx.op.apply_adjoint_serial(&v).unwrap()))
        });
    }
    group.finish();
}

fn bench_prox(criterion: &mut Criterion) {
    let mut group = criterion.benchmark_group("prox");
    for fx in [fixture(500, 20, 5), fixture(2000, 50, 10)] {
        let v = fx.op.apply_forward(&fx.w).unwrap();
        let lambdas = fx.op.lambdas().to_vec();
        group.bench_with_input(BenchmarkId::new("parallel", &fx.label), &fx, |b, _| {
            b.iter_batched(
                || v.clone(),
                |mut v| {
                    prox_all(&mut v, &lambdas, 10.0).unwrap();
                    black_box(v)
                },
                criterion::BatchSize::LargeInput,
            )
        });
        group.bench_with_input(BenchmarkId::new("serial", &fx.label), &fx, |b, _| {
            b.iter_batched(
                || v.clone(),
                |mut v| {
                    prox_all_serial(&mut v, &lambdas, 10.0).unwrap();
                    black_box(v)
                },
                criterion::BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn bench_activations(criterion: &mut Criterion) {
    let mut group = criterion.benchmark_group("activations");
    for fx in [fixture(500, 20, 5), fixture(2000, 50, 10)] {
        let v = fx.op.apply_forward(&fx.w).unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", &fx.label), &fx, |b, _| {
            b.iter(|| black_box(group_activations(&v)))
        });
        group.bench_with_input(BenchmarkId::new("serial", &fx.label), &fx, |b, _| {
            b.iter(|| black_box(group_activations_serial(&v)))
        });
    }
    group.finish();
}

criterion_group!(
    kernels,
    bench_forward,
    bench_adjoint,
    bench_prox,
    bench_activations
);
criterion_main!(kernels);
