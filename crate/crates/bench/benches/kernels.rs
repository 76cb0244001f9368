use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mindiss_core::diracqw::{mu_dirac, BlochVector, MuDiracMethod, RingWalkConfig};
use mindiss_core::linalg::{random_density, seeded_rng};
use mindiss_core::meanfield::WeakCouplingFamily;
use mindiss_core::optimizer::{maximize_fidelity, OptimizerConfig};
use mindiss_core::wavepacket::{
    build_packet, evolve_effective, reduce_to_ir, trace_distance_series, Band, GaussianPacketSpec,
};

fn spec() -> GaussianPacketSpec {
    GaussianPacketSpec {
        sigma_k: 0.05,
        k0: 0.2,
        x0: 0,
        band: Band::Plus,
    }
}

fn wavepacket_series(c: &mut Criterion) {
    let r = BlochVector::new(1.0, 0.0, 0.0).unwrap();
    let mut group = c.benchmark_group("trace_distance_series");
    group.sample_size(10);
    for l in [100usize, 200] {
        let cfg = RingWalkConfig::new(0.2, l).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(l), &cfg, |b, cfg| {
            b.iter(|| trace_distance_series(cfg, &spec(), &r, 20).unwrap())
        });
    }
    group.finish();
}

fn low_rank_trace_distance(c: &mut Criterion) {
    let cfg = RingWalkConfig::new(0.2, 200).unwrap();
    let r = BlochVector::new(1.0, 0.0, 0.0).unwrap();
    let rho = reduce_to_ir(&build_packet(&cfg, &spec()).unwrap()).unwrap();
    let sigma = evolve_effective(&cfg, &r, &rho, 10).unwrap();
    c.bench_function("low_rank_trace_distance/L=200", |b| {
        b.iter(|| black_box(&rho).trace_distance(black_box(&sigma)).unwrap())
    });
}

fn mu_generic(c: &mut Criterion) {
    let r = BlochVector::new(0.6, -0.3, 0.2).unwrap();
    let mut group = c.benchmark_group("mu_dirac_generic");
    for l in [4usize, 8] {
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, &l| {
            b.iter(|| mu_dirac(&r, MuDiracMethod::Generic(l)).unwrap())
        });
    }
    group.finish();
}

fn optimizer(c: &mut Criterion) {
    let fam = WeakCouplingFamily::random(2, 2, 3).unwrap();
    let u = fam.unitary(0.02).unwrap();
    let rho = random_density(2, &mut seeded_rng(4));
    let cfg = OptimizerConfig {
        restarts: 1,
        max_iters: 100,
        ..OptimizerConfig::default()
    };
    let mut group = c.benchmark_group("optimizer");
    group.sample_size(10);
    group.bench_function("d_ir=2,d_uv=2", |b| {
        b.iter(|| maximize_fidelity(&u, &rho, &cfg, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, wavepacket_series, low_rank_trace_distance, mu_generic, optimizer);
criterion_main!(benches);
