use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_rational::BigRational;
use num_traits::One;
use osc_core::functionals::{log_norm_n, FibrationContext};
use osc_core::geodesics::{flow_geodesic, FiberTangent, HolomorphySection, Su2Slice};
use osc_core::geometry::fiber_scalar_curvature;
use osc_core::stability::{shipped_spec, w0_w1};
use osc_core::{FibrationModel, LogGrid};

fn model(n: usize) -> FibrationModel {
    let g = LogGrid::new(10.0, 24.0, n, n, 8).unwrap();
    FibrationModel::new(1, BigRational::one(), g).unwrap()
}

fn bell(s: f64) -> f64 {
    0.6 * (-(s - 0.3).powi(2) / 4.0).exp()
}

fn curvature(c: &mut Criterion) {
    let mut group = c.benchmark_group("fiber_scalar_curvature");
    for n in [128, 256] {
        let omega = model(n).omega_x();
        group.bench_with_input(BenchmarkId::from_parameter(n), &omega, |b, w| {
            b.iter(|| fiber_scalar_curvature(black_box(w)).unwrap())
        });
    }
    group.finish();
}

fn geodesic(c: &mut Criterion) {
    let m = model(128);
    let u = HolomorphySection::from_fn(&m.omega_x(), bell).unwrap();
    c.bench_function("flow_geodesic/128x16", |b| b.iter(|| flow_geodesic(&m, black_box(&u), 1.0, 16).unwrap()));
}

fn log_norm(c: &mut Criterion) {
    let m = model(256);
    let ctx = FibrationContext::new(&m).unwrap();
    let phi = m.fiber_shift_potential(bell, |s| 0.1 * (-s * s / 3.0).exp());
    c.bench_function("log_norm_n/256", |b| b.iter(|| log_norm_n(black_box(&phi), &ctx).unwrap()));
}

fn invariants(c: &mut Criterion) {
    let spec = shipped_spec("euler").unwrap();
    c.bench_function("w0_w1/euler", |b| b.iter(|| w0_w1(black_box(&spec)).unwrap()));
}

fn su2(c: &mut Criterion) {
    let g = LogGrid::new(10.0, 24.0, 65, 16, 8).unwrap();
    let m = FibrationModel::new(0, BigRational::one(), g).unwrap();
    let slice = Su2Slice::new(&m);
    let n = slice.b.len();
    let tangent = |p: f64| FiberTangent {
        base: (0..n).map(|i| (p * i as f64).sin()).collect(),
        harmonic: (0..n).map(|i| [(p * i as f64).cos(), p, 1.0 - p]).collect(),
    };
    let (psi, eta) = (tangent(0.3), tangent(0.7));
    c.bench_function("su2_sectional_curvature", |b| {
        b.iter(|| slice.sectional_curvature(black_box(&psi), black_box(&eta)).unwrap())
    });
}

criterion_group!(benches, curvature, geodesic, log_norm, invariants, su2);
criterion_main!(benches);
