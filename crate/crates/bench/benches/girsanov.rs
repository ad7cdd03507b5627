use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stochbvp_bench::{fixed_path, SIZES};
use stochbvp_core::nonlinearity::Sine;
use stochbvp_core::{
    det2_closed_form, det2_eigen_product, dhg_kernel, eta_density, skorohod_g, Grid, HSOperatorSpec,
};

fn det2(c: &mut Criterion) {
    let mut g = c.benchmark_group("det2");
    for n in SIZES {
        let spec = HSOperatorSpec::constant(Grid::new(n).unwrap(), 4.0, 0.5);
        g.bench_with_input(BenchmarkId::new("closed", n), &spec, |b, s| {
            b.iter(|| det2_closed_form(black_box(s)).unwrap())
        });
    }
    for n in [64, 256] {
        let spec = dhg_kernel(&fixed_path(n), &Sine { amplitude: 0.2 });
        g.bench_with_input(BenchmarkId::new("eigen", n), &spec, |b, s| {
            b.iter(|| det2_eigen_product(black_box(s)).unwrap())
        });
    }
    g.finish();
}

fn eta(c: &mut Criterion) {
    let f = Sine { amplitude: 0.2 };
    let mut g = c.benchmark_group("eta");
    for n in SIZES {
        let path = fixed_path(n);
        g.bench_with_input(BenchmarkId::new("density", n), &path, |b, p| {
            b.iter(|| eta_density(black_box(p), &f).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("skorohod", n), &path, |b, p| {
            b.iter(|| skorohod_g(black_box(p), &f))
        });
    }
    g.finish();
}

criterion_group!(benches, det2, eta);
criterion_main!(benches);
