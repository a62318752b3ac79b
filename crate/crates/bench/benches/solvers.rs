use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sfpe_bench::Problem;
use sfpe_core::linear::solve_linear;
use sfpe_core::nonlinear::solve_nonlinear;
use sfpe_core::nonlinearity::NonlinearitySpec;

fn linear(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_linear");
    group.sample_size(10);
    for n in [512usize, 1024] {
        let p = Problem::new(n, 50);
        group.bench_function(BenchmarkId::from_parameter(n), |bch| {
            bch.iter(|| solve_linear(&p.b, &p.v0, &p.solver).expect("linear solve"))
        });
    }
    group.finish();
}

fn nonlinear(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_nonlinear");
    group.sample_size(10);
    let p = Problem::new(512, 50);
    let cfg = p.nonlinear();
    let nl = NonlinearitySpec::default();
    group.bench_function("tanh_n512", |bch| {
        bch.iter(|| solve_nonlinear(&p.b, &p.kernel, &nl, &p.v0, &cfg).expect("nonlinear solve"))
    });
    group.finish();
}

criterion_group!(benches, linear, nonlinear);
criterion_main!(benches);
