use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spacelab::{div_s, solve};
use spacelab_bench::{maximal_problem, quadratic_field, wavy_torus};

fn immersion(c: &mut Criterion) {
    let mut group = c.benchmark_group("immersion");
    for n in [32, 64] {
        group.bench_with_input(BenchmarkId::new("build_and_classify", n), &n, |b, &n| {
            b.iter(|| wavy_torus(n).mean_curvature_vector(None).expect("classifies"))
        });
    }
    group.finish();
}

fn divergence(c: &mut Criterion) {
    let s = wavy_torus(64);
    let x = quadratic_field();
    c.bench_function("div_s/64", |b| b.iter(|| div_s(&s, &x).expect("evaluates")));
}

fn solver(c: &mut Criterion) {
    let spec = maximal_problem(32);
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("maximal_torus/32", |b| b.iter(|| solve(&spec).expect("solves")));
    group.finish();
}

criterion_group!(benches, immersion, divergence, solver);
criterion_main!(benches);
