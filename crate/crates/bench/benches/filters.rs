use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rbgnss::filters::kalman;
use rbgnss::obs::particle_likelihood;
use rbgnss::{conventional_pf_step, rbpf_step};
use rbgnss_bench::{cloud, urban, urban_filter};

fn likelihood(c: &mut Criterion) {
    let sc = urban();
    let cfg = urban_filter(1);
    let base = sc.base();
    let pos = sc.truth.epochs[10].position;
    c.bench_function("particle_likelihood", |b| {
        b.iter(|| particle_likelihood(&sc.epochs[10], &pos, &base, &cfg).unwrap())
    });
}

fn kalman_updates(c: &mut Criterion) {
    let p = Matrix3::new(1.0, 0.1, 0.0, 0.1, 2.0, 0.2, 0.0, 0.2, 0.5);
    let q = Matrix3::identity() * 0.01;
    let v = Vector3::new(1.0, -1.0, 0.2);
    c.bench_function("kf_time_update", |b| {
        b.iter(|| kalman::time_update(&v, &p, &Vector3::new(1.1, -0.9, 0.2), 1.0, &q, &q).unwrap())
    });
    let cm = DMatrix::from_fn(10, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin());
    let r = DMatrix::identity(10, 10) * 0.01;
    let y = DVector::from_fn(10, |i, _| (i as f64).cos() * 0.01);
    c.bench_function("kf_measurement_update_10_rows", |b| {
        b.iter(|| kalman::measurement_update(&v, &p, &cm, &r, &y).unwrap())
    });
}

fn steps(c: &mut Criterion) {
    let sc = urban();
    let base = sc.base();
    let mut group = c.benchmark_group("filter_step");
    group.sample_size(10);
    for n in [500, 2000] {
        let cfg = urban_filter(n);
        let noise = cfg.noise_model(1.0);
        // Second epoch, so prediction and the time update run too.
        let mut primed = cloud(&sc, &cfg, 0);
        rbpf_step(&mut primed, &sc.epochs[0], &base, &noise, &cfg).unwrap();
        group.bench_with_input(BenchmarkId::new("rbpf", n), &n, |b, _| {
            b.iter_batched(
                || primed.clone(),
                |mut set| rbpf_step(&mut set, &sc.epochs[1], &base, &noise, &cfg).unwrap(),
                BatchSize::LargeInput,
            )
        });
        group.bench_with_input(BenchmarkId::new("conventional_pf", n), &n, |b, _| {
            b.iter_batched(
                || primed.clone(),
                |mut set| conventional_pf_step(&mut set, &sc.epochs[1], &base, &noise, &cfg).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, likelihood, kalman_updates, steps);
criterion_main!(benches);
