use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diffext::analysis::spline_interpolate_sinogram;
use diffext::tomo::{default_detector_count, fbp, radon_forward, shepp_logan, uniform_angles};
use std::hint::black_box;

fn bench_tomography(c: &mut Criterion) {
    let d = 128;
    let nb = default_detector_count(d);
    let phantom = shepp_logan(d).unwrap();
    let mut group = c.benchmark_group("tomography");
    group.sample_size(10);
    for na in [50, 360] {
        let angles = uniform_angles(na);
        group.bench_with_input(BenchmarkId::new("radon", na), &na, |b, _| {
            b.iter(|| radon_forward(black_box(&phantom), &angles, nb).unwrap())
        });
        let sino = radon_forward(&phantom, &angles, nb).unwrap();
        group.bench_with_input(BenchmarkId::new("fbp", na), &na, |b, _| {
            b.iter(|| fbp(black_box(&sino), d).unwrap())
        });
    }
    let train = radon_forward(&phantom, &uniform_angles(50), nb).unwrap();
    let queries: Vec<f64> = (0..1000).map(|i| i as f64 * 0.18).collect();
    group.bench_function("spline/50 to 1000", |b| {
        b.iter(|| spline_interpolate_sinogram(black_box(&train), &queries).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_tomography);
criterion_main!(benches);
