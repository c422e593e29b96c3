use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lsvd_core::linalg::{matmul, svd_thin, DenseMatrix, DEFAULT_MAX_SWEEPS, DEFAULT_SVD_TOL};
use lsvd_core::tomo::{assemble_radon, TomoGeometry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn svd(c: &mut Criterion) {
    let small = random(64, 48, 1);
    c.bench_function("svd 64x48", |b| {
        b.iter(|| svd_thin(black_box(&small), DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap())
    });
    let radon = assemble_radon(&TomoGeometry::new(16, 16, 16)).unwrap().matrix;
    let mut g = c.benchmark_group("svd radon");
    g.sample_size(10);
    g.bench_function("16x16 image, 16 angles", |b| {
        b.iter(|| svd_thin(black_box(&radon), DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap())
    });
    g.finish();
}

fn gemm(c: &mut Criterion) {
    let a = random(256, 256, 2);
    let b = random(256, 256, 3);
    c.bench_function("matmul 256", |bench| bench.iter(|| matmul(black_box(&a), black_box(&b)).unwrap()));
}

fn radon(c: &mut Criterion) {
    let geometry = TomoGeometry::new(32, 32, 32);
    c.bench_function("radon assembly 32x32, 32 angles", |b| {
        b.iter(|| assemble_radon(black_box(&geometry)).unwrap())
    });
}

criterion_group!(benches, svd, gemm, radon);
criterion_main!(benches);
