use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scn_core::clustering::{build_adjacency, distance_similarity, laplacian, spectral_cluster};
use scn_core::eigen::symmetric_eigen;
use scn_core::sim::World;
use scn_core::{LaplacianKind, Mode, Position, ScenarioConfig};

fn positions(n: usize, seed: u64) -> Vec<Position> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Position::new(rng.random_range(0.0..700.0), rng.random_range(0.0..700.0)))
        .collect()
}

fn spectral(c: &mut Criterion) {
    let mut eig = c.benchmark_group("symmetric_eigen");
    for n in [10, 20, 40] {
        let pos = positions(n, 1);
        let s = distance_similarity(&pos, &build_adjacency(&pos, 250.0), 300.0);
        let l = laplacian(&s, LaplacianKind::Standard);
        eig.bench_with_input(BenchmarkId::from_parameter(n), &l, |b, l| {
            b.iter(|| symmetric_eigen(black_box(l)).unwrap())
        });
    }
    eig.finish();

    let mut sc = c.benchmark_group("spectral_cluster");
    for n in [10, 20, 40] {
        let pos = positions(n, 2);
        let s = distance_similarity(&pos, &build_adjacency(&pos, 250.0), 300.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        sc.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| spectral_cluster(black_box(s), None, LaplacianKind::Standard, &mut rng).unwrap())
        });
    }
    sc.finish();
}

fn world_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("world_step");
    for ues in [20, 65] {
        let mut cfg = ScenarioConfig::default();
        cfg.layout.ues = ues;
        for mode in Mode::ALL {
            let mut world = World::new(&cfg, mode, 1).unwrap();
            group.bench_function(BenchmarkId::new(mode.as_str(), ues), |b| {
                b.iter(|| world.step().unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, spectral, world_step);
criterion_main!(benches);
