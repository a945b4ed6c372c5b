use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use magshell::par;
use magshell::rabinowitz::{default_seeds, find_critical};
use magshell::stability::{build_profiles, verify_stabilizing};
use magshell::MagneticSystem;

fn stability_grid(c: &mut Criterion) {
    let sys = MagneticSystem::psl2();
    let ks: Vec<f64> = (1..=16).map(|i| 0.03 * i as f64).filter(|k| (k - 0.24f64).abs() > 1e-9).collect();
    let run = |k: &f64| build_profiles(&sys, *k).map(|r| verify_stabilizing(&r, 2000).passed).unwrap_or(false);
    let mut g = c.benchmark_group("stability_grid");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| black_box(par::map_seq(&ks, run))));
    #[cfg(feature = "parallel")]
    g.bench_function("rayon", |b| b.iter(|| black_box(par::map_par(&ks, run))));
    g.finish();
}

fn rabinowitz_seeds(c: &mut Criterion) {
    let sys = MagneticSystem::heisenberg();
    let seeds = default_seeds(&sys, 0.375, 64, 8).expect("seeds");
    let run = |s: &_| find_critical(s, &sys, 1e-10).map(|r| r.action).ok();
    let mut g = c.benchmark_group("rabinowitz_seeds");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| black_box(par::map_seq(&seeds, run))));
    #[cfg(feature = "parallel")]
    g.bench_function("rayon", |b| b.iter(|| black_box(par::map_par(&seeds, run))));
    g.finish();
}

criterion_group!(benches, stability_grid, rabinowitz_seeds);
criterion_main!(benches);
