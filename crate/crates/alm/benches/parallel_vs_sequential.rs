use std::hint::black_box;

use alm_hawkes::limit_sde::solve_x_picard;
use alm_hawkes::metrics::{transformed_points, SlicedReference};
use alm_hawkes::model::presets;
use alm_hawkes::par::with_threads;
use alm_hawkes::particle_sim::{empirical_measure, SimOptions, Simulator};
use alm_hawkes::pde_solver::{solve_alm_pde, Grid, PdeOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

/// 0 keeps the global pool; 1 forces a single worker.
const MODES: [(&str, usize); 2] = [("parallel", 0), ("sequential", 1)];

fn replicas(c: &mut Criterion) {
    let spec = presets::adaptation_1d();
    let sim = Simulator::new(&spec, SimOptions { record_events: false, ..Default::default() }).unwrap();
    let mut g = c.benchmark_group("replicas_n200_x16");
    for (name, threads) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_threads(threads, || black_box(sim.run_replicas(200, 2.0, 1, 16, &[2.0]).unwrap())))
        });
    }
    g.finish();
}

fn picard(c: &mut Criterion) {
    let spec = presets::adaptation_1d();
    let mut g = c.benchmark_group("picard_2000_particles");
    g.sample_size(10);
    for (name, threads) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_threads(threads, || black_box(solve_x_picard(&spec, 1.0, 0.01, 2000, 3, 1e-6, 10).unwrap())))
        });
    }
    g.finish();
}

fn pde(c: &mut Criterion) {
    let spec = presets::stp();
    let grid = Grid::for_spec(&spec, 1.0, 0.01, 0.02);
    let opts = PdeOptions { save_times: vec![1.0], ..Default::default() };
    let mut g = c.benchmark_group("pde_stp_t1");
    g.sample_size(10);
    for (name, threads) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_threads(threads, || black_box(solve_alm_pde(&spec, &grid, &spec.h_bar(), &opts).unwrap())))
        });
    }
    g.finish();
}

fn sliced_distance(c: &mut Criterion) {
    let spec = presets::adaptation_1d();
    let grid = Grid::for_spec(&spec, 1.0, 0.01, 0.05);
    let sol = solve_alm_pde(&spec, &grid, &spec.h_bar(), &PdeOptions { save_times: vec![1.0], ..Default::default() }).unwrap();
    let sref = SlicedReference::new(&spec.psi, &grid, &sol.rho[0], 64, 0).unwrap();
    let rec = Simulator::new(&spec, SimOptions::default()).unwrap().run(2000, 1.0, 5, &[1.0]).unwrap();
    let pts = transformed_points(&spec.psi, &empirical_measure(&rec, 1.0).unwrap());
    let mut g = c.benchmark_group("sliced_w1_2000_points");
    for (name, threads) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_threads(threads, || black_box(sref.distance(&pts).unwrap())))
        });
    }
    g.finish();
}

criterion_group!(benches, replicas, picard, pde, sliced_distance);
criterion_main!(benches);
