use alm_hawkes::limit_sde::solve_x_picard;
use alm_hawkes::metrics::{convergence_study, coupling_decay_study};
use alm_hawkes::model::presets;
use alm_hawkes::par::with_threads;
use alm_hawkes::particle_sim::{SimOptions, Simulator};
use alm_hawkes::pde_solver::{default_family, solve_alm_pde, Grid, PdeOptions};

fn both<T: PartialEq + std::fmt::Debug + Send, F: Fn() -> T + Send + Sync>(f: F) -> T {
    let one = with_threads(1, &f);
    let eight = with_threads(8, &f);
    assert_eq!(one, eight);
    one
}

#[test]
fn replicas_do_not_depend_on_thread_count() {
    let spec = presets::adaptation_1d();
    let sim = Simulator::new(&spec, SimOptions::default()).unwrap();
    let recs = both(|| sim.run_replicas(50, 2.0, 17, 12, &[1.0, 2.0]).unwrap());
    assert_eq!(recs, sim.run_replicas(50, 2.0, 17, 12, &[1.0, 2.0]).unwrap());
}

#[test]
fn picard_does_not_depend_on_thread_count() {
    let spec = presets::adaptation_1d();
    both(|| solve_x_picard(&spec, 1.0, 0.01, 3000, 5, 1e-6, 20).unwrap());
}

#[test]
fn pde_does_not_depend_on_thread_count() {
    let spec = presets::stp();
    let grid = Grid::for_spec(&spec, 1.0, 0.01, 0.05);
    let opts = PdeOptions { save_times: vec![0.5, 1.0], test_functions: default_family(&spec), ..Default::default() };
    both(|| solve_alm_pde(&spec, &grid, &spec.h_bar(), &opts).unwrap());
}

#[test]
fn studies_do_not_depend_on_thread_count() {
    let spec = presets::adaptation_1d();
    let grid = Grid::for_spec(&spec, 1.0, 0.01, 0.05);
    let sol = solve_alm_pde(&spec, &grid, &spec.h_bar(), &PdeOptions { save_times: vec![1.0], ..Default::default() }).unwrap();
    both(|| convergence_study(&spec, &[20, 80], 1.0, 3, 2, &sol, 16).unwrap());
    both(|| coupling_decay_study(&spec, &[20, 80], 1.0, &sol.x, 3, 2).unwrap());
}
