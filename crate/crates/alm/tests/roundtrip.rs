use alm_hawkes::metrics::{ConvergenceRow, ConvergenceTable};
use alm_hawkes::model::{presets, MemoryCoordinates};
use alm_hawkes::particle_sim::{read_events_csv, simulate_network, write_events_csv, write_snapshots_csv};
use alm_hawkes::pde_solver::{read_binary_dump, solve_alm_pde, write_binary_dump, write_density_csv, Grid, PdeOptions};
use alm_hawkes::xpath::XPath;

fn parse_rows(path: &std::path::Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn event_log_round_trips_in_user_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    for spec in [presets::adaptation_1d(), presets::stp()] {
        let rec = simulate_network(&spec, 30, 2.0, 4, &[1.0, 2.0]).unwrap();
        let p = dir.path().join("events.csv");
        write_events_csv(&p, &rec.events, spec.d, spec.coordinates).unwrap();
        let back = read_events_csv(&p, spec.coordinates).unwrap();
        assert_eq!(back.len(), rec.events.len());
        for (b, e) in back.iter().zip(&rec.events) {
            assert_eq!((b.time, b.neuron, b.age_before), (e.time, e.neuron, e.age_before));
            match spec.coordinates {
                MemoryCoordinates::Native => assert_eq!(b.memory_before, e.memory_before),
                // 1 − (1 − m) can differ from m in the last bits
                MemoryCoordinates::Reflected => {
                    assert!(b.memory_before.iter().zip(&e.memory_before).all(|(x, y)| (x - y).abs() <= 4.0 * f64::EPSILON))
                }
            }
        }
    }
}

#[test]
fn snapshot_csv_matches_record() {
    let dir = tempfile::tempdir().unwrap();
    let spec = presets::stp();
    let rec = simulate_network(&spec, 12, 1.0, 9, &[0.5, 1.0]).unwrap();
    let p = dir.path().join("snap.csv");
    write_snapshots_csv(&p, &rec, spec.d, spec.coordinates).unwrap();
    let (header, rows) = parse_rows(&p);
    assert_eq!(header, ["t", "neuron", "age", "m1", "x"]);
    assert_eq!(rows.len(), 24);
    for (i, row) in rows.iter().enumerate() {
        let s = &rec.snapshots[i / 12];
        let j = i % 12;
        assert_eq!(row[0], s.t);
        assert_eq!(row[2], s.ages[j]);
        assert!((MemoryCoordinates::Reflected.from_user(row[3]) - s.memories[j][0]).abs() <= 4.0 * f64::EPSILON);
        assert_eq!(row[4], s.x);
    }
}

#[test]
fn x_path_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let x = XPath::from_fn(1.0, 0.01, |t| (3.0 * t).sin() / 7.0);
    let p = dir.path().join("x.csv");
    x.write_csv(&p).unwrap();
    assert_eq!(XPath::read_csv(&p).unwrap(), x);
}

#[test]
fn density_csv_and_binary_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = presets::adaptation_1d();
    let grid = Grid::for_spec(&spec, 0.5, 0.01, 0.1);
    let sol = solve_alm_pde(&spec, &grid, &spec.h_bar(), &PdeOptions { save_times: vec![0.25, 0.5], ..Default::default() }).unwrap();
    let p = dir.path().join("rho.csv");
    write_density_csv(&p, &sol, spec.coordinates).unwrap();
    let (header, rows) = parse_rows(&p);
    assert_eq!(header, ["t", "a", "m1", "rho"]);
    let flat: Vec<f64> = sol.rho.iter().flatten().copied().collect();
    assert_eq!(rows.len(), flat.len());
    assert!(rows.iter().zip(&flat).all(|(r, v)| r[3] == *v));
    let b = dir.path().join("rho.bin");
    write_binary_dump(&b, &sol).unwrap();
    let (h, vals) = read_binary_dump(&b).unwrap();
    assert_eq!(h.times, sol.times);
    assert_eq!(vals, flat);
}

#[test]
fn convergence_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        ConvergenceRow { n: 100, replicate: 0, t: 1.0, w1: 0.1 / 3.0 },
        ConvergenceRow { n: 400, replicate: 1, t: 1.0, w1: std::f64::consts::PI * 1e-3 },
    ];
    let table = ConvergenceTable { rows: rows.clone(), means: vec![], fit: None, trend: None };
    let p = dir.path().join("c.csv");
    table.write_csv(&p).unwrap();
    assert_eq!(ConvergenceTable::read_csv(&p).unwrap(), rows);
}
