//! Density of (age, memory) for the limit equation, marched along
//! characteristics.
//!
//! Mass is carried in cohorts. A cohort holds the individuals whose age lies
//! in one dt-wide interval and stores masses on a fixed grid of pre-decay
//! memories μ: a μ-cell sits at memory e^{−Λe}μ after elapsed decay time e.
//! Drift transport is therefore exact, and interpolation only happens when
//! jumped mass is re-binned into the cohort born at the end of each step.

mod export;
mod grid;
mod weak;

pub use export::{read_binary_dump, write_binary_dump, write_density_csv, BinaryHeader};
pub use grid::Grid;
pub use weak::{default_family, time_factor, TestFunction};

use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};
use crate::model::{validate_assumptions, BaselineCurve, InitLaw, ModelSpec};
use crate::xpath::XPath;

const CHUNK: usize = 64;
pub const LEAK_WARN: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct PdeOptions {
    /// Snapshot times; rounded to the nearest step.
    pub save_times: Vec<f64>,
    pub test_functions: Vec<TestFunction>,
    pub record_border: bool,
    /// Initial age tail beyond which mass is lumped into the oldest cohort.
    pub init_age_eps: f64,
    pub validation_samples: usize,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            save_times: Vec::new(),
            test_functions: Vec::new(),
            record_border: true,
            init_age_eps: 1e-12,
            validation_samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySolution {
    pub grid: Grid,
    /// Snapshots hold a memory density only (no age axis).
    pub memory_only: bool,
    pub times: Vec<f64>,
    /// Cell-average densities, age index slowest, memory last-dimension fastest.
    pub rho: Vec<Vec<f64>>,
    /// Mass of each snapshot lying beyond a_max.
    pub outside_mass: Vec<f64>,
    /// b_t on the memory grid at every step t_n = n·dt.
    pub border: Vec<Vec<f64>>,
    pub x: XPath,
    pub mass_trace: Vec<f64>,
    /// |∫b_t dm − ∫∫ f ρ_t| / ∫∫ f ρ_t per step.
    pub flux_balance: Vec<f64>,
    pub leaked_mass: f64,
    pub weak_residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DensitySolution {
    pub fn snapshot_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 0.5 * self.grid.dt)
            .ok_or(AlmError::NotSaved(t))
    }

    /// Total mass of a snapshot on the grid (cell sums).
    pub fn grid_mass(&self, idx: usize) -> f64 {
        let vol = self.grid.cell_volume_m() * if self.memory_only { 1.0 } else { self.grid.da() };
        crate::par::pairwise_sum(&self.rho[idx]) * vol
    }

    /// Age marginal density on the age cells.
    pub fn age_marginal(&self, idx: usize) -> Vec<f64> {
        let nm = self.grid.n_cells_m();
        let vol = self.grid.cell_volume_m();
        if self.memory_only {
            return Vec::new();
        }
        self.rho[idx].chunks(nm).map(|row| row.iter().sum::<f64>() * vol).collect()
    }

    /// Memory marginal density on the memory cells.
    pub fn memory_marginal(&self, idx: usize) -> Vec<f64> {
        if self.memory_only {
            return self.rho[idx].clone();
        }
        let nm = self.grid.n_cells_m();
        let da = self.grid.da();
        let mut out = vec![0.0; nm];
        for row in self.rho[idx].chunks(nm) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v * da;
            }
        }
        out
    }
}

/// Σ ρ · cell volume.
pub fn mass(rho: &[f64], grid: &Grid, memory_only: bool) -> f64 {
    let vol = grid.cell_volume_m() * if memory_only { 1.0 } else { grid.da() };
    crate::par::pairwise_sum(rho) * vol
}

#[derive(Clone, Debug)]
struct Cohort {
    birth: usize,
    /// Lower age edge at birth and age width, both in steps.
    age0: usize,
    width: usize,
    lo: Vec<usize>,
    hi: Vec<usize>,
    mass: Vec<f64>,
}

impl Cohort {
    fn from_masses(birth: usize, age0: usize, width: usize, mass: Vec<f64>, grid: &Grid) -> Self {
        let d = grid.n_m.len();
        let mut lo = grid.n_m.clone();
        let mut hi = vec![0; d];
        let mut idx = vec![0; d];
        for (flat, &w) in mass.iter().enumerate() {
            if w > 0.0 {
                grid.m_index(flat, &mut idx);
                for k in 0..d {
                    lo[k] = lo[k].min(idx[k]);
                    hi[k] = hi[k].max(idx[k] + 1);
                }
            }
        }
        if hi.iter().any(|&h| h == 0) {
            lo = vec![0; d];
            hi = vec![0; d];
        }
        Self { birth, age0, width, lo, hi, mass }
    }
}

/// Calls `f(flat, idx)` for every cell of the box [lo, hi).
#[inline]
fn for_box<F: FnMut(usize, &[usize])>(lo: &[usize], hi: &[usize], n_m: &[usize], mut f: F) {
    match lo.len() {
        1 => {
            for i in lo[0]..hi[0] {
                f(i, &[i]);
            }
        }
        _ => {
            for i in lo[0]..hi[0] {
                for j in lo[1]..hi[1] {
                    f(i * n_m[1] + j, &[i, j]);
                }
            }
        }
    }
}

/// Spreads the interval between `a` and `b` uniformly over the uniform grid
/// (lo, dm, n). Pushes (cell, fraction) pairs and returns the fraction
/// falling outside.
fn spread_1d(a: f64, b: f64, lo: f64, dm: f64, n: usize, out: &mut Vec<(usize, f64)>) -> f64 {
    out.clear();
    let (l, h) = if a <= b { (a, b) } else { (b, a) };
    let hi = lo + dm * n as f64;
    let w = h - l;
    if w <= 1e-13 * dm {
        let s = ((l - lo) / dm).floor();
        if s < 0.0 || s >= n as f64 {
            return 1.0;
        }
        out.push((s as usize, 1.0));
        return 0.0;
    }
    let outside = ((lo.min(h) - l).max(0.0) + (h - l.max(hi)).max(0.0)) / w;
    let inside = 1.0 - outside.min(1.0);
    if inside <= 0.0 {
        return 1.0;
    }
    let c0 = ((l.max(lo) - lo) / dm).floor().max(0.0) as usize;
    let c1 = (((h.min(hi) - lo) / dm).floor() as usize).min(n - 1);
    let mut acc = 0.0;
    for c in c0..=c1 {
        let left = lo + c as f64 * dm;
        let ov = (h.min(left + dm) - l.max(left)).max(0.0) / w;
        if ov > 0.0 {
            out.push((c, ov));
            acc += ov;
        }
    }
    match out.last_mut() {
        Some(last) => last.1 += inside - acc,
        None => out.push((c0.min(n - 1), inside)),
    }
    1.0 - inside
}

struct Ctx<'a> {
    spec: &'a ModelSpec,
    grid: &'a Grid,
    d: usize,
    dt: f64,
    n_cells: usize,
    mu_c: Vec<Vec<f64>>,
    mu_e: Vec<Vec<f64>>,
}

impl<'a> Ctx<'a> {
    fn new(spec: &'a ModelSpec, grid: &'a Grid) -> Self {
        let d = spec.d;
        let mu_c = (0..d).map(|k| (0..grid.n_m[k]).map(|i| grid.m_center(k, i)).collect()).collect();
        let mu_e = (0..d)
            .map(|k| (0..=grid.n_m[k]).map(|i| grid.m_lo[k] + i as f64 * grid.dm(k)).collect())
            .collect();
        Self { spec, grid, d, dt: grid.dt, n_cells: grid.n_cells_m(), mu_c, mu_e }
    }

    /// Deposits `w` spread over the image box Π [map_k(μ edges)] into `out`;
    /// returns the mass that left the grid.
    fn deposit<M: Fn(usize, f64) -> f64>(
        &self,
        idx: &[usize],
        w: f64,
        map: M,
        out: &mut [f64],
        scratch: &mut [Vec<(usize, f64)>; 2],
    ) -> f64 {
        let g = self.grid;
        let mut inside = 1.0;
        for k in 0..self.d {
            let a = map(k, self.mu_e[k][idx[k]]);
            let b = map(k, self.mu_e[k][idx[k] + 1]);
            inside *= 1.0 - spread_1d(a, b, g.m_lo[k], g.dm(k), g.n_m[k], &mut scratch[k]);
        }
        if self.d == 1 {
            for &(c, fr) in &scratch[0] {
                out[c] += w * fr;
            }
        } else {
            let n1 = g.n_m[1];
            for &(c0, f0) in &scratch[0] {
                for &(c1, f1) in &scratch[1] {
                    out[c0 * n1 + c1] += w * f0 * f1;
                }
            }
        }
        w * (1.0 - inside)
    }
}

struct PassA {
    q: f64,
    flux: f64,
    mass: f64,
    weak: Vec<f64>,
    g_total: Vec<f64>,
    border: Vec<f64>,
}

fn pass_a(ctx: &Ctx, cohorts: &[Cohort], n: usize, x: f64, phi: (f64, f64), tests: &[TestFunction], border: bool) -> PassA {
    let spec = ctx.spec;
    let d = ctx.d;
    let nt = tests.len();
    let mut out = PassA {
        q: 0.0,
        flux: 0.0,
        mass: 0.0,
        weak: vec![0.0; nt],
        g_total: vec![0.0; nt],
        border: if border { vec![0.0; ctx.n_cells] } else { Vec::new() },
    };
    let mut scratch = [Vec::new(), Vec::new()];
    let mut m = [0.0; 2];
    let mut grad = [0.0; 2];
    let mut reset = [0.0; 2];
    for c in cohorts {
        let e = (n - c.birth) as f64 * ctx.dt;
        let a = ((c.age0 + n - c.birth) as f64 + 0.5 * c.width as f64) * ctx.dt;
        let live: Vec<bool> = tests.iter().map(|tf| (a - tf.center_a).abs() < tf.width_a).collect();
        let dec: Vec<f64> = spec.lambda.iter().map(|l| (-l * e).exp()).collect();
        for_box(&c.lo, &c.hi, &ctx.grid.n_m, |flat, idx| {
            let w = c.mass[flat];
            if w == 0.0 {
                return;
            }
            for k in 0..d {
                m[k] = dec[k] * ctx.mu_c[k][idx[k]];
            }
            let m = &m[..d];
            let fv = spec.f(a, m, x);
            out.q += spec.interaction.modulation.value(&spec.psi, a, m) * fv * w;
            out.flux += fv * w;
            out.mass += w;
            if nt > 0 {
                for k in 0..d {
                    reset[k] = spec.jump.apply_component(k, m[k]);
                }
                for (j, tf) in tests.iter().enumerate() {
                    let chi0 = tf.value(0.0, &reset[..d]);
                    if !live[j] {
                        out.weak[j] += w * phi.0 * fv * chi0;
                        continue;
                    }
                    let (chi, da) = tf.eval(a, m, &mut grad[..d]);
                    let drift: f64 = (0..d).map(|k| spec.lambda[k] * m[k] * grad[k]).sum();
                    out.weak[j] += w * (phi.1 * chi + phi.0 * (da - drift + fv * (chi0 - chi)));
                    out.g_total[j] += w * phi.0 * chi;
                }
            }
            if border {
                ctx.deposit(
                    idx,
                    fv * w,
                    |k, mu| spec.jump.apply_component(k, dec[k] * mu),
                    &mut out.border,
                    &mut scratch,
                );
            }
        });
    }
    out
}

struct ChunkB<'c> {
    cohorts: &'c mut [Cohort],
    newborn: Vec<f64>,
    leak: f64,
}

fn pass_b(ctx: &Ctx, work: &mut ChunkB, n: usize, x_mid: f64) {
    let spec = ctx.spec;
    let d = ctx.d;
    let dt = ctx.dt;
    let half: Vec<f64> = spec.lambda.iter().map(|l| (-l * 0.5 * dt).exp()).collect();
    let mut scratch = [Vec::new(), Vec::new()];
    let mut m = [0.0; 2];
    let newborn = &mut work.newborn;
    let mut leak = 0.0;
    for c in work.cohorts.iter_mut() {
        let e_mid = (n - c.birth) as f64 * dt + 0.5 * dt;
        let a_mid = ((c.age0 + n - c.birth) as f64 + 0.5 * (c.width + 1) as f64) * dt;
        let dec: Vec<f64> = spec.lambda.iter().map(|l| (-l * e_mid).exp()).collect();
        let mass = &mut c.mass;
        for_box(&c.lo, &c.hi, &ctx.grid.n_m, |flat, idx| {
            let w = mass[flat];
            if w == 0.0 {
                return;
            }
            for k in 0..d {
                m[k] = dec[k] * ctx.mu_c[k][idx[k]];
            }
            let fv = spec.f(a_mid, &m[..d], x_mid);
            let jumped = -w * (-dt * fv).exp_m1();
            mass[flat] = w - jumped;
            leak += ctx.deposit(
                idx,
                jumped,
                |k, mu| half[k] * spec.jump.apply_component(k, dec[k] * mu),
                newborn,
                &mut scratch,
            );
        });
    }
    work.leak += leak;
}

fn initial_cohorts(init: &InitLaw, grid: &Grid, memory_only: bool, eps: f64) -> (Vec<Cohort>, f64) {
    let d = grid.n_m.len();
    let width = if memory_only { 1 } else { grid.age_ratio() };
    let da = width as f64 * grid.dt;
    let n_age = if memory_only { 1 } else { ((init.age_upper(eps) / da).ceil() as usize).max(1) };
    let mut idx = vec![0; d];
    let cell_box = |flat: usize, idx: &mut Vec<usize>| -> (Vec<f64>, Vec<f64>) {
        grid.m_index(flat, idx);
        let lo = (0..d).map(|k| grid.m_lo[k] + idx[k] as f64 * grid.dm(k)).collect();
        let hi = (0..d).map(|k| grid.m_lo[k] + (idx[k] + 1) as f64 * grid.dm(k)).collect();
        (lo, hi)
    };
    let mut cohorts = Vec::with_capacity(n_age);
    let mut total = 0.0;
    match init {
        InitLaw::Product { age, .. } => {
            let m_mass: Vec<f64> = (0..grid.n_cells_m())
                .map(|flat| {
                    let (lo, hi) = cell_box(flat, &mut idx);
                    init.box_mass(0.0, f64::INFINITY, &lo, &hi)
                })
                .collect();
            for i in 0..n_age {
                let hi = if i + 1 == n_age { f64::INFINITY } else { (i + 1) as f64 * da };
                let pa = if memory_only { 1.0 } else { (age.cdf(hi) - age.cdf(i as f64 * da)).max(0.0) };
                let mass: Vec<f64> = m_mass.iter().map(|v| v * pa).collect();
                total += mass.iter().sum::<f64>();
                cohorts.push(Cohort::from_masses(0, i * width, width, mass, grid));
            }
        }
        InitLaw::Tabulated { .. } => {
            for i in 0..n_age {
                let (a_lo, a_hi) = if memory_only {
                    (0.0, f64::INFINITY)
                } else {
                    (i as f64 * da, if i + 1 == n_age { f64::INFINITY } else { (i + 1) as f64 * da })
                };
                let mass: Vec<f64> = (0..grid.n_cells_m())
                    .map(|flat| {
                        let (lo, hi) = cell_box(flat, &mut idx);
                        init.box_mass(a_lo, a_hi, &lo, &hi)
                    })
                    .collect();
                total += mass.iter().sum::<f64>();
                cohorts.push(Cohort::from_masses(0, i * width, width, mass, grid));
            }
        }
    }
    cohorts.retain(|c| c.hi.iter().all(|&h| h > 0));
    (cohorts, total)
}

fn snapshot(ctx: &Ctx, cohorts: &[Cohort], n: usize, memory_only: bool) -> (Vec<f64>, f64) {
    let g = ctx.grid;
    let spec = ctx.spec;
    let nm = ctx.n_cells;
    let rows = if memory_only { 1 } else { g.n_a };
    let ratio = g.age_ratio();
    let mut rho = vec![0.0; rows * nm];
    let mut outside = 0.0;
    let mut scratch = [Vec::new(), Vec::new()];
    for c in cohorts {
        let e = (n - c.birth) as f64 * ctx.dt;
        let dec: Vec<f64> = spec.lambda.iter().map(|l| (-l * e).exp()).collect();
        let lo = c.age0 + n - c.birth;
        // a cohort wider than one step may straddle two output cells
        let pieces: Vec<(usize, f64)> = if memory_only {
            vec![(0, 1.0)]
        } else {
            let first = lo / ratio;
            let in_first = ((first + 1) * ratio).min(lo + c.width) - lo;
            let mut v = vec![(first, in_first as f64 / c.width as f64)];
            if in_first < c.width {
                v.push((first + 1, (c.width - in_first) as f64 / c.width as f64));
            }
            v
        };
        for (row, share) in pieces {
            if row >= rows {
                outside += share * c.mass.iter().sum::<f64>();
                continue;
            }
            let slot = &mut rho[row * nm..(row + 1) * nm];
            for_box(&c.lo, &c.hi, &g.n_m, |flat, idx| {
                let w = share * c.mass[flat];
                if w > 0.0 {
                    outside += ctx.deposit(idx, w, |k, mu| dec[k] * mu, slot, &mut scratch);
                }
            });
        }
    }
    let vol = g.cell_volume_m() * if memory_only { 1.0 } else { g.da() };
    rho.iter_mut().for_each(|v| *v /= vol);
    (rho, outside)
}

fn march(
    spec: &ModelSpec,
    grid: &Grid,
    hbar: &BaselineCurve,
    opts: &PdeOptions,
    memory_only: bool,
) -> Result<DensitySolution> {
    spec.check()?;
    grid.check(spec.d)?;
    let report = validate_assumptions(spec, opts.validation_samples, 0);
    if !report.passed {
        return Err(AlmError::Validation(report.failures().join("; ")));
    }
    let ctx = Ctx::new(spec, grid);
    let dt = grid.dt;
    let n_steps = grid.n_steps();
    let t_end = n_steps as f64 * dt;
    let mut save_steps: Vec<usize> = opts.save_times.iter().map(|&s| (s / dt).round() as usize).collect();
    if save_steps.iter().any(|&s| s > n_steps) {
        return Err(AlmError::Config("save time beyond T".into()));
    }
    save_steps.sort_unstable();
    save_steps.dedup();

    let (mut cohorts, init_mass) = initial_cohorts(&spec.init_law, grid, memory_only, opts.init_age_eps);
    let mut warnings = Vec::new();
    let mut leaked = 1.0 - init_mass;
    if leaked > LEAK_WARN {
        warnings.push(format!("initial mass outside the memory box: {leaked:.3e}"));
    }
    let kern: Vec<f64> = (0..=n_steps).map(|i| spec.interaction.kernel.value(i as f64 * dt)).collect();
    let interacting = !spec.interaction.is_zero();
    let tests = &opts.test_functions;
    let nt = tests.len();

    let mut xs = Vec::with_capacity(n_steps + 1);
    xs.push(hbar.eval(0.0));
    let mut qs = Vec::with_capacity(n_steps + 1);
    let mut mass_trace = Vec::with_capacity(n_steps + 1);
    let mut flux_balance = Vec::with_capacity(n_steps + 1);
    let mut border = Vec::new();
    let mut weak_int: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    let mut g_first = vec![0.0; nt];
    let mut g_last = vec![0.0; nt];
    let mut rho = Vec::new();
    let mut outside = Vec::new();
    let mut times = Vec::new();
    let mut next_save = 0;

    for n in 0..=n_steps {
        let t = n as f64 * dt;
        while next_save < save_steps.len() && save_steps[next_save] == n {
            let (r, o) = snapshot(&ctx, &cohorts, n, memory_only);
            rho.push(r);
            outside.push(o);
            times.push(t);
            next_save += 1;
        }
        let phi = time_factor(t, t_end);
        let parts = crate::par::map_range(cohorts.len().div_ceil(CHUNK), |c| {
            let hi = ((c + 1) * CHUNK).min(cohorts.len());
            pass_a(&ctx, &cohorts[c * CHUNK..hi], n, xs[n], phi, tests, opts.record_border)
        });
        let q = crate::par::pairwise_sum(&parts.iter().map(|p| p.q).collect::<Vec<_>>());
        let flux = crate::par::pairwise_sum(&parts.iter().map(|p| p.flux).collect::<Vec<_>>());
        mass_trace.push(crate::par::pairwise_sum(&parts.iter().map(|p| p.mass).collect::<Vec<_>>()));
        let w: Vec<f64> = (0..nt)
            .map(|j| crate::par::pairwise_sum(&parts.iter().map(|p| p.weak[j]).collect::<Vec<_>>()))
            .collect();
        weak_int.push(w);
        let gt: Vec<f64> = (0..nt)
            .map(|j| crate::par::pairwise_sum(&parts.iter().map(|p| p.g_total[j]).collect::<Vec<_>>()))
            .collect();
        if n == 0 {
            g_first = gt.clone();
        }
        if n == n_steps {
            g_last = gt;
        }
        if opts.record_border {
            let b = crate::par::pairwise_sum_vecs(&parts.into_iter().map(|p| p.border).collect::<Vec<_>>());
            let total = crate::par::pairwise_sum(&b);
            flux_balance.push(if flux > 0.0 { (total - flux).abs() / flux } else { 0.0 });
            let vol = grid.cell_volume_m();
            border.push(b.into_iter().map(|v| v / vol).collect());
        }
        qs.push(q);
        if n == n_steps {
            break;
        }

        let x_next = hbar.eval(t + dt)
            + if interacting { dt * (0..=n).map(|l| kern[n + 1 - l] * qs[l]).sum::<f64>() } else { 0.0 };
        let x_mid = 0.5 * (xs[n] + x_next);
        xs.push(x_next);

        let mut works: Vec<ChunkB> = cohorts
            .chunks_mut(CHUNK)
            .map(|c| ChunkB { cohorts: c, newborn: vec![0.0; ctx.n_cells], leak: 0.0 })
            .collect();
        crate::par::for_each_mut(&mut works, |_, wk| pass_b(&ctx, wk, n, x_mid));
        let step_leak = crate::par::pairwise_sum(&works.iter().map(|w| w.leak).collect::<Vec<_>>());
        let newborn = crate::par::pairwise_sum_vecs(&works.into_iter().map(|w| w.newborn).collect::<Vec<_>>());
        leaked += step_leak;
        let born = Cohort::from_masses(n + 1, 0, 1, newborn, grid);
        if born.hi.iter().all(|&h| h > 0) {
            cohorts.push(born);
        }
    }

    let bound = hbar.sup_abs() + t_end * spec.interaction.sup() * spec.f_max();
    if let Some(v) = xs.iter().find(|v| v.abs() > bound * (1.0 + 1e-9) + 1e-12) {
        return Err(AlmError::Numerical(format!("x value {v} exceeds its a-priori bound {bound}")));
    }
    if leaked > LEAK_WARN {
        warnings.push(format!("mass leaked through the memory box: {leaked:.3e}"));
    }
    if let Some(o) = outside.iter().cloned().reduce(f64::max).filter(|&o| o > LEAK_WARN) {
        warnings.push(format!("snapshot mass beyond a_max: {o:.3e}"));
    }
    let weak_residuals = (0..nt)
        .map(|j| {
            let vals: Vec<f64> = weak_int.iter().map(|w| w[j]).collect();
            let inner = crate::par::pairwise_sum(&vals[1..n_steps]);
            let integral = dt * (inner + 0.5 * (vals[0] + vals[n_steps]));
            (g_last[j] - g_first[j] - integral).abs()
        })
        .collect();

    Ok(DensitySolution {
        grid: grid.clone(),
        memory_only,
        times,
        rho,
        outside_mass: outside,
        border,
        x: XPath::new(dt, xs)?,
        mass_trace,
        flux_balance,
        leaked_mass: leaked,
        weak_residuals,
        warnings,
    })
}

/// Density of the age-and-memory limit equation on `grid`.
pub fn solve_alm_pde(spec: &ModelSpec, grid: &Grid, hbar: &BaselineCurve, opts: &PdeOptions) -> Result<DensitySolution> {
    march(spec, grid, hbar, opts, false)
}

/// Memory-only density for specs whose rate and interaction ignore age.
pub fn solve_lm_pde(spec: &ModelSpec, grid: &Grid, hbar: &BaselineCurve, opts: &PdeOptions) -> Result<DensitySolution> {
    if !spec.age_independent() {
        return Err(AlmError::Config("memory-only solver needs age-independent rate and interaction".into()));
    }
    march(spec, grid, hbar, opts, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, IntensitySpec, InteractionSpec, Law1d};

    fn constant_rate_spec(rate: f64) -> ModelSpec {
        let mut s = presets::adaptation_1d();
        s.intensity = IntensitySpec::constant(rate);
        s.interaction = InteractionSpec::zero();
        s
    }

    #[test]
    fn spread_conserves_fractions() {
        let mut out = Vec::new();
        let leak = spread_1d(0.13, 0.47, 0.0, 0.1, 10, &mut out);
        assert_eq!(leak, 0.0);
        assert!((out.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-15);
        let leak = spread_1d(-0.1, 0.1, 0.0, 0.1, 10, &mut out);
        assert!((leak - 0.5).abs() < 1e-15);
        assert!((out.iter().map(|p| p.1).sum::<f64>() - 0.5).abs() < 1e-15);
        assert_eq!(spread_1d(2.0, 3.0, 0.0, 0.1, 10, &mut out), 1.0);
    }

    #[test]
    fn pure_transport_keeps_mass() {
        let mut spec = constant_rate_spec(1.0);
        spec.intensity = IntensitySpec::constant(1e-6);
        spec.jump = crate::model::JumpSpec::translation(vec![0.0]);
        let grid = Grid::for_spec(&spec, 1.0, 0.01, 0.02);
        let sol = solve_alm_pde(&spec, &grid, &spec.h_bar(), &PdeOptions { save_times: vec![1.0], ..Default::default() })
            .unwrap();
        assert!((sol.mass_trace[0] - sol.mass_trace[sol.mass_trace.len() - 1]).abs() < 1e-12);
    }

    #[test]
    fn constant_rate_age_marginal_is_exponential_below_t() {
        let spec = constant_rate_spec(1.0);
        let grid = Grid::for_spec(&spec, 2.0, 0.01, 0.05);
        let opts = PdeOptions { save_times: vec![2.0], ..Default::default() };
        let sol = solve_alm_pde(&spec, &grid, &spec.h_bar(), &opts).unwrap();
        let marg = sol.age_marginal(0);
        // initial ages are Exp(1) and the rate is 1, so the marginal stays e^{−a}
        let da = grid.da();
        let err: f64 = marg.iter().enumerate().map(|(i, v)| {
            let (a0, a1) = (i as f64 * da, (i + 1) as f64 * da);
            (v - ((-a0).exp() - (-a1).exp()) / da).abs() * da
        }).sum();
        assert!(err < 2e-2, "{err}");
        assert!((sol.mass_trace.last().unwrap() - 1.0).abs() < 1e-6, "{} {}", sol.mass_trace.last().unwrap(), sol.leaked_mass);
        assert!(sol.flux_balance.iter().all(|r| *r < 1e-3));
    }

    #[test]
    fn lm_identity_jump_is_pure_decay() {
        let mut spec = constant_rate_spec(1.0);
        spec.jump = crate::model::JumpSpec::translation(vec![0.0]);
        let grid = Grid::for_spec(&spec, 1.0, 0.01, 0.02);
        let sol = solve_lm_pde(&spec, &grid, &spec.h_bar(), &PdeOptions { save_times: vec![1.0], ..Default::default() })
            .unwrap();
        let law = Law1d::TruncatedGaussian { mean: 0.0, sd: 0.3, lo: -1.0, hi: 1.0 };
        let e = (1.0f64).exp();
        let dm = grid.dm(0);
        let err: f64 = sol.rho[0]
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let m = grid.m_center(0, i);
                let exact = e * law.pdf(e * m);
                (v - exact).abs() * dm
            })
            .sum();
        assert!(err < 5e-2, "{err}");
    }

    #[test]
    fn no_interaction_signal_is_baseline() {
        let spec = {
            let mut s = presets::stp();
            s.interaction = InteractionSpec::zero();
            s
        };
        let grid = Grid::for_spec(&spec, 0.5, 0.01, 0.05);
        let hb = spec.h_bar();
        let sol = solve_alm_pde(&spec, &grid, &hb, &PdeOptions::default()).unwrap();
        assert!(sol.x.times().zip(&sol.x.values).all(|(t, v)| (v - hb.eval(t)).abs() < 1e-15));
    }
}
