//! Density of the limit process written as a sum over the number of jumps
//! in [0, t]. Each term pushes the initial law forward through the
//! jump-time coordinates φᵏ and weighs it by the sub-probability density νᵏ
//! of seeing exactly those jumps. Used as an oracle for the grid solver.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::error::{AlmError, Result};
use crate::model::ModelSpec;
use crate::pde_solver::Grid;
use crate::quad::{adaptive_simpson, GaussLegendre};
use crate::rng::{self, label};
use crate::xpath::{fmt_f64, XPath};

pub const SURVIVAL_TOL: f64 = 1e-8;

/// Ordered jump times 0 < t₁ < … < t_k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpTimes {
    times: Vec<f64>,
}

impl JumpTimes {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.first().is_some_and(|&t| !(t > 0.0)) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AlmError::Domain(format!("jump times must be positive and increasing: {times:?}")));
        }
        Ok(Self { times })
    }

    pub fn empty() -> Self {
        Self { times: Vec::new() }
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn last(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn with(&self, t: f64) -> Result<Self> {
        let mut v = self.times.clone();
        v.push(t);
        Self::new(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SimplexQuadrature {
    GaussLegendre { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathIntegralConfig {
    pub k_max: usize,
    /// Rule for simplex dimensions up to `max_tensor_dim`.
    pub order: usize,
    pub max_tensor_dim: usize,
    /// Stratified Monte Carlo beyond `max_tensor_dim`.
    pub mc_samples: usize,
    pub seed: u64,
    pub tail_epsilon: f64,
}

impl PathIntegralConfig {
    pub fn new(k_max: usize, tail_epsilon: f64) -> Self {
        Self { k_max, order: 16, max_tensor_dim: 3, mc_samples: 20_000, seed: 0, tail_epsilon }
    }

    /// K_max from the Poisson(f_max·t) tail.
    pub fn for_horizon(spec: &ModelSpec, t: f64, tail_epsilon: f64) -> Self {
        Self::new(jump_count_tail(t, spec.f_max(), tail_epsilon), tail_epsilon)
    }

    fn rule(&self, dim: usize) -> SimplexQuadrature {
        if dim <= self.max_tensor_dim {
            SimplexQuadrature::GaussLegendre { order: self.order }
        } else {
            SimplexQuadrature::MonteCarlo { samples: self.mc_samples, seed: self.seed }
        }
    }
}

/// Smallest l with 2·P(Poisson(f_max·T) > l) < ε.
pub fn jump_count_tail(t_end: f64, f_max: f64, epsilon: f64) -> usize {
    let mu = f_max * t_end;
    if mu <= 0.0 {
        return 0;
    }
    let p = Poisson::new(mu).expect("positive mean");
    (0u64..)
        .find(|&l| 2.0 * p.sf(l) < epsilon)
        .expect("Poisson tail vanishes") as usize
}

#[inline]
fn decay(spec: &ModelSpec, m: &mut [f64], dt: f64) {
    for k in 0..m.len() {
        m[k] *= (-spec.lambda[k] * dt).exp();
    }
}

/// θᵏ_t(t₁, …, t_k)(m₀): decay, jump, decay, …, decay up to t.
pub fn theta_k(times: &JumpTimes, t: f64, spec: &ModelSpec, m0: &[f64]) -> Result<Vec<f64>> {
    if times.last() > t {
        return Err(AlmError::Domain(format!("last jump {} after t = {t}", times.last())));
    }
    let mut m = m0.to_vec();
    let mut s = 0.0;
    for &tj in times.times() {
        decay(spec, &mut m, tj - s);
        spec.jump.apply_in_place(&mut m);
        s = tj;
    }
    decay(spec, &mut m, t - s);
    Ok(m)
}

/// θᵏ_t = e^{−Λ(t−t_k)} ∘ γ ∘ θ^{k−1}_{t_k}, evaluated by recursion.
pub fn theta_k_recursive(times: &JumpTimes, t: f64, spec: &ModelSpec, m0: &[f64]) -> Result<Vec<f64>> {
    match times.times().split_last() {
        None => theta_k(times, t, spec, m0),
        Some((&tk, rest)) => {
            if tk > t {
                return Err(AlmError::Domain("last jump after t".into()));
            }
            let mut m = theta_k_recursive(&JumpTimes::new(rest.to_vec())?, tk, spec, m0)?;
            spec.jump.apply_in_place(&mut m);
            decay(spec, &mut m, t - tk);
            Ok(m)
        }
    }
}

/// Image of φᵏ_t: leading jump times, age, memory.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiImage {
    pub prefix: Vec<f64>,
    pub a: f64,
    pub m: Vec<f64>,
}

/// φᵏ_t for k ≥ 1: (t₁…t_k, m₀) ↦ (t₁…t_{k−1}, t − t_k, θᵏ_t m₀).
/// For k = 0 the age is a₀ + t.
pub fn phi_k_apply(times: &JumpTimes, a0: f64, m0: &[f64], t: f64, spec: &ModelSpec) -> Result<PhiImage> {
    let m = theta_k(times, t, spec, m0)?;
    Ok(match times.times().split_last() {
        None => PhiImage { prefix: Vec::new(), a: a0 + t, m },
        Some((&tk, rest)) => PhiImage { prefix: rest.to_vec(), a: t - tk, m },
    })
}

/// Inverse of φᵏ_t. Returns (jump times, a₀, m₀); a₀ is only meaningful for k = 0.
pub fn phi_k_inverse(img: &PhiImage, k: usize, t: f64, spec: &ModelSpec) -> Result<(JumpTimes, f64, Vec<f64>)> {
    if img.prefix.len() + 1 != k.max(1) {
        return Err(AlmError::Domain("prefix length does not match k".into()));
    }
    if k == 0 {
        if img.a < t {
            return Err(AlmError::NoPreimage(format!("age {} below t = {t}", img.a)));
        }
        let mut m0 = img.m.clone();
        decay(spec, &mut m0, -t);
        return Ok((JumpTimes::empty(), img.a - t, m0));
    }
    let tk = t - img.a;
    let mut all = img.prefix.clone();
    all.push(tk);
    let times = JumpTimes::new(all).map_err(|e| AlmError::NoPreimage(e.to_string()))?;
    let mut m = img.m.clone();
    let mut s = t;
    for &tj in times.times().iter().rev() {
        decay(spec, &mut m, -(s - tj));
        m = spec.jump.inverse(&m).map_err(|e| AlmError::NoPreimage(e.to_string()))?;
        s = tj;
    }
    decay(spec, &mut m, -s);
    Ok((times, 0.0, m))
}

/// log|det D(φᵏ_t)⁻¹| at an image point: t·Tr Λ plus the γ⁻¹ log-determinants
/// at each post-jump memory.
pub fn phi_k_inverse_logdet(img: &PhiImage, k: usize, t: f64, spec: &ModelSpec) -> Result<f64> {
    let mut total = t * spec.trace_lambda();
    if k == 0 {
        return Ok(total);
    }
    let (times, _, _) = phi_k_inverse(img, k, t, spec)?;
    let mut m = img.m.clone();
    let mut s = t;
    for &tj in times.times().iter().rev() {
        decay(spec, &mut m, -(s - tj));
        total += spec.jump.logdet_inverse(&m)?;
        m = spec.jump.inverse(&m)?;
        s = tj;
    }
    Ok(total)
}

/// Walks the piecewise-deterministic path fixed by the jump times and
/// returns (Π rate at each jump · Π survival between jumps, survival from
/// the last jump to `t_end` if given).
fn path_weights(times: &JumpTimes, a0: f64, m0: &[f64], x: &XPath, spec: &ModelSpec, t_end: Option<f64>) -> (f64, f64) {
    let d = spec.d;
    let mut m = m0.to_vec();
    let mut age = a0;
    let mut s = 0.0;
    let mut eta = 1.0;
    let mut buf = vec![0.0; d];
    let survival = |s0: f64, s1: f64, age0: f64, m_start: &[f64], buf: &mut Vec<f64>| -> f64 {
        let integral = adaptive_simpson(s0, s1, SURVIVAL_TOL, |u| {
            for k in 0..d {
                buf[k] = m_start[k] * (-spec.lambda[k] * (u - s0)).exp();
            }
            spec.f(age0 + (u - s0), buf, x.at(u))
        });
        (-integral).exp()
    };
    for &tj in times.times() {
        let surv = survival(s, tj, age, &m, &mut buf);
        decay(spec, &mut m, tj - s);
        age += tj - s;
        eta *= surv * spec.f(age, &m, x.at(tj));
        spec.jump.apply_in_place(&mut m);
        age = 0.0;
        s = tj;
    }
    let tail = t_end.map_or(1.0, |te| survival(s, te, age, &m, &mut buf));
    (eta, tail)
}

/// ηᵏ(t₁, …, t_k; a₀, m₀): density of the first k jump times.
pub fn eta_k(times: &JumpTimes, a0: f64, m0: &[f64], x: &XPath, spec: &ModelSpec) -> f64 {
    path_weights(times, a0, m0, x, spec, None).0
}

/// νᵏ_t: ηᵏ times survival from t_k to t with no further jump.
pub fn nu_k(t: f64, times: &JumpTimes, a0: f64, m0: &[f64], x: &XPath, spec: &ModelSpec) -> Result<f64> {
    if times.last() > t {
        return Err(AlmError::Domain("t precedes the last jump".into()));
    }
    let (eta, tail) = path_weights(times, a0, m0, x, spec, Some(t));
    Ok(eta * tail)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub value: f64,
    /// Probability mass of paths with more than K_max jumps (upper bound).
    pub truncation_bound: f64,
}

/// ∫ u₀(a₀, m₀) νᵏ_t(…; a₀, m₀) da₀ for the k ≥ 1 terms.
fn age_integrated(times: &JumpTimes, t: f64, m0: &[f64], x: &XPath, spec: &ModelSpec) -> f64 {
    if spec.intensity.age_independent() {
        let dens = spec.init_law.memory_density(m0);
        if dens == 0.0 {
            return 0.0;
        }
        return dens * nu_k(t, times, 0.0, m0, x, spec).unwrap_or(0.0);
    }
    let upper = spec.init_law.age_upper(1e-12);
    let gl = GaussLegendre::new(16);
    let panels = 8;
    let h = upper / panels as f64;
    (0..panels)
        .map(|p| {
            gl.integrate(p as f64 * h, (p + 1) as f64 * h, |a0| {
                let u = spec.init_law.density(a0, m0);
                if u == 0.0 {
                    0.0
                } else {
                    u * nu_k(t, times, a0, m0, x, spec).unwrap_or(0.0)
                }
            })
        })
        .sum()
}

/// Integrand of the k-th term at full jump times (prefix, t − a).
fn term_integrand(prefix: &[f64], t: f64, a: f64, m: &[f64], x: &XPath, spec: &ModelSpec) -> f64 {
    let img = PhiImage { prefix: prefix.to_vec(), a, m: m.to_vec() };
    let k = prefix.len() + 1;
    let Ok((times, _, m0)) = phi_k_inverse(&img, k, t, spec) else { return 0.0 };
    let Ok(logdet) = phi_k_inverse_logdet(&img, k, t, spec) else { return 0.0 };
    let base = age_integrated(&times, t, &m0, x, spec);
    if base == 0.0 {
        0.0
    } else {
        base * logdet.exp()
    }
}

/// Ordered simplex 0 < t₁ < … < t_n < s from the unit cube:
/// t_n = s·u_n, t_{j} = t_{j+1}·u_j. Returns the Jacobian.
fn simplex_point(u: &[f64], s: f64, out: &mut [f64]) -> f64 {
    let n = u.len();
    let mut upper = s;
    let mut jac = 1.0;
    for j in (0..n).rev() {
        jac *= upper;
        upper *= u[j];
        out[j] = upper;
    }
    jac
}

fn simplex_integral<F: Fn(&[f64]) -> f64>(dim: usize, s: f64, rule: &SimplexQuadrature, k: usize, f: F) -> f64 {
    if dim == 0 {
        return f(&[]);
    }
    let mut pt = vec![0.0; dim];
    match *rule {
        SimplexQuadrature::GaussLegendre { order } => {
            let gl = GaussLegendre::new(order);
            let nodes: Vec<(f64, f64)> = gl.on(0.0, 1.0).collect();
            let mut counters = vec![0usize; dim];
            let mut u = vec![0.0; dim];
            let mut total = 0.0;
            loop {
                let mut w = 1.0;
                for j in 0..dim {
                    u[j] = nodes[counters[j]].0;
                    w *= nodes[counters[j]].1;
                }
                let jac = simplex_point(&u, s, &mut pt);
                total += w * jac * f(&pt);
                let mut j = 0;
                loop {
                    if j == dim {
                        return total;
                    }
                    counters[j] += 1;
                    if counters[j] < order {
                        break;
                    }
                    counters[j] = 0;
                    j += 1;
                }
            }
        }
        SimplexQuadrature::MonteCarlo { samples, seed } => {
            let mut r = rng::stream(seed, &[label::QUADRATURE, k as u64]);
            let mut u = vec![0.0; dim];
            let mut total = 0.0;
            for i in 0..samples {
                u[0] = (i as f64 + r.random::<f64>()) / samples as f64;
                for v in u.iter_mut().skip(1) {
                    *v = r.random();
                }
                let jac = simplex_point(&u, s, &mut pt);
                total += jac * f(&pt);
            }
            total / samples as f64
        }
    }
}

/// ρ_t(a, m) summed over jump counts up to K_max.
pub fn density_at(t: f64, a: f64, m: &[f64], x: &XPath, cfg: &PathIntegralConfig, spec: &ModelSpec) -> Result<DensityValue> {
    if !x.covers(t) {
        return Err(AlmError::Domain(format!("x path ends before t = {t}")));
    }
    let mu = spec.f_max() * t;
    let tail = if cfg.k_max == usize::MAX {
        0.0
    } else {
        Poisson::new(mu.max(1e-300)).map(|p| p.sf(cfg.k_max as u64)).unwrap_or(0.0)
    };
    if a >= t {
        let img = PhiImage { prefix: Vec::new(), a, m: m.to_vec() };
        let (_, a0, m0) = phi_k_inverse(&img, 0, t, spec)?;
        let u = spec.init_law.density(a0, &m0);
        let value = if u == 0.0 { 0.0 } else { u * (t * spec.trace_lambda()).exp() * nu_k(t, &JumpTimes::empty(), a0, &m0, x, spec)? };
        return Ok(DensityValue { value, truncation_bound: tail });
    }
    let mut value = 0.0;
    for k in 1..=cfg.k_max {
        let dim = k - 1;
        let rule = cfg.rule(dim);
        value += simplex_integral(dim, t - a, &rule, k, |prefix| term_integrand(prefix, t, a, m, x, spec));
    }
    Ok(DensityValue { value, truncation_bound: tail })
}

/// Total mass of the k-jump term, ∫∫ νᵏ_t u₀ over initial conditions and
/// jump times, by Monte Carlo over initial draws shared by every k.
pub fn term_mass(k: usize, t: f64, x: &XPath, spec: &ModelSpec, n_init: usize, order: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, &[label::QUADRATURE, 1_000]);
    let rule = SimplexQuadrature::GaussLegendre { order };
    let inits: Vec<(f64, Vec<f64>)> = (0..n_init).map(|_| spec.init_law.sample(&mut r)).collect();
    let vals: Vec<f64> = crate::par::map_slice(&inits, |(a0, m0)| {
        simplex_integral(k, t, &rule, k, |times| {
            JumpTimes::new(times.to_vec())
                .ok()
                .and_then(|jt| nu_k(t, &jt, *a0, m0, x, spec).ok())
                .unwrap_or(0.0)
        })
    });
    crate::par::pairwise_sum(&vals) / n_init as f64
}

/// density_at on the cell centers of `grid`, age slowest.
pub fn density_on_grid(t: f64, grid: &Grid, x: &XPath, cfg: &PathIntegralConfig, spec: &ModelSpec) -> Result<Vec<f64>> {
    let nm = grid.n_cells_m();
    let d = grid.n_m.len();
    crate::par::map_range(grid.n_a * nm, |i| {
        let mut idx = vec![0; d];
        grid.m_index(i % nm, &mut idx);
        let m: Vec<f64> = (0..d).map(|k| grid.m_center(k, idx[k])).collect();
        density_at(t, grid.a_center(i / nm), &m, x, cfg, spec).map(|v| v.value)
    })
    .into_iter()
    .collect()
}

/// Same `t,a,m1..md,rho` layout as the grid solver's CSV.
pub fn write_density_slice_csv<P: AsRef<std::path::Path>>(
    path: P,
    t: f64,
    grid: &Grid,
    values: &[f64],
    coords: crate::model::MemoryCoordinates,
) -> Result<()> {
    let d = grid.n_m.len();
    let nm = grid.n_cells_m();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "a".to_string()];
    header.extend((1..=d).map(|k| format!("m{k}")));
    header.push("rho".into());
    w.write_record(&header)?;
    let mut idx = vec![0; d];
    for (i, v) in values.iter().enumerate() {
        grid.m_index(i % nm, &mut idx);
        let mut row = vec![fmt_f64(t), fmt_f64(grid.a_center(i / nm))];
        row.extend((0..d).map(|k| fmt_f64(coords.to_user(grid.m_center(k, idx[k])))));
        row.push(fmt_f64(*v));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
