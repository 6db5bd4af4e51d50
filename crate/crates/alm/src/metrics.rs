//! Wasserstein distances between empirical measures and grid densities, and
//! the finite-N convergence studies built on them.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{AlmError, Result};
use crate::model::{ModelSpec, PsiParams};
use crate::particle_sim::{empirical_measure, simulate_coupled_pair, CoupledRunSummary, EmpiricalMeasure, SimOptions, Simulator};
use crate::pde_solver::{DensitySolution, Grid};
use crate::rng::{self, label};
use crate::xpath::{fmt_f64, XPath};

pub const DEFAULT_DIRECTIONS: usize = 64;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Knots kept per slice of a grid density.
const REFERENCE_KNOTS: usize = 2049;

/// A one-dimensional probability law given by samples or by pieces.
#[derive(Clone, Debug, PartialEq)]
pub enum Dist1d {
    Samples(Vec<f64>),
    /// (value, weight) atoms.
    Weighted(Vec<(f64, f64)>),
    /// (lo, hi, weight) pieces with uniform density.
    Uniforms(Vec<(f64, f64, f64)>),
}

/// Piecewise-linear CDF with jumps: F is linear from `right[i]` at `xs[i]`
/// to `left[i + 1]` at `xs[i + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PwCdf {
    xs: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl PwCdf {
    /// Builds from atoms and uniform pieces; weights are normalized.
    pub fn build(atoms: &[(f64, f64)], pieces: &[(f64, f64, f64)]) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum::<f64>() + pieces.iter().map(|p| p.2).sum::<f64>();
        if !(total > 0.0) || !total.is_finite() {
            return Err(AlmError::Domain("distribution has no mass".into()));
        }
        // (position, jump, slope change)
        let mut ev: Vec<(f64, f64, f64)> = Vec::with_capacity(atoms.len() + 2 * pieces.len());
        for &(x, w) in atoms {
            ev.push((x, w / total, 0.0));
        }
        for &(lo, hi, w) in pieces {
            if hi - lo <= 1e-15 * lo.abs().max(1.0) {
                ev.push((0.5 * (lo + hi), w / total, 0.0));
            } else {
                let s = w / total / (hi - lo);
                ev.push((lo, 0.0, s));
                ev.push((hi, 0.0, -s));
            }
        }
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut xs = Vec::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        let (mut f, mut slope) = (0.0, 0.0);
        let mut i = 0;
        while i < ev.len() {
            let x = ev[i].0;
            if let Some(&px) = xs.last() {
                f += slope * (x - px);
            }
            let fl = f;
            while i < ev.len() && ev[i].0 == x {
                f += ev[i].1;
                slope += ev[i].2;
                i += 1;
            }
            xs.push(x);
            left.push(fl);
            right.push(f);
        }
        let n = xs.len();
        right[n - 1] = 1.0;
        Ok(Self { xs, left, right })
    }

    pub fn from_dist(d: &Dist1d) -> Result<Self> {
        match d {
            Dist1d::Samples(v) => {
                let atoms: Vec<(f64, f64)> = v.iter().map(|&x| (x, 1.0)).collect();
                Self::build(&atoms, &[])
            }
            Dist1d::Weighted(v) => Self::build(v, &[]),
            Dist1d::Uniforms(v) => Self::build(&[], v),
        }
    }

    /// Left and right limits at x.
    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        match self.xs.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => (self.left[i], self.right[i]),
            Err(0) => (0.0, 0.0),
            Err(i) if i == n => (1.0, 1.0),
            Err(i) => {
                let (x0, x1) = (self.xs[i - 1], self.xs[i]);
                let v = self.right[i - 1] + (self.left[i] - self.right[i - 1]) * (x - x0) / (x1 - x0);
                (v, v)
            }
        }
    }

    /// Quantile function on the continuous part, used to compress a slice.
    fn compress(&self, knots: usize) -> Self {
        if self.xs.len() <= knots {
            return self.clone();
        }
        let mut xs = Vec::with_capacity(knots);
        let mut j = 0;
        for q in 0..knots {
            let p = q as f64 / (knots - 1) as f64;
            while j + 1 < self.xs.len() && self.left[j + 1] < p {
                j += 1;
            }
            let x = if p <= self.right[0] {
                self.xs[0]
            } else if j + 1 >= self.xs.len() {
                self.xs[self.xs.len() - 1]
            } else {
                let (f0, f1) = (self.right[j], self.left[j + 1]);
                if f1 > f0 {
                    self.xs[j] + (self.xs[j + 1] - self.xs[j]) * ((p - f0) / (f1 - f0)).clamp(0.0, 1.0)
                } else {
                    self.xs[j + 1]
                }
            };
            if xs.last().is_none_or(|&l| x > l) {
                xs.push(x);
            }
        }
        let n = xs.len();
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for (i, &x) in xs.iter().enumerate() {
            let (l, r) = self.eval(x);
            left.push(if i == 0 { l } else { l.max(right[i - 1]) });
            right.push(if i + 1 == n { 1.0 } else { r });
        }
        Self { xs, left, right }
    }
}

/// ∫|F − G| for two piecewise-linear CDFs.
pub fn w1_cdf(a: &PwCdf, b: &PwCdf) -> f64 {
    let mut xs: Vec<f64> = a.xs.iter().chain(&b.xs).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut total = 0.0;
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut prev: Option<(f64, f64)> = None;
    // linear sweep: both inputs are sorted, so positions only move forward
    let at = |c: &PwCdf, i: &mut usize, x: f64| -> (f64, f64) {
        while *i < c.xs.len() && c.xs[*i] < x {
            *i += 1;
        }
        if *i < c.xs.len() && c.xs[*i] == x {
            return (c.left[*i], c.right[*i]);
        }
        if *i == 0 {
            return (0.0, 0.0);
        }
        if *i == c.xs.len() {
            return (1.0, 1.0);
        }
        let (x0, x1) = (c.xs[*i - 1], c.xs[*i]);
        let v = c.right[*i - 1] + (c.left[*i] - c.right[*i - 1]) * (x - x0) / (x1 - x0);
        (v, v)
    };
    for &x in &xs {
        let (al, ar) = at(a, &mut ia, x);
        let (bl, br) = at(b, &mut ib, x);
        if let Some((px, d0)) = prev {
            let d1 = al - bl;
            let len = x - px;
            total += if d0 * d1 >= 0.0 {
                0.5 * len * (d0.abs() + d1.abs())
            } else {
                0.5 * len * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
            };
        }
        prev = Some((x, ar - br));
    }
    total
}

/// Exact 1-d W1.
pub fn wasserstein1_1d(a: &Dist1d, b: &Dist1d) -> Result<f64> {
    let empty = match (a, b) {
        (Dist1d::Samples(x), _) if x.is_empty() => true,
        (_, Dist1d::Samples(y)) if y.is_empty() => true,
        _ => false,
    };
    if empty {
        return Err(AlmError::Domain("empty sample".into()));
    }
    Ok(w1_cdf(&PwCdf::from_dist(a)?, &PwCdf::from_dist(b)?))
}

/// (ψ(a), tanh(m₁), …)
pub fn transform_point(psi: &PsiParams, a: f64, m: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len() + 1);
    v.push(psi.value(a));
    v.extend(m.iter().map(|x| x.tanh()));
    v
}

/// Fixed unit directions in `dim` dimensions: stratified angles on the half
/// circle for dim = 2, normalized Gaussians otherwise.
pub fn directions(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, &[label::DIRECTIONS, dim as u64]);
    if dim == 1 {
        return vec![vec![1.0]; n.max(1)];
    }
    (0..n)
        .map(|j| {
            if dim == 2 {
                let th = std::f64::consts::PI * (j as f64 + r.random::<f64>()) / n as f64;
                vec![th.cos(), th.sin()]
            } else {
                loop {
                    let v: Vec<f64> = (0..dim).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r)).collect();
                    let norm = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        break v.into_iter().map(|x| x / norm).collect();
                    }
                }
            }
        })
        .collect()
}

/// Sliced W1 between two weighted point sets.
pub fn sliced_w1_points(p: &[(Vec<f64>, f64)], q: &[(Vec<f64>, f64)], dirs: &[Vec<f64>]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(AlmError::Domain("empty point set".into()));
    }
    let proj = |s: &[(Vec<f64>, f64)], th: &[f64]| -> Vec<(f64, f64)> {
        s.iter().map(|(x, w)| (x.iter().zip(th).map(|(a, b)| a * b).sum(), *w)).collect()
    };
    let vals: Vec<f64> = crate::par::map_slice(dirs, |th| {
        w1_cdf(&PwCdf::build(&proj(p, th), &[]).expect("mass"), &PwCdf::build(&proj(q, th), &[]).expect("mass"))
    });
    Ok(crate::par::pairwise_sum(&vals) / dirs.len() as f64)
}

/// Exact W1 between two equal-size uniform point sets by enumerating
/// matchings. Meant for tiny instances.
pub fn exact_w1_matching(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() || p.len() > 8 {
        return Err(AlmError::Domain("matching oracle needs equal sizes between 1 and 8".into()));
    }
    let n = p.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let cost = |perm: &[usize]| (0..n).map(|i| dist(&p[i], &q[perm[i]])).sum::<f64>();
    best = best.min(cost(&perm));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best / n as f64)
}

/// Per-direction CDFs of the transformed grid density.
#[derive(Clone, Debug)]
pub struct SlicedReference {
    pub dirs: Vec<Vec<f64>>,
    cdfs: Vec<PwCdf>,
}

impl SlicedReference {
    /// Each cell is spread uniformly over its transformed box; the projection
    /// of a box is approximated by a 4-point mixture of uniform intervals
    /// along every dimension but the widest.
    pub fn new(psi: &PsiParams, grid: &Grid, rho: &[f64], n_directions: usize, seed: u64) -> Result<Self> {
        let d = grid.n_m.len();
        let nm = grid.n_cells_m();
        if rho.len() != grid.n_a * nm {
            return Err(AlmError::Domain("density does not match the grid".into()));
        }
        let vol = grid.da() * grid.cell_volume_m();
        let mut cells: Vec<(Vec<(f64, f64)>, f64)> = Vec::new();
        let mut idx = vec![0; d];
        for (i, &v) in rho.iter().enumerate() {
            let w = v * vol;
            if w <= 0.0 {
                continue;
            }
            grid.m_index(i % nm, &mut idx);
            let ia = i / nm;
            let mut b = vec![(psi.value(ia as f64 * grid.da()), psi.value((ia + 1) as f64 * grid.da()))];
            for k in 0..d {
                let lo = grid.m_lo[k] + idx[k] as f64 * grid.dm(k);
                b.push((lo.tanh(), (lo + grid.dm(k)).tanh()));
            }
            cells.push((b, w));
        }
        if cells.is_empty() {
            return Err(AlmError::Domain("density has zero mass".into()));
        }
        let dirs = directions(d + 1, n_directions, seed);
        const J: usize = 4;
        let cdfs = crate::par::map_slice(&dirs, |th| {
            let mut pieces = Vec::with_capacity(cells.len() * J.pow(d as u32));
            for (b, w) in &cells {
                let centre: f64 = b.iter().zip(th).map(|((l, h), t)| 0.5 * (l + h) * t).sum();
                let mut half: Vec<f64> = b.iter().zip(th).map(|((l, h), t)| 0.5 * (h - l) * t.abs()).collect();
                half.sort_by(|x, y| y.total_cmp(x));
                let wide = half[0];
                let rest = &half[1..];
                let combos = J.pow(rest.len() as u32);
                for c in 0..combos {
                    let mut shift = 0.0;
                    let mut code = c;
                    for h in rest {
                        let j = code % J;
                        code /= J;
                        shift += h * (2.0 * (j as f64 + 0.5) / J as f64 - 1.0);
                    }
                    let mid = centre + shift;
                    pieces.push((mid - wide, mid + wide, w / combos as f64));
                }
            }
            PwCdf::build(&[], &pieces).map(|c| c.compress(REFERENCE_KNOTS))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self { dirs, cdfs })
    }

    pub fn distance(&self, points: &[(Vec<f64>, f64)]) -> Result<f64> {
        if points.is_empty() {
            return Err(AlmError::Domain("empty point set".into()));
        }
        let vals: Vec<f64> = crate::par::map_range(self.dirs.len(), |j| {
            let th = &self.dirs[j];
            let atoms: Vec<(f64, f64)> = points.iter().map(|(x, w)| (x.iter().zip(th).map(|(a, b)| a * b).sum(), *w)).collect();
            w1_cdf(&PwCdf::build(&atoms, &[]).expect("positive weights"), &self.cdfs[j])
        });
        Ok(crate::par::pairwise_sum(&vals) / self.dirs.len() as f64)
    }
}

pub fn transformed_points(psi: &PsiParams, em: &EmpiricalMeasure) -> Vec<(Vec<f64>, f64)> {
    em.ages
        .iter()
        .zip(&em.memories)
        .zip(&em.weights)
        .map(|((a, m), w)| (transform_point(psi, *a, m), *w))
        .collect()
}

/// Sliced W1 between the (ψ × tanh) images of an empirical measure and of a
/// grid density.
pub fn transformed_w1(
    psi: &PsiParams,
    em: &EmpiricalMeasure,
    grid: &Grid,
    rho: &[f64],
    n_directions: usize,
    seed: u64,
) -> Result<f64> {
    SlicedReference::new(psi, grid, rho, n_directions, seed)?.distance(&transformed_points(psi, em))
}

/// Draws i.i.d. points from a grid density (uniform within cells).
pub fn sample_grid_density<R: Rng + ?Sized>(grid: &Grid, rho: &[f64], n: usize, r: &mut R) -> Result<EmpiricalMeasure> {
    let nm = grid.n_cells_m();
    let d = grid.n_m.len();
    let cells: Vec<(usize, f64)> = rho.iter().cloned().enumerate().filter(|(_, v)| *v > 0.0).collect();
    if cells.is_empty() {
        return Err(AlmError::Domain("density has zero mass".into()));
    }
    let mut ages = Vec::with_capacity(n);
    let mut memories = Vec::with_capacity(n);
    let mut idx = vec![0; d];
    for _ in 0..n {
        let &(i, _) = cells.choose_weighted(r, |c| c.1).map_err(|e| AlmError::Domain(e.to_string()))?;
        grid.m_index(i % nm, &mut idx);
        ages.push(((i / nm) as f64 + r.random::<f64>()) * grid.da());
        memories.push((0..d).map(|k| grid.m_lo[k] + (idx[k] as f64 + r.random::<f64>()) * grid.dm(k)).collect());
    }
    Ok(EmpiricalMeasure { t: 0.0, ages, memories, weights: vec![1.0 / n as f64; n] })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub replicate: usize,
    pub t: f64,
    pub w1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    /// One-sided Welch p-values for an increase between consecutive N.
    pub increase_p: Vec<f64>,
    /// One-sided p-value for a negative slope of log values on log N.
    pub decrease_p: f64,
    pub level: f64,
    pub monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub means: Vec<(usize, f64)>,
    pub fit: Option<SlopeFit>,
    pub trend: Option<TrendTest>,
}

impl ConvergenceTable {
    pub fn write_csv<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["N", "replicate", "t", "w1"])?;
        for r in &self.rows {
            w.write_record([r.n.to_string(), r.replicate.to_string(), fmt_f64(r.t), fmt_f64(r.w1)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<std::path::Path>>(path: P) -> Result<Vec<ConvergenceRow>> {
        let mut r = csv::Reader::from_path(path)?;
        r.records()
            .map(|rec| {
                let rec = rec?;
                let p = |i: usize| rec.get(i).unwrap_or("").to_string();
                let bad = |e: String| AlmError::Config(e);
                Ok(ConvergenceRow {
                    n: p(0).parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                    replicate: p(1).parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                    t: p(2).parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                    w1: p(3).parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                })
            })
            .collect()
    }

    pub fn summary_json(&self) -> String {
        serde_json::json!({ "means": self.means, "fit": self.fit, "trend": self.trend }).to_string()
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Log-log slope of per-N replica means with a percentile bootstrap CI
/// from resampling replicas within each N. None when fewer than two N carry
/// positive means.
pub fn fit_slope(groups: &[(usize, Vec<f64>)], seed: u64) -> Option<SlopeFit> {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    if groups.len() < 2 || groups.iter().any(|(_, v)| v.is_empty() || !(mean(v) > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = groups.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = groups.iter().map(|(_, v)| mean(v).ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let mut r = rng::stream(seed, &[label::BOOTSTRAP]);
    let mut boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .filter_map(|_| {
            let yb: Vec<f64> = groups
                .iter()
                .map(|(_, v)| {
                    let s: f64 = (0..v.len()).map(|_| v[r.random_range(0..v.len())]).sum();
                    (s / v.len() as f64).ln()
                })
                .collect();
            yb.iter().all(|y| y.is_finite()).then(|| least_squares(&xs, &yb).0)
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let ci = if boots.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let q = |p: f64| boots[((p * (boots.len() - 1) as f64).round() as usize).min(boots.len() - 1)];
        (q(0.025), q(0.975))
    };
    Some(SlopeFit { slope, intercept, ci })
}

fn welch_increase_p(a: &[f64], b: &[f64]) -> f64 {
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], mu: f64| v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
    let (ma, mb) = (m(a), m(b));
    let (va, vb) = (var(a, ma) / a.len() as f64, var(b, mb) / b.len() as f64);
    let se = (va + vb).sqrt();
    if !(se > 0.0) {
        return if mb > ma { 0.0 } else { 1.0 };
    }
    let df = (va + vb).powi(2) / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let t = (mb - ma) / se;
    1.0 - StudentsT::new(0.0, 1.0, df).expect("positive df").cdf(t)
}

/// Trend test: no consecutive increase significant at `level`, and a
/// significantly negative regression slope over all replicates.
pub fn trend_test(groups: &[(usize, Vec<f64>)], level: f64) -> Option<TrendTest> {
    if groups.len() < 2 || groups.iter().any(|(_, v)| v.len() < 2) {
        return None;
    }
    let increase_p: Vec<f64> = groups.windows(2).map(|w| welch_increase_p(&w[0].1, &w[1].1)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, v) in groups {
        for &y in v {
            if y > 0.0 {
                xs.push((*n as f64).ln());
                ys.push(y.ln());
            }
        }
    }
    let decrease_p = if xs.len() > 2 {
        let (slope, icpt) = least_squares(&xs, &ys);
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
        let df = xs.len() as f64 - 2.0;
        let se = (sse / df / sxx).sqrt();
        if se > 0.0 {
            StudentsT::new(0.0, 1.0, df).expect("positive df").cdf(slope / se)
        } else if slope < 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        1.0
    };
    let monotone = increase_p.iter().all(|&p| p >= level) && decrease_p < level;
    Some(TrendTest { increase_p, decrease_p, level, monotone })
}

/// W1 between simulated empirical measures and the grid density at t_eval
/// over an N ladder.
pub fn convergence_study(
    spec: &ModelSpec,
    ladder: &[usize],
    t_eval: f64,
    n_replicas: usize,
    seed: u64,
    reference: &DensitySolution,
    n_directions: usize,
) -> Result<ConvergenceTable> {
    if reference.memory_only {
        return Err(AlmError::Config("reference density needs an age axis".into()));
    }
    let idx = reference.snapshot_index(t_eval)?;
    let sref = SlicedReference::new(&spec.psi, &reference.grid, &reference.rho[idx], n_directions, seed)?;
    let sim = Simulator::new(spec, SimOptions { record_events: false, ..Default::default() })?;
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    for &n in ladder {
        let level_seed = rng::derive(seed, &[label::REPLICA, n as u64]);
        let recs = sim.run_replicas(n, t_eval, level_seed, n_replicas, &[t_eval])?;
        let mut vals = Vec::with_capacity(n_replicas);
        for (r, rec) in recs.iter().enumerate() {
            let em = empirical_measure(rec, t_eval)?;
            let w1 = sref.distance(&transformed_points(&spec.psi, &em))?;
            rows.push(ConvergenceRow { n, replicate: r, t: t_eval, w1 });
            vals.push(w1);
        }
        groups.push((n, vals));
    }
    let means = groups.iter().map(|(n, v)| (*n, v.iter().sum::<f64>() / v.len().max(1) as f64)).collect();
    Ok(ConvergenceTable { rows, means, fit: fit_slope(&groups, seed), trend: trend_test(&groups, 0.05) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingTable {
    pub summaries: Vec<CoupledRunSummary>,
    pub fit: Option<SlopeFit>,
}

/// Coupled network/limit distances over an N ladder and their log-log slope.
pub fn coupling_decay_study(
    spec: &ModelSpec,
    ladder: &[usize],
    t_end: f64,
    x_path: &XPath,
    n_replicas: usize,
    seed: u64,
) -> Result<CouplingTable> {
    let summaries = ladder
        .iter()
        .map(|&n| simulate_coupled_pair(spec, n, t_end, x_path, rng::derive(seed, &[label::REPLICA, n as u64]), n_replicas))
        .collect::<Result<Vec<_>>>()?;
    let groups: Vec<(usize, Vec<f64>)> =
        summaries.iter().map(|s| (s.n, s.replicas.iter().map(|r| r.mean_sup).collect())).collect();
    Ok(CouplingTable { fit: fit_slope(&groups, seed), summaries })
}
