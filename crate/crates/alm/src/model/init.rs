use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{AlmError, Result};
use crate::rng::open01;

/// Named one-dimensional laws for the initial age and memory coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Law1d {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    TruncatedGaussian { mean: f64, sd: f64, lo: f64, hi: f64 },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

impl Law1d {
    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Self::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            Self::TruncatedGaussian { mean, sd, lo, hi } => {
                sd > 0.0 && lo < hi && mean.is_finite() && sd.is_finite() && self.tg_norm() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AlmError::Config(format!("invalid one-dimensional law {self:?}")))
        }
    }

    fn tg_norm(&self) -> f64 {
        match *self {
            Self::TruncatedGaussian { mean, sd, lo, hi } => {
                let n = std_normal();
                n.cdf((hi - mean) / sd) - n.cdf((lo - mean) / sd)
            }
            _ => 1.0,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Exponential { .. } => (0.0, f64::INFINITY),
            Self::Uniform { lo, hi } | Self::TruncatedGaussian { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => rate * (-rate * x).exp(),
            Self::Uniform { lo, hi } => 1.0 / (hi - lo),
            Self::TruncatedGaussian { mean, sd, .. } => std_normal().pdf((x - mean) / sd) / (sd * self.tg_norm()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::Uniform { lo, hi } => (x - lo) / (hi - lo),
            Self::TruncatedGaussian { mean, sd, lo, .. } => {
                let n = std_normal();
                ((n.cdf((x - mean) / sd) - n.cdf((lo - mean) / sd)) / self.tg_norm()).clamp(0.0, 1.0)
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::TruncatedGaussian { mean, sd, lo, hi } => {
                let n = std_normal();
                let pl = n.cdf((lo - mean) / sd);
                let p = (pl + u * self.tg_norm()).clamp(1e-300, 1.0 - 1e-16);
                let mut z = n.inverse_cdf(p);
                for _ in 0..2 {
                    let dens = n.pdf(z);
                    if dens > 1e-300 {
                        z -= (n.cdf(z) - p) / dens;
                    }
                }
                (mean + sd * z).clamp(lo, hi)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::TruncatedGaussian { mean, sd, lo, hi } => {
                let n = std_normal();
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                mean + sd * (n.pdf(a) - n.pdf(b)) / self.tg_norm()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(open01(rng))
    }

    /// Smallest x with P(X > x) ≤ eps, capped by the support.
    pub fn upper_quantile(&self, eps: f64) -> f64 {
        let (_, hi) = self.support();
        if hi.is_finite() {
            hi
        } else {
            self.quantile(1.0 - eps)
        }
    }
}

/// Density tabulated on a rectangular (a, m₁, …, m_d) grid, read by
/// multilinear interpolation. Values are stored with the age index slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedDensity {
    pub age_nodes: Vec<f64>,
    pub memory_nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

fn locate(nodes: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = nodes.len();
    if x < nodes[0] || x > nodes[n - 1] {
        return None;
    }
    let i = match nodes.partition_point(|&v| v <= x) {
        0 => 0,
        p => (p - 1).min(n - 2),
    };
    let w = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
    Some((i, w))
}

/// ∫_{lo}^{hi} of each hat basis function on `nodes`.
fn hat_integrals(nodes: &[f64], lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for seg in 0..nodes.len() - 1 {
        let (x0, x1) = (nodes[seg], nodes[seg + 1]);
        let a = lo.max(x0);
        let b = hi.min(x1);
        if b <= a {
            continue;
        }
        let h = x1 - x0;
        // Right hat (1 at x1) integrates (t − x0)/h, left hat (x1 − t)/h.
        let right = ((b - x0).powi(2) - (a - x0).powi(2)) / (2.0 * h);
        let left = (b - a) - right;
        out.push((seg, left));
        out.push((seg + 1, right));
    }
    out
}

impl TabulatedDensity {
    fn dims(&self) -> Vec<usize> {
        let mut v = vec![self.age_nodes.len()];
        v.extend(self.memory_nodes.iter().map(|n| n.len()));
        v
    }

    fn axes(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.age_nodes];
        v.extend(self.memory_nodes.iter().map(|n| n.as_slice()));
        v
    }

    pub fn check(&self, d: usize) -> Result<()> {
        if self.memory_nodes.len() != d {
            return Err(AlmError::Config("tabulated density dimension mismatch".into()));
        }
        for ax in self.axes() {
            if ax.len() < 2 || ax.windows(2).any(|w| w[1] <= w[0]) {
                return Err(AlmError::Config("tabulated nodes must be strictly increasing".into()));
            }
        }
        if self.age_nodes[0] < 0.0 {
            return Err(AlmError::Config("tabulated ages must be nonnegative".into()));
        }
        let n: usize = self.dims().iter().product();
        if self.values.len() != n || self.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(AlmError::Config("tabulated values must be finite, nonnegative and match the grid".into()));
        }
        let mass = self.trapezoid_mass();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(AlmError::Config(format!("tabulated density integrates to {mass}, not 1")));
        }
        Ok(())
    }

    /// Product trapezoid mass, equal to the exact integral of the interpolant.
    pub fn trapezoid_mass(&self) -> f64 {
        let axes = self.axes();
        let lo: Vec<f64> = axes.iter().map(|a| a[0]).collect();
        let hi: Vec<f64> = axes.iter().map(|a| a[a.len() - 1]).collect();
        self.box_mass(&lo, &hi)
    }

    pub fn value(&self, point: &[f64]) -> f64 {
        let axes = self.axes();
        let dims = self.dims();
        let mut loc = Vec::with_capacity(axes.len());
        for (ax, &x) in axes.iter().zip(point) {
            match locate(ax, x) {
                Some(l) => loc.push(l),
                None => return 0.0,
            }
        }
        let nd = axes.len();
        let mut total = 0.0;
        for corner in 0..(1usize << nd) {
            let mut idx = 0;
            let mut w = 1.0;
            for k in 0..nd {
                let bit = (corner >> k) & 1;
                let (i, t) = loc[k];
                idx = idx * dims[k] + i + bit;
                w *= if bit == 1 { t } else { 1.0 - t };
            }
            if w != 0.0 {
                total += w * self.values[idx];
            }
        }
        total
    }

    /// Exact integral of the interpolant over the box [lo, hi].
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let axes = self.axes();
        let dims = self.dims();
        let per_dim: Vec<Vec<(usize, f64)>> =
            axes.iter().enumerate().map(|(k, ax)| hat_integrals(ax, lo[k], hi[k])).collect();
        if per_dim.iter().any(|v| v.is_empty()) {
            return 0.0;
        }
        let mut total = 0.0;
        let mut counters = vec![0usize; axes.len()];
        loop {
            let mut idx = 0;
            let mut w = 1.0;
            for k in 0..axes.len() {
                let (i, wi) = per_dim[k][counters[k]];
                idx = idx * dims[k] + i;
                w *= wi;
            }
            total += w * self.values[idx];
            let mut k = axes.len();
            loop {
                if k == 0 {
                    return total;
                }
                k -= 1;
                counters[k] += 1;
                if counters[k] < per_dim[k].len() {
                    break;
                }
                counters[k] = 0;
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Vec<f64>) {
        // Rejection from the bounding box of the table.
        let axes = self.axes();
        let vmax = self.values.iter().cloned().fold(0.0, f64::max);
        loop {
            let p: Vec<f64> = axes
                .iter()
                .map(|ax| ax[0] + rng.random::<f64>() * (ax[ax.len() - 1] - ax[0]))
                .collect();
            if rng.random::<f64>() * vmax <= self.value(&p) {
                return (p[0], p[1..].to_vec());
            }
        }
    }
}

/// Law of (A₀, M₀).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitLaw {
    Product { age: Law1d, memory: Vec<Law1d> },
    Tabulated { table: TabulatedDensity },
}

impl InitLaw {
    pub fn check(&self, d: usize) -> Result<()> {
        match self {
            Self::Product { age, memory } => {
                age.check()?;
                if age.support().0 < 0.0 {
                    return Err(AlmError::Config("initial age law must live on [0, inf)".into()));
                }
                if memory.len() != d {
                    return Err(AlmError::Config(format!("initial memory law needs {d} components")));
                }
                memory.iter().try_for_each(|l| l.check())
            }
            Self::Tabulated { table } => table.check(d),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Vec<f64>) {
        match self {
            Self::Product { age, memory } => {
                let a = age.sample(rng);
                let m = memory.iter().map(|l| l.sample(rng)).collect();
                (a, m)
            }
            Self::Tabulated { table } => table.sample(rng),
        }
    }

    pub fn density(&self, a: f64, m: &[f64]) -> f64 {
        match self {
            Self::Product { age, memory } => {
                age.pdf(a) * memory.iter().zip(m).map(|(l, &x)| l.pdf(x)).product::<f64>()
            }
            Self::Tabulated { table } => {
                let mut p = vec![a];
                p.extend_from_slice(m);
                table.value(&p)
            }
        }
    }

    /// Density of M₀ alone.
    pub fn memory_density(&self, m: &[f64]) -> f64 {
        match self {
            Self::Product { memory, .. } => memory.iter().zip(m).map(|(l, &x)| l.pdf(x)).product(),
            Self::Tabulated { table } => {
                let ax = &table.age_nodes;
                let mut total = 0.0;
                for w in ax.windows(2) {
                    let mut p0 = vec![w[0]];
                    p0.extend_from_slice(m);
                    let mut p1 = vec![w[1]];
                    p1.extend_from_slice(m);
                    total += 0.5 * (w[1] - w[0]) * (table.value(&p0) + table.value(&p1));
                }
                total
            }
        }
    }

    pub fn memory_mean(&self, d: usize) -> Vec<f64> {
        match self {
            Self::Product { memory, .. } => memory.iter().map(|l| l.mean()).collect(),
            Self::Tabulated { table } => {
                // Midpoint sums over the tabulation cells.
                let mut out = vec![0.0; d];
                for k in 0..d {
                    let nodes = &table.memory_nodes[k];
                    let mut lo: Vec<f64> = table.axes().iter().map(|a| a[0]).collect();
                    let mut hi: Vec<f64> = table.axes().iter().map(|a| a[a.len() - 1]).collect();
                    for w in nodes.windows(2) {
                        lo[k + 1] = w[0];
                        hi[k + 1] = w[1];
                        out[k] += 0.5 * (w[0] + w[1]) * table.box_mass(&lo, &hi);
                    }
                }
                out
            }
        }
    }

    /// Probability of the box [a_lo, a_hi] × Π[m_lo, m_hi].
    pub fn box_mass(&self, a_lo: f64, a_hi: f64, m_lo: &[f64], m_hi: &[f64]) -> f64 {
        match self {
            Self::Product { age, memory } => {
                let mut p = age.cdf(a_hi) - age.cdf(a_lo);
                for (k, l) in memory.iter().enumerate() {
                    p *= l.cdf(m_hi[k]) - l.cdf(m_lo[k]);
                }
                p.max(0.0)
            }
            Self::Tabulated { table } => {
                let mut lo = vec![a_lo];
                lo.extend_from_slice(m_lo);
                let mut hi = vec![a_hi];
                hi.extend_from_slice(m_hi);
                table.box_mass(&lo, &hi)
            }
        }
    }

    pub fn memory_support(&self, k: usize) -> (f64, f64) {
        match self {
            Self::Product { memory, .. } => memory[k].support(),
            Self::Tabulated { table } => {
                let n = &table.memory_nodes[k];
                (n[0], n[n.len() - 1])
            }
        }
    }

    /// Age beyond which at most `eps` of the initial mass lies.
    pub fn age_upper(&self, eps: f64) -> f64 {
        match self {
            Self::Product { age, .. } => age.upper_quantile(eps),
            Self::Tabulated { table } => table.age_nodes[table.age_nodes.len() - 1],
        }
    }

    /// Memory interval holding all but `eps` of component `k`.
    pub fn memory_range(&self, k: usize, eps: f64) -> (f64, f64) {
        match self {
            Self::Product { memory, .. } => {
                let l = &memory[k];
                (l.quantile(eps), l.quantile(1.0 - eps))
            }
            Self::Tabulated { .. } => self.memory_support(k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn truncated_gaussian_roundtrip() {
        let l = Law1d::TruncatedGaussian { mean: 0.2, sd: 0.3, lo: -0.5, hi: 1.0 };
        for &u in &[0.01, 0.3, 0.5, 0.9] {
            assert!((l.cdf(l.quantile(u)) - u).abs() < 1e-12);
        }
        let gl = crate::quad::GaussLegendre::new(40);
        let mass = gl.integrate(-0.5, 1.0, |x| l.pdf(x));
        assert!((mass - 1.0).abs() < 1e-12);
        let mean = gl.integrate(-0.5, 1.0, |x| x * l.pdf(x));
        assert!((mean - l.mean()).abs() < 1e-12);
    }

    #[test]
    fn tabulated_mass_and_box() {
        let age_nodes = vec![0.0, 1.0, 2.0];
        let memory_nodes = vec![vec![0.0, 0.5, 1.0]];
        let raw = vec![1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0];
        let mut t = TabulatedDensity { age_nodes, memory_nodes, values: raw };
        let m = t.trapezoid_mass();
        t.values.iter_mut().for_each(|v| *v /= m);
        assert!(t.check(1).is_ok());
        let half = t.box_mass(&[0.0, 0.0], &[1.0, 1.0]);
        assert!((half - 0.5).abs() < 1e-14);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let law = InitLaw::Tabulated { table: t };
        let (a, mm) = law.sample(&mut rng);
        assert!((0.0..=2.0).contains(&a) && (0.0..=1.0).contains(&mm[0]));
    }
}
