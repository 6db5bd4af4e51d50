use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};
use crate::model::{JumpSpec, ModelSpec};

/// Output grid. Age cells have width da = a_max / n_a, which must be an
/// integer multiple of dt; memory cells are uniform on the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub a_max: f64,
    pub n_a: usize,
    pub m_lo: Vec<f64>,
    pub m_hi: Vec<f64>,
    pub n_m: Vec<usize>,
    pub t_end: f64,
    pub dt: f64,
}

impl Grid {
    pub fn check(&self, d: usize) -> Result<()> {
        if d == 0 || d > 2 {
            return Err(AlmError::Config(format!("the density solver supports d = 1 or 2, got {d}")));
        }
        if self.m_lo.len() != d || self.m_hi.len() != d || self.n_m.len() != d {
            return Err(AlmError::Config("memory grid dimension mismatch".into()));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.a_max > 0.0) || self.n_a == 0 {
            return Err(AlmError::Config("grid needs positive dt, T, a_max and cells".into()));
        }
        for k in 0..d {
            if !(self.m_lo[k] < self.m_hi[k]) || self.n_m[k] == 0 {
                return Err(AlmError::Config(format!("bad memory box in dimension {k}")));
            }
            if self.m_lo[k] > 0.0 || self.m_hi[k] < 0.0 {
                return Err(AlmError::Config("memory box must contain 0 (the decay fixed point)".into()));
            }
        }
        let r = self.da() / self.dt;
        if (r - r.round()).abs() > 1e-9 * r.max(1.0) || r.round() < 1.0 {
            return Err(AlmError::Config(format!("age cell {} is not a multiple of dt = {}", self.da(), self.dt)));
        }
        let s = self.t_end / self.dt;
        if (s - s.round()).abs() > 1e-9 * s.max(1.0) {
            return Err(AlmError::Config("T must be a multiple of dt".into()));
        }
        Ok(())
    }

    pub fn da(&self) -> f64 {
        self.a_max / self.n_a as f64
    }

    pub fn dm(&self, k: usize) -> f64 {
        (self.m_hi[k] - self.m_lo[k]) / self.n_m[k] as f64
    }

    pub fn age_ratio(&self) -> usize {
        (self.da() / self.dt).round() as usize
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn n_cells_m(&self) -> usize {
        self.n_m.iter().product()
    }

    pub fn cell_volume_m(&self) -> f64 {
        (0..self.n_m.len()).map(|k| self.dm(k)).product()
    }

    pub fn m_center(&self, k: usize, i: usize) -> f64 {
        self.m_lo[k] + (i as f64 + 0.5) * self.dm(k)
    }

    pub fn a_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.da()
    }

    /// Multi-index of a flat memory cell (last dimension fastest).
    pub fn m_index(&self, mut flat: usize, out: &mut [usize]) {
        for k in (0..self.n_m.len()).rev() {
            out[k] = flat % self.n_m[k];
            flat /= self.n_m[k];
        }
    }

    /// Default grid: memory box from the jump family (exact for affine
    /// contractions, padded by six shot-noise standard deviations for translations), about `dm` per memory cell,
    /// age cells of the multiple of dt nearest to 0.05.
    pub fn for_spec(spec: &ModelSpec, t_end: f64, dt: f64, dm: f64) -> Self {
        let d = spec.d;
        let (mut m_lo, mut m_hi) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for k in 0..d {
            let (lo, hi) = match (&spec.jump, spec.invariant_box()) {
                (_, Some(b)) => b[k],
                (JumpSpec::Translation { alpha }, None) => {
                    let (lo, hi) = spec.init_law.memory_range(k, 1e-9);
                    let r = spec.f_max() / spec.lambda[k].max(1e-3);
                    let reach = alpha[k] * (r + 6.0 * (0.5 * r).sqrt() + 1.0);
                    (lo.min(0.0) + reach.min(0.0), hi.max(0.0) + reach.max(0.0))
                }
                _ => {
                    let (lo, hi) = spec.init_law.memory_range(k, 1e-9);
                    let w = hi - lo;
                    (lo.min(0.0) - w, hi.max(0.0) + w)
                }
            };
            m_lo.push(lo);
            m_hi.push(hi);
        }
        let n_m = (0..d).map(|k| ((m_hi[k] - m_lo[k]) / dm).ceil().max(4.0) as usize).collect();
        let ratio = (0.05 / dt).round().max(1.0);
        let da = ratio * dt;
        let by_rate = -(1e-6f64).ln() / spec.f_min();
        let by_support = t_end + spec.init_law.age_upper(1e-6);
        let n_a = (by_rate.min(by_support) / da).ceil().max(1.0) as usize;
        Self { a_max: n_a as f64 * da, n_a, m_lo, m_hi, n_m, t_end, dt }
    }
}
