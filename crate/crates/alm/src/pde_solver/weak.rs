//! Smooth compactly supported test functions χ(a, m) for the weak identity,
//! combined with the time factor φ(t) = cos²(πt / 2T).

use serde::{Deserialize, Serialize};

use crate::model::ModelSpec;

/// Product of (1 − z²)³ bumps in age and each memory component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center_a: f64,
    pub width_a: f64,
    pub center_m: Vec<f64>,
    pub width_m: Vec<f64>,
}

#[inline]
fn bump(z: f64) -> (f64, f64) {
    if z.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - z * z;
    (s * s * s, -6.0 * z * s * s)
}

impl TestFunction {
    /// Value and gradient (∂_a, ∂_m) at (a, m); `grad_m` is overwritten.
    pub fn eval(&self, a: f64, m: &[f64], grad_m: &mut [f64]) -> (f64, f64) {
        let (ba, dba) = bump((a - self.center_a) / self.width_a);
        let mut vals = [0.0f64; 8];
        let mut ders = [0.0f64; 8];
        let mut prod_m = 1.0;
        for k in 0..m.len() {
            let (b, db) = bump((m[k] - self.center_m[k]) / self.width_m[k]);
            vals[k] = b;
            ders[k] = db / self.width_m[k];
            prod_m *= b;
        }
        for k in 0..m.len() {
            let others: f64 = (0..m.len()).filter(|&j| j != k).map(|j| vals[j]).product();
            grad_m[k] = ba * ders[k] * others;
        }
        (ba * prod_m, dba / self.width_a * prod_m)
    }

    pub fn value(&self, a: f64, m: &[f64]) -> f64 {
        let mut g = [0.0; 8];
        self.eval(a, m, &mut g[..m.len()]).0
    }
}

pub fn time_factor(t: f64, t_end: f64) -> (f64, f64) {
    let w = std::f64::consts::PI / (2.0 * t_end);
    let c = (w * t).cos();
    (c * c, -w * (2.0 * w * t).sin())
}

/// Five bumps spread over where the initial memory mass sits, two of them
/// touching a = 0 so the reset term is exercised.
pub fn default_family(spec: &ModelSpec) -> Vec<TestFunction> {
    let d = spec.d;
    let ranges: Vec<(f64, f64)> = (0..d).map(|k| spec.init_law.memory_range(k, 1e-3)).collect();
    let shifts = [0.0, -0.25, 0.25, 0.0, -0.1];
    let widths = [0.5, 0.5, 0.5, 1.0, 0.75];
    let ages = [(0.0, 1.0), (0.5, 1.0), (1.0, 1.5), (1.5, 1.5), (2.5, 2.0)];
    (0..5)
        .map(|i| TestFunction {
            center_a: ages[i].0,
            width_a: ages[i].1,
            center_m: ranges.iter().map(|(lo, hi)| 0.5 * (lo + hi) + shifts[i] * (hi - lo)).collect(),
            width_m: ranges.iter().map(|(lo, hi)| widths[i] * (hi - lo).max(1e-3)).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_difference() {
        let g = TestFunction { center_a: 1.0, width_a: 1.5, center_m: vec![0.1, -0.2], width_m: vec![0.7, 0.9] };
        let (a, m) = (1.3, [0.3, -0.1]);
        let mut grad = [0.0; 2];
        let (_, da) = g.eval(a, &m, &mut grad);
        let h = 1e-6;
        let fd_a = (g.value(a + h, &m) - g.value(a - h, &m)) / (2.0 * h);
        assert!((fd_a - da).abs() < 1e-8);
        for k in 0..2 {
            let (mut p, mut q) = (m, m);
            p[k] += h;
            q[k] -= h;
            let fd = (g.value(a, &p) - g.value(a, &q)) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn time_factor_endpoints() {
        let (p0, _) = time_factor(0.0, 3.0);
        let (p1, _) = time_factor(3.0, 3.0);
        assert_eq!(p0, 1.0);
        assert!(p1.abs() < 1e-30);
        let (_, dp) = time_factor(1.1, 3.0);
        let fd = (time_factor(1.1 + 1e-6, 3.0).0 - time_factor(1.1 - 1e-6, 3.0).0) / 2e-6;
        assert!((dp - fd).abs() < 1e-8);
    }
}
