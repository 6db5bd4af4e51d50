use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};

/// Post-event memory update γ(m) = m + Γ(m).
///
/// All shipped families act componentwise, which the density solver relies on
/// to map memory cells to memory cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpSpec {
    Translation { alpha: Vec<f64> },
    /// γ(m') = α + (1 − α)m' on the invariant box [0, 1]^d.
    AffineContraction { alpha: f64 },
    Custom { map: CustomJump },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CustomJump {
    /// γ(m) = factor·m
    Scale { factor: f64 },
    /// γ(m) = m + shift − strength·tanh(m)
    TanhShrink { strength: f64, shift: f64 },
}

impl CustomJump {
    #[inline]
    fn apply(&self, v: f64) -> f64 {
        match *self {
            Self::Scale { factor } => factor * v,
            Self::TanhShrink { strength, shift } => v + shift - strength * v.tanh(),
        }
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        match *self {
            Self::Scale { factor } => {
                if factor == 0.0 {
                    Err(AlmError::Config("scale jump with factor 0 is not invertible".into()))
                } else {
                    Ok(y / factor)
                }
            }
            Self::TanhShrink { strength, shift } => {
                if !(0.0..1.0).contains(&strength) {
                    return Err(AlmError::Config(format!(
                        "tanh-shrink jump needs strength in [0, 1) to be invertible, got {strength}"
                    )));
                }
                let g = |v: f64| v + shift - strength * v.tanh() - y;
                let mut lo = y - shift - strength - 1.0;
                let mut hi = y - shift + strength + 1.0;
                let mut v = y - shift;
                for _ in 0..200 {
                    let gv = g(v);
                    if gv == 0.0 {
                        return Ok(v);
                    }
                    if gv > 0.0 {
                        hi = v;
                    } else {
                        lo = v;
                    }
                    let c = v.cosh();
                    let dv = gv / (1.0 - strength / (c * c));
                    let next = v - dv;
                    v = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
                    if dv.abs() <= 1e-16 * (1.0 + v.abs()) || hi - lo <= 1e-16 * (1.0 + v.abs()) {
                        break;
                    }
                }
                Ok(v)
            }
        }
    }
}

impl JumpSpec {
    pub fn translation(alpha: Vec<f64>) -> Self {
        Self::Translation { alpha }
    }

    pub fn check(&self, d: usize) -> Result<()> {
        match self {
            Self::Translation { alpha } => {
                if alpha.len() != d || alpha.iter().any(|a| !a.is_finite()) {
                    return Err(AlmError::Config(format!("translation needs {d} finite components")));
                }
            }
            Self::AffineContraction { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(AlmError::Config(format!("affine contraction needs alpha in (0, 1), got {alpha}")));
                }
            }
            Self::Custom { map } => match *map {
                CustomJump::Scale { factor } if !factor.is_finite() => {
                    return Err(AlmError::Config("non-finite scale factor".into()))
                }
                CustomJump::TanhShrink { strength, shift } if !(strength.is_finite() && shift.is_finite()) => {
                    return Err(AlmError::Config("non-finite tanh-shrink parameters".into()))
                }
                _ => {}
            },
        }
        Ok(())
    }

    #[inline]
    pub fn apply_component(&self, k: usize, v: f64) -> f64 {
        match self {
            Self::Translation { alpha } => v + alpha[k],
            Self::AffineContraction { alpha } => alpha + (1.0 - alpha) * v,
            Self::Custom { map } => map.apply(v),
        }
    }

    pub fn inverse_component(&self, k: usize, y: f64) -> Result<f64> {
        match self {
            Self::Translation { alpha } => Ok(y - alpha[k]),
            Self::AffineContraction { alpha } => Ok((y - alpha) / (1.0 - alpha)),
            Self::Custom { map } => map.inverse(y),
        }
    }

    pub fn apply_in_place(&self, m: &mut [f64]) {
        for (k, v) in m.iter_mut().enumerate() {
            *v = self.apply_component(k, *v);
        }
    }

    pub fn apply(&self, m: &[f64]) -> Vec<f64> {
        let mut out = m.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn inverse(&self, m: &[f64]) -> Result<Vec<f64>> {
        m.iter().enumerate().map(|(k, &y)| self.inverse_component(k, y)).collect()
    }

    /// Γ(m) = γ(m) − m.
    pub fn big_gamma(&self, m: &[f64]) -> Vec<f64> {
        m.iter()
            .enumerate()
            .map(|(k, &v)| match self {
                Self::Translation { alpha } => alpha[k],
                Self::AffineContraction { alpha } => alpha * (1.0 - v),
                Self::Custom { map } => match *map {
                    CustomJump::Scale { factor } => (factor - 1.0) * v,
                    CustomJump::TanhShrink { strength, shift } => shift - strength * v.tanh(),
                },
            })
            .collect()
    }

    /// γ(m) − γ(m*) evaluated as (m − m*) + (Γ(m) − Γ(m*)).
    pub fn diff(&self, m: &[f64], ms: &[f64]) -> Vec<f64> {
        let g = self.big_gamma(m);
        let gs = self.big_gamma(ms);
        (0..m.len()).map(|k| (m[k] - ms[k]) + (g[k] - gs[k])).collect()
    }

    /// log|det Dγ^{-1}(m)|.
    pub fn logdet_inverse(&self, m: &[f64]) -> Result<f64> {
        match self {
            Self::Translation { .. } => Ok(0.0),
            Self::AffineContraction { alpha } => Ok(-(m.len() as f64) * (1.0 - alpha).ln()),
            Self::Custom { .. } => {
                let jac = finite_difference_jacobian(|p| self.inverse(p), m)?;
                let det = determinant(jac);
                if det == 0.0 || !det.is_finite() {
                    return Err(AlmError::Config("degenerate inverse Jacobian".into()));
                }
                Ok(det.abs().ln())
            }
        }
    }

    /// Invariant memory box for families that are only bounded on one.
    pub fn invariant_box(&self, d: usize) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::AffineContraction { .. } => Some(vec![(0.0, 1.0); d]),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Translation { alpha } if alpha.iter().all(|&a| a == 0.0))
    }

    pub fn increasing(&self) -> bool {
        match self {
            Self::Custom { map: CustomJump::Scale { factor } } => *factor > 0.0,
            _ => true,
        }
    }
}

/// Central-difference Jacobian with step 1e−6·max(1, |m_k|).
pub fn finite_difference_jacobian<F>(f: F, m: &[f64]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let d = m.len();
    let mut jac = vec![vec![0.0; d]; d];
    let mut p = m.to_vec();
    for j in 0..d {
        let h = 1e-6 * m[j].abs().max(1.0);
        p[j] = m[j] + h;
        let fp = f(&p)?;
        p[j] = m[j] - h;
        let fm = f(&p)?;
        p[j] = m[j];
        for i in 0..d {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    det
}
