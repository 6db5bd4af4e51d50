use serde::{Deserialize, Serialize};

use super::psi::PsiParams;
use crate::error::{AlmError, Result};

/// Bounded intensity families. Every family evaluates into `[f_min, f_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntensitySpec {
    /// f_min + (f_max − f_min)·σ(c_a ψ(a) + c_m·m + c_x x + b)
    SigmoidAffine {
        f_min: f64,
        f_max: f64,
        c_a: f64,
        c_m: Vec<f64>,
        c_x: f64,
        b: f64,
    },
    /// f_min + (f_max − f_min)·(1 − exp(−e^z)) with the same affine z.
    ExpSaturating {
        f_min: f64,
        f_max: f64,
        c_a: f64,
        c_m: Vec<f64>,
        c_x: f64,
        b: f64,
    },
    Constant { rate: f64 },
    /// Logistic base rate of x + Ψ(a), Ψ(a) = −psi_amp·e^{−psi_rate·a}.
    StpComposite {
        f_min: f64,
        f_max: f64,
        c_x: f64,
        b: f64,
        psi_amp: f64,
        psi_rate: f64,
    },
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn gumbel_sat(z: f64) -> f64 {
    -(-z.min(700.0).exp()).exp_m1()
}

#[inline]
fn dot(c: &[f64], m: &[f64]) -> f64 {
    c.iter().zip(m).map(|(a, b)| a * b).sum()
}

impl IntensitySpec {
    pub fn constant(rate: f64) -> Self {
        Self::Constant { rate }
    }

    pub fn f_min(&self) -> f64 {
        match self {
            Self::SigmoidAffine { f_min, .. }
            | Self::ExpSaturating { f_min, .. }
            | Self::StpComposite { f_min, .. } => *f_min,
            Self::Constant { rate } => *rate,
        }
    }

    pub fn f_max(&self) -> f64 {
        match self {
            Self::SigmoidAffine { f_max, .. }
            | Self::ExpSaturating { f_max, .. }
            | Self::StpComposite { f_max, .. } => *f_max,
            Self::Constant { rate } => *rate,
        }
    }

    pub fn check(&self, d: usize) -> Result<()> {
        let (lo, hi) = (self.f_min(), self.f_max());
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(AlmError::Config(format!(
                "intensity bounds need 0 < f_min <= f_max < inf, got [{lo}, {hi}]"
            )));
        }
        match self {
            Self::SigmoidAffine { c_m, c_a, c_x, b, .. } | Self::ExpSaturating { c_m, c_a, c_x, b, .. } => {
                if c_m.len() != d {
                    return Err(AlmError::Config(format!(
                        "c_m has length {} but d = {d}",
                        c_m.len()
                    )));
                }
                if !(c_a.is_finite() && c_x.is_finite() && b.is_finite() && c_m.iter().all(|c| c.is_finite())) {
                    return Err(AlmError::Config("non-finite intensity coefficient".into()));
                }
            }
            Self::StpComposite { c_x, b, psi_amp, psi_rate, .. } => {
                if !(c_x.is_finite() && b.is_finite() && psi_amp.is_finite() && *psi_rate > 0.0) {
                    return Err(AlmError::Config("stp-composite needs finite c_x, b, psi_amp and psi_rate > 0".into()));
                }
            }
            Self::Constant { .. } => {}
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, psi: &PsiParams, a: f64, m: &[f64], x: f64) -> f64 {
        let v = match self {
            Self::SigmoidAffine { f_min, f_max, c_a, c_m, c_x, b } => {
                let z = c_a * psi.value(a) + dot(c_m, m) + c_x * x + b;
                f_min + (f_max - f_min) * logistic(z)
            }
            Self::ExpSaturating { f_min, f_max, c_a, c_m, c_x, b } => {
                let z = c_a * psi.value(a) + dot(c_m, m) + c_x * x + b;
                f_min + (f_max - f_min) * gumbel_sat(z)
            }
            Self::Constant { rate } => *rate,
            Self::StpComposite { f_min, f_max, c_x, b, psi_amp, psi_rate } => {
                let shape = -psi_amp * (-psi_rate * a).exp();
                f_min + (f_max - f_min) * logistic(c_x * (x + shape) + b)
            }
        };
        v.clamp(self.f_min(), self.f_max())
    }

    pub fn age_independent(&self) -> bool {
        match self {
            Self::SigmoidAffine { c_a, .. } | Self::ExpSaturating { c_a, .. } => *c_a == 0.0,
            Self::Constant { .. } => true,
            Self::StpComposite { psi_amp, c_x, .. } => *psi_amp == 0.0 || *c_x == 0.0,
        }
    }

    pub fn memory_independent(&self) -> bool {
        match self {
            Self::SigmoidAffine { c_m, .. } | Self::ExpSaturating { c_m, .. } => c_m.iter().all(|&c| c == 0.0),
            _ => true,
        }
    }

    pub fn signal_independent(&self) -> bool {
        match self {
            Self::SigmoidAffine { c_x, .. } | Self::ExpSaturating { c_x, .. } | Self::StpComposite { c_x, .. } => *c_x == 0.0,
            Self::Constant { .. } => true,
        }
    }

    /// Analytic Lipschitz constant in the metric |Δψ(a)| + ‖Δm‖₁ + |Δx|.
    /// `None` when the family is not Lipschitz in that metric.
    pub fn analytic_lipschitz(&self, psi: &PsiParams) -> Option<f64> {
        match self {
            Self::SigmoidAffine { f_min, f_max, c_a, c_m, c_x, .. } => {
                let c = c_m.iter().fold(c_a.abs().max(c_x.abs()), |acc, v| acc.max(v.abs()));
                Some(0.25 * (f_max - f_min) * c)
            }
            Self::ExpSaturating { f_min, f_max, c_a, c_m, c_x, .. } => {
                let c = c_m.iter().fold(c_a.abs().max(c_x.abs()), |acc, v| acc.max(v.abs()));
                Some((f_max - f_min) * (-1f64).exp() * c)
            }
            Self::Constant { .. } => Some(0.0),
            Self::StpComposite { f_min, f_max, c_x, psi_amp, psi_rate, .. } => {
                // Ψ as a function of ψ is −amp·(1 − ψ/K)^{rate·K/κ}.
                let p = psi_rate * psi.k / psi.kappa;
                if *psi_amp != 0.0 && p < 1.0 {
                    return None;
                }
                let l_shape = psi_amp.abs() * psi_rate / psi.kappa;
                Some(0.25 * (f_max - f_min) * c_x.abs() * l_shape.max(1.0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(c_x: f64) -> IntensitySpec {
        IntensitySpec::SigmoidAffine { f_min: 0.1, f_max: 1.1, c_a: 0.0, c_m: vec![0.0], c_x, b: 0.0 }
    }

    #[test]
    fn sigmoid_at_ln3() {
        let f = sig(1.0);
        let v = f.eval(&PsiParams::default(), 0.7, &[0.3], 3f64.ln());
        assert!((v - 0.85).abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients_give_midpoint() {
        let f = sig(0.0);
        let v = f.eval(&PsiParams::default(), 2.0, &[5.0], 9.0);
        assert!((v - 0.6).abs() < 1e-15);
    }

    #[test]
    fn constant_everywhere() {
        let f = IntensitySpec::constant(2.5);
        assert_eq!(f.eval(&PsiParams::default(), 1.0, &[1.0, 2.0], -3.0), 2.5);
    }

    #[test]
    fn bounds_checked() {
        assert!(IntensitySpec::constant(0.0).check(1).is_err());
        assert!(sig(1.0).check(2).is_err());
    }
}
