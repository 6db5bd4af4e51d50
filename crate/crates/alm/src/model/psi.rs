use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};

/// Saturating age transform ψ(a) = K(1 − e^{−aκ/K}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiParams {
    pub k: f64,
    pub kappa: f64,
}

impl Default for PsiParams {
    fn default() -> Self {
        Self { k: 1.0, kappa: 1.0 }
    }
}

impl PsiParams {
    pub fn new(k: f64, kappa: f64) -> Result<Self> {
        let p = Self { k, kappa };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite() && self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(AlmError::Config(format!(
                "psi needs K > 0 and kappa > 0, got K = {}, kappa = {}",
                self.k, self.kappa
            )));
        }
        Ok(())
    }

    /// ψ(a) without the domain check.
    #[inline]
    pub fn value(&self, a: f64) -> f64 {
        -self.k * (-a * self.kappa / self.k).exp_m1()
    }

    #[inline]
    pub fn derivative(&self, a: f64) -> f64 {
        self.kappa * (-a * self.kappa / self.k).exp()
    }

    pub fn eval(&self, a: f64) -> Result<f64> {
        if a.is_nan() || a < 0.0 {
            return Err(AlmError::Domain(format!("psi is defined for a >= 0, got {a}")));
        }
        Ok(self.value(a))
    }
}

pub fn psi_eval(a: f64, p: &PsiParams) -> Result<f64> {
    p.eval(a)
}
