use serde::{Deserialize, Serialize};

use super::psi::PsiParams;
use crate::error::{AlmError, Result};

/// Temporal part k(t) of the interaction h(t, a, m) = k(t)·g(a, m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TemporalKernel {
    /// J e^{−t/τ}
    Exponential { amplitude: f64, tau: f64 },
    /// J (t/τ) e^{−t/τ}
    Erlang { amplitude: f64, tau: f64 },
    /// J (1 − (t/τ)²)² on [0, τ), zero afterwards.
    FiniteSupportSmooth { amplitude: f64, tau: f64 },
}

/// State modulation g(a, m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "modulation", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Modulation {
    #[default]
    None,
    /// clamp(offset + coef·m, −bound, bound)
    LinearInM { offset: f64, coef: Vec<f64>, bound: f64 },
    /// scale·tanh(c_a ψ(a) + c_m·m + b)
    CustomBounded { scale: f64, c_a: f64, c_m: Vec<f64>, b: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub kernel: TemporalKernel,
    #[serde(default)]
    pub modulation: Modulation,
}

pub const PRUNE_EPS: f64 = 1e-12;

impl TemporalKernel {
    pub fn amplitude(&self) -> f64 {
        match self {
            Self::Exponential { amplitude, .. }
            | Self::Erlang { amplitude, .. }
            | Self::FiniteSupportSmooth { amplitude, .. } => *amplitude,
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            Self::Exponential { tau, .. } | Self::Erlang { tau, .. } | Self::FiniteSupportSmooth { tau, .. } => *tau,
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { amplitude, tau } => amplitude * (-t / tau).exp(),
            Self::Erlang { amplitude, tau } => amplitude * (t / tau) * (-t / tau).exp(),
            Self::FiniteSupportSmooth { amplitude, tau } => {
                if t >= tau {
                    0.0
                } else {
                    let s = t / tau;
                    let w = 1.0 - s * s;
                    amplitude * w * w
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Self::Exponential { amplitude, .. } | Self::FiniteSupportSmooth { amplitude, .. } => amplitude.abs(),
            Self::Erlang { amplitude, .. } => amplitude.abs() * (-1f64).exp(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Self::Exponential { amplitude, tau } | Self::Erlang { amplitude, tau } => amplitude.abs() / tau,
            Self::FiniteSupportSmooth { amplitude, tau } => amplitude.abs() * 8.0 / (3.0 * 3f64.sqrt()) / tau,
        }
    }

    /// Age of an event after which |k| stays below `PRUNE_EPS`.
    pub fn horizon(&self) -> f64 {
        let j = self.amplitude().abs();
        if j <= PRUNE_EPS {
            return 0.0;
        }
        match *self {
            Self::Exponential { tau, .. } => tau * (j / PRUNE_EPS).ln(),
            Self::FiniteSupportSmooth { tau, .. } => tau,
            Self::Erlang { tau, .. } => {
                let mut t = tau;
                while self.value(t).abs() >= PRUNE_EPS {
                    t *= 1.25;
                }
                t
            }
        }
    }
}

impl Modulation {
    #[inline]
    pub fn value(&self, psi: &PsiParams, a: f64, m: &[f64]) -> f64 {
        match self {
            Self::None => 1.0,
            Self::LinearInM { offset, coef, bound } => {
                let v = offset + coef.iter().zip(m).map(|(c, x)| c * x).sum::<f64>();
                v.clamp(-bound, *bound)
            }
            Self::CustomBounded { scale, c_a, c_m, b } => {
                let z = c_a * psi.value(a) + c_m.iter().zip(m).map(|(c, x)| c * x).sum::<f64>() + b;
                scale * z.tanh()
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Self::None => 1.0,
            Self::LinearInM { bound, .. } => bound.abs(),
            Self::CustomBounded { scale, .. } => scale.abs(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::None => 0.0,
            Self::LinearInM { coef, .. } => coef.iter().fold(0.0f64, |a, c| a.max(c.abs())),
            Self::CustomBounded { scale, c_a, c_m, .. } => {
                scale.abs() * c_m.iter().fold(c_a.abs(), |a, c| a.max(c.abs()))
            }
        }
    }

    pub fn age_independent(&self) -> bool {
        match self {
            Self::CustomBounded { c_a, .. } => *c_a == 0.0,
            _ => true,
        }
    }
}

impl InteractionSpec {
    pub fn exponential(amplitude: f64, tau: f64) -> Self {
        Self { kernel: TemporalKernel::Exponential { amplitude, tau }, modulation: Modulation::None }
    }

    pub fn zero() -> Self {
        Self::exponential(0.0, 1.0)
    }

    pub fn check(&self, d: usize) -> Result<()> {
        let tau = self.kernel.tau();
        if !(tau > 0.0 && tau.is_finite() && self.kernel.amplitude().is_finite()) {
            return Err(AlmError::Config(format!("interaction kernel needs tau > 0, got {tau}")));
        }
        match &self.modulation {
            Modulation::None => {}
            Modulation::LinearInM { coef, bound, .. } => {
                if coef.len() != d || !(*bound > 0.0 && bound.is_finite()) {
                    return Err(AlmError::Config("linear-in-m modulation needs d coefficients and a finite bound".into()));
                }
            }
            Modulation::CustomBounded { c_m, scale, .. } => {
                if c_m.len() != d || !scale.is_finite() {
                    return Err(AlmError::Config("custom-bounded modulation needs d coefficients".into()));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, psi: &PsiParams, t: f64, a: f64, m: &[f64]) -> f64 {
        let k = self.kernel.value(t);
        if k == 0.0 {
            return 0.0;
        }
        k * self.modulation.value(psi, a, m)
    }

    pub fn is_zero(&self) -> bool {
        self.kernel.amplitude() == 0.0
    }

    pub fn sup(&self) -> f64 {
        self.kernel.sup() * self.modulation.sup()
    }

    /// Analytic Lipschitz constant in |Δt| + |Δψ(a)| + ‖Δm‖₁.
    pub fn analytic_lipschitz(&self) -> f64 {
        self.kernel.lipschitz() * self.modulation.sup() + self.kernel.sup() * self.modulation.lipschitz()
    }

    pub fn age_independent(&self) -> bool {
        self.modulation.age_independent()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erlang_peak() {
        let k = TemporalKernel::Erlang { amplitude: 2.0, tau: 0.5 };
        assert!((k.value(0.5) - k.sup()).abs() < 1e-15);
    }

    #[test]
    fn horizon_prunes() {
        for k in [
            TemporalKernel::Exponential { amplitude: 3.0, tau: 0.7 },
            TemporalKernel::Erlang { amplitude: 3.0, tau: 0.7 },
            TemporalKernel::FiniteSupportSmooth { amplitude: 3.0, tau: 0.7 },
        ] {
            let h = k.horizon();
            assert!(k.value(h).abs() <= PRUNE_EPS * 1.0001);
            assert!(k.value(2.0 * h).abs() <= PRUNE_EPS);
        }
    }

    #[test]
    fn stp_modulation_is_resource() {
        let g = Modulation::LinearInM { offset: 1.0, coef: vec![-1.0], bound: 1.0 };
        assert!((g.value(&PsiParams::default(), 0.0, &[0.3]) - 0.7).abs() < 1e-15);
    }
}
