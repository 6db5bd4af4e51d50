use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};

/// Family of the exogenous per-neuron baseline H_t(i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineSpec {
    #[default]
    Zero,
    /// H_t(i) = C_i with C_i ~ N(mean, sd²).
    ConstantRandom { mean: f64, sd: f64 },
    /// H_t(i) = Σ_k coef_k M₀_k(i) e^{−Λ_k t}.
    ExpDecayFromM0 { coef: Vec<f64> },
}

/// c + Σ_k w_k e^{−Λ_k t}: the shape of both H̄ and its empirical version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineCurve {
    pub constant: f64,
    pub decay: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl BaselineCurve {
    pub fn zero(lambda: &[f64]) -> Self {
        Self { constant: 0.0, decay: vec![0.0; lambda.len()], lambda: lambda.to_vec() }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.constant;
        for (w, l) in self.decay.iter().zip(&self.lambda) {
            if *w != 0.0 {
                v += w * (-l * t).exp();
            }
        }
        v
    }

    pub fn sup_abs(&self) -> f64 {
        self.constant.abs() + self.decay.iter().map(|w| w.abs()).sum::<f64>()
    }

    /// Lipschitz constant on [0, ∞).
    pub fn lipschitz(&self) -> f64 {
        self.decay.iter().zip(&self.lambda).map(|(w, l)| (w * l).abs()).sum()
    }
}

impl BaselineSpec {
    pub fn check(&self, d: usize) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::ConstantRandom { mean, sd } if mean.is_finite() && *sd >= 0.0 && sd.is_finite() => Ok(()),
            Self::ExpDecayFromM0 { coef } if coef.len() == d && coef.iter().all(|c| c.is_finite()) => Ok(()),
            _ => Err(AlmError::Config(format!("invalid baseline {self:?}"))),
        }
    }

    /// E[H_t] given E[M₀].
    pub fn mean_curve(&self, lambda: &[f64], m0_mean: &[f64]) -> BaselineCurve {
        let mut c = BaselineCurve::zero(lambda);
        match self {
            Self::Zero => {}
            Self::ConstantRandom { mean, .. } => c.constant = *mean,
            Self::ExpDecayFromM0 { coef } => {
                for k in 0..lambda.len() {
                    c.decay[k] = coef[k] * m0_mean[k];
                }
            }
        }
        c
    }

    /// Per-neuron random constant, drawn only for the constant-random family.
    pub fn draw_constant<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::ConstantRandom { mean, sd } => {
                if *sd == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *sd).expect("valid normal").sample(rng)
                }
            }
            _ => 0.0,
        }
    }

    /// (1/N) Σ_j H_t(j) from per-neuron constants and initial memories.
    pub fn empirical_curve(&self, lambda: &[f64], constants: &[f64], m0: &[Vec<f64>]) -> BaselineCurve {
        let n = m0.len().max(1) as f64;
        let mut c = BaselineCurve::zero(lambda);
        match self {
            Self::Zero => {}
            Self::ConstantRandom { .. } => c.constant = crate::par::pairwise_sum(constants) / n,
            Self::ExpDecayFromM0 { coef } => {
                for k in 0..lambda.len() {
                    let col: Vec<f64> = m0.iter().map(|m| m[k]).collect();
                    c.decay[k] = coef[k] * crate::par::pairwise_sum(&col) / n;
                }
            }
        }
        c
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::ConstantRandom { sd, .. } => *sd == 0.0,
            Self::ExpDecayFromM0 { coef } => coef.iter().all(|&c| c == 0.0),
        }
    }
}
