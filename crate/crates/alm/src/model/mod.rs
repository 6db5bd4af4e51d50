//! Model ingredients and the single `ModelSpec` shared by every solver.

mod baseline;
mod init;
mod intensity;
mod interaction;
mod jump;
pub mod presets;
mod psi;
mod validate;

pub use baseline::{BaselineCurve, BaselineSpec};
pub use init::{InitLaw, Law1d, TabulatedDensity};
pub use intensity::{logistic, IntensitySpec};
pub use interaction::{InteractionSpec, Modulation, TemporalKernel, PRUNE_EPS};
pub use jump::{determinant, finite_difference_jacobian, CustomJump, JumpSpec};
pub use psi::{psi_eval, PsiParams};
pub use validate::{validate_assumptions, AssumptionCheck, ValidationReport};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AlmError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// How memory coordinates are shown to users.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryCoordinates {
    #[default]
    Native,
    /// Internal m' = 1 − m; exports map back to m.
    Reflected,
}

impl MemoryCoordinates {
    #[inline]
    pub fn to_user(&self, v: f64) -> f64 {
        match self {
            Self::Native => v,
            Self::Reflected => 1.0 - v,
        }
    }

    #[inline]
    pub fn from_user(&self, v: f64) -> f64 {
        self.to_user(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub schema_version: u32,
    pub d: usize,
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub psi: PsiParams,
    pub intensity: IntensitySpec,
    pub interaction: InteractionSpec,
    pub jump: JumpSpec,
    pub init_law: InitLaw,
    #[serde(default)]
    pub baseline: BaselineSpec,
    #[serde(default)]
    pub coordinates: MemoryCoordinates,
}

impl ModelSpec {
    /// Structural checks; the numerical assumption checks live in
    /// [`validate_assumptions`].
    pub fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(AlmError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.d == 0 {
            return Err(AlmError::Config("d must be positive".into()));
        }
        if self.lambda.len() != self.d || self.lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(AlmError::Config("lambda needs d positive finite entries".into()));
        }
        self.psi.check()?;
        self.intensity.check(self.d)?;
        self.interaction.check(self.d)?;
        self.jump.check(self.d)?;
        self.init_law.check(self.d)?;
        self.baseline.check(self.d)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).expect("spec serializes");
        hex_digest(s.as_bytes())
    }

    #[inline]
    pub fn f(&self, a: f64, m: &[f64], x: f64) -> f64 {
        self.intensity.eval(&self.psi, a, m, x)
    }

    #[inline]
    pub fn h(&self, t: f64, a: f64, m: &[f64]) -> f64 {
        self.interaction.eval(&self.psi, t, a, m)
    }

    #[inline]
    pub fn f_max(&self) -> f64 {
        self.intensity.f_max()
    }

    #[inline]
    pub fn f_min(&self) -> f64 {
        self.intensity.f_min()
    }

    pub fn trace_lambda(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// m ← e^{−Λ·dt} m.
    #[inline]
    pub fn decay_in_place(&self, m: &mut [f64], dt: f64) {
        for (v, l) in m.iter_mut().zip(&self.lambda) {
            *v *= (-l * dt).exp();
        }
    }

    /// H̄_t = E[H_t].
    pub fn h_bar(&self) -> BaselineCurve {
        let mean = self.init_law.memory_mean(self.d);
        self.baseline.mean_curve(&self.lambda, &mean)
    }

    pub fn age_independent(&self) -> bool {
        self.intensity.age_independent() && self.interaction.age_independent()
    }

    /// Memory box used when the spec itself does not fix one.
    pub fn invariant_box(&self) -> Option<Vec<(f64, f64)>> {
        self.jump.invariant_box(self.d)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_unknown_fields() {
        let spec = presets::preset("adaptation-1d").unwrap();
        let s = spec.to_json();
        let back = ModelSpec::from_json(&s).unwrap();
        assert_eq!(spec, back);
        assert_eq!(spec.hash(), back.hash());
        let mut v: serde_json::Value = serde_json::from_str(&s).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(ModelSpec::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn schema_version_enforced() {
        let mut spec = presets::preset("stp").unwrap();
        spec.schema_version = 99;
        assert!(spec.check().is_err());
    }
}
