//! Shipped model presets. Every constant below is a documented default
//! chosen for order-one dynamics on a unit time scale.

use super::*;
use crate::error::{AlmError, Result};

pub const PRESET_NAMES: [&str; 4] = ["adaptation-1d", "stp", "plain-hawkes", "oracle-1d"];

/// Adaptation preset: f = f_min + (f_max − f_min)σ(m + x), memory kicked
/// down by `ADAPT_ALPHA` at each event, exponential coupling.
pub const ADAPT_F_MIN: f64 = 0.2;
pub const ADAPT_F_MAX: f64 = 2.0;
pub const ADAPT_LAMBDA: f64 = 1.0;
pub const ADAPT_ALPHA: f64 = -0.5;
pub const ADAPT_J: f64 = 1.0;
pub const ADAPT_TAU: f64 = 1.0;

/// Synaptic-resource preset in reflected coordinates m' = 1 − m: resources
/// recover at rate `STP_LAMBDA`, an event consumes the fraction `STP_ALPHA`,
/// and the emitted signal is scaled by the pre-event resource.
pub const STP_F_MIN: f64 = 0.2;
pub const STP_F_MAX: f64 = 2.0;
pub const STP_C_X: f64 = 2.0;
pub const STP_LAMBDA: f64 = 2.0;
pub const STP_ALPHA: f64 = 0.3;
pub const STP_J: f64 = 1.0;
pub const STP_TAU: f64 = 0.5;
pub const STP_H_MEAN: f64 = -0.25;
pub const STP_H_SD: f64 = 0.1;

/// Plain mean-field Hawkes preset: identity jump, rate driven by x only.
pub const HAWKES_F_MIN: f64 = 0.1;
pub const HAWKES_F_MAX: f64 = 1.5;
pub const HAWKES_C_X: f64 = 1.5;
pub const HAWKES_B: f64 = -0.5;
pub const HAWKES_J: f64 = 0.8;
pub const HAWKES_TAU: f64 = 1.0;

pub fn adaptation_1d() -> ModelSpec {
    ModelSpec {
        schema_version: SCHEMA_VERSION,
        d: 1,
        lambda: vec![ADAPT_LAMBDA],
        psi: PsiParams::default(),
        intensity: IntensitySpec::SigmoidAffine {
            f_min: ADAPT_F_MIN,
            f_max: ADAPT_F_MAX,
            c_a: 0.0,
            c_m: vec![1.0],
            c_x: 1.0,
            b: 0.0,
        },
        interaction: InteractionSpec::exponential(ADAPT_J, ADAPT_TAU),
        jump: JumpSpec::translation(vec![ADAPT_ALPHA]),
        init_law: InitLaw::Product {
            age: Law1d::Exponential { rate: 1.0 },
            memory: vec![Law1d::TruncatedGaussian { mean: 0.0, sd: 0.3, lo: -1.0, hi: 1.0 }],
        },
        baseline: BaselineSpec::Zero,
        coordinates: MemoryCoordinates::Native,
    }
}

pub fn stp() -> ModelSpec {
    ModelSpec {
        schema_version: SCHEMA_VERSION,
        d: 1,
        lambda: vec![STP_LAMBDA],
        psi: PsiParams::default(),
        intensity: IntensitySpec::StpComposite {
            f_min: STP_F_MIN,
            f_max: STP_F_MAX,
            c_x: STP_C_X,
            b: 0.0,
            psi_amp: 1.0,
            psi_rate: 1.0,
        },
        interaction: InteractionSpec {
            kernel: TemporalKernel::Exponential { amplitude: STP_J, tau: STP_TAU },
            modulation: Modulation::LinearInM { offset: 1.0, coef: vec![-1.0], bound: 1.0 },
        },
        jump: JumpSpec::AffineContraction { alpha: STP_ALPHA },
        init_law: InitLaw::Product {
            age: Law1d::Exponential { rate: 1.0 },
            memory: vec![Law1d::TruncatedGaussian { mean: 0.2, sd: 0.1, lo: 0.0, hi: 1.0 }],
        },
        baseline: BaselineSpec::ConstantRandom { mean: STP_H_MEAN, sd: STP_H_SD },
        coordinates: MemoryCoordinates::Reflected,
    }
}

pub fn plain_hawkes() -> ModelSpec {
    ModelSpec {
        schema_version: SCHEMA_VERSION,
        d: 1,
        lambda: vec![1.0],
        psi: PsiParams::default(),
        intensity: IntensitySpec::SigmoidAffine {
            f_min: HAWKES_F_MIN,
            f_max: HAWKES_F_MAX,
            c_a: 0.0,
            c_m: vec![0.0],
            c_x: HAWKES_C_X,
            b: HAWKES_B,
        },
        interaction: InteractionSpec::exponential(HAWKES_J, HAWKES_TAU),
        jump: JumpSpec::translation(vec![0.0]),
        init_law: InitLaw::Product {
            age: Law1d::Exponential { rate: 1.0 },
            memory: vec![Law1d::TruncatedGaussian { mean: 0.0, sd: 0.2, lo: -1.0, hi: 1.0 }],
        },
        baseline: BaselineSpec::Zero,
        coordinates: MemoryCoordinates::Native,
    }
}

/// Non-interacting d = 1 model with f_max = 1, small enough for the
/// jump-count expansion to be summed directly on [0, 1].
pub fn oracle_1d() -> ModelSpec {
    ModelSpec {
        schema_version: SCHEMA_VERSION,
        d: 1,
        lambda: vec![1.0],
        psi: PsiParams::default(),
        intensity: IntensitySpec::SigmoidAffine { f_min: 0.1, f_max: 1.0, c_a: 0.0, c_m: vec![1.5], c_x: 0.0, b: 0.0 },
        interaction: InteractionSpec::zero(),
        jump: JumpSpec::translation(vec![-0.4]),
        init_law: InitLaw::Product {
            age: Law1d::Exponential { rate: 1.0 },
            memory: vec![Law1d::TruncatedGaussian { mean: 0.0, sd: 0.3, lo: -1.2, hi: 1.2 }],
        },
        baseline: BaselineSpec::Zero,
        coordinates: MemoryCoordinates::Native,
    }
}

pub fn preset(name: &str) -> Result<ModelSpec> {
    match name {
        "adaptation-1d" => Ok(adaptation_1d()),
        "stp" => Ok(stp()),
        "plain-hawkes" => Ok(plain_hawkes()),
        "oracle-1d" => Ok(oracle_1d()),
        other => Err(AlmError::Config(format!(
            "unknown preset '{other}', expected one of {PRESET_NAMES:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_structurally_valid() {
        for name in PRESET_NAMES {
            preset(name).unwrap().check().unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn plain_hawkes_ignores_age_and_memory() {
        let s = plain_hawkes();
        assert!(s.jump.is_identity());
        assert!(s.intensity.age_independent() && s.intensity.memory_independent());
    }
}
