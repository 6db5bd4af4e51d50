//! Sampling-based checks of the standing model assumptions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{JumpSpec, ModelSpec};
use crate::rng::{self, label};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_samples: usize,
    pub seed: u64,
    pub sup_f: f64,
    /// ω, the smallest sampled rate.
    pub inf_f: f64,
    pub sup_h: f64,
    pub sup_gamma_jump: f64,
    pub gamma_jump_bounded: bool,
    pub lipschitz_f_sampled: f64,
    pub lipschitz_f_analytic: Option<f64>,
    pub lipschitz_h_sampled: f64,
    pub lipschitz_h_analytic: f64,
    pub gamma_lipschitz_ratio: f64,
    pub roundtrip_error: f64,
    pub checks: Vec<AssumptionCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn check(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.id, c.detail)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub const BOUNDED_LIPSCHITZ: &str = "bounded-lipschitz";
pub const GAMMA_ONE_LIPSCHITZ: &str = "gamma-one-lipschitz";
pub const INITIAL_CONDITIONS: &str = "initial-conditions";
pub const AGE_FREE_FUNCTIONS: &str = "age-free-functions";
pub const GAMMA_DIFFEOMORPHISM: &str = "gamma-diffeomorphism";

const LIP_SLACK: f64 = 1e-6;

struct Domain {
    m_box: Vec<(f64, f64)>,
    a_max: f64,
    x_max: f64,
    t_max: f64,
}

fn sampling_domain(spec: &ModelSpec) -> Domain {
    let m_box = match spec.invariant_box() {
        Some(b) => b,
        None => (0..spec.d)
            .map(|k| {
                let (lo, hi) = spec.init_law.memory_range(k, 1e-6);
                let g = match &spec.jump {
                    JumpSpec::Translation { alpha } => alpha[k].abs(),
                    _ => 1.0,
                };
                let pad = 1.0 + 4.0 * g * (spec.f_max() / spec.lambda[k] + 1.0);
                (lo.min(0.0) - pad, hi.max(0.0) + pad)
            })
            .collect(),
    };
    let x_max = 1.0 + 2.0 * (spec.h_bar().sup_abs() + 5.0 * spec.interaction.sup() * spec.f_max());
    Domain { m_box, a_max: 20.0, x_max, t_max: 5.0 * spec.interaction.kernel.tau() }
}

fn draw_state<R: Rng>(rng: &mut R, dom: &Domain) -> (f64, Vec<f64>, f64) {
    let u: f64 = rng.random();
    let a = dom.a_max * u * u;
    let m = dom.m_box.iter().map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo)).collect();
    let x = dom.x_max * (2.0 * rng.random::<f64>() - 1.0);
    (a, m, x)
}

fn nudge<R: Rng>(rng: &mut R, a: f64, m: &[f64], x: f64, dom: &Domain) -> (f64, Vec<f64>, f64) {
    let s = 1e-3;
    let a2 = (a + s * (2.0 * rng.random::<f64>() - 1.0)).max(0.0);
    let m2 = m
        .iter()
        .zip(&dom.m_box)
        .map(|(&v, &(lo, hi))| (v + s * (hi - lo) * (2.0 * rng.random::<f64>() - 1.0)).clamp(lo, hi))
        .collect();
    let x2 = x + s * (2.0 * rng.random::<f64>() - 1.0);
    (a2, m2, x2)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Samples the model functions and reports each standing assumption.
/// Failures are report entries, never errors.
pub fn validate_assumptions(spec: &ModelSpec, n_samples: usize, seed: u64) -> ValidationReport {
    let mut checks = Vec::new();
    if let Err(e) = spec.check() {
        checks.push(AssumptionCheck { id: "structure".into(), passed: false, detail: e.to_string() });
        return ValidationReport {
            n_samples,
            seed,
            sup_f: f64::NAN,
            inf_f: f64::NAN,
            sup_h: f64::NAN,
            sup_gamma_jump: f64::NAN,
            gamma_jump_bounded: false,
            lipschitz_f_sampled: f64::NAN,
            lipschitz_f_analytic: None,
            lipschitz_h_sampled: f64::NAN,
            lipschitz_h_analytic: f64::NAN,
            gamma_lipschitz_ratio: f64::NAN,
            roundtrip_error: f64::NAN,
            checks,
            passed: false,
        };
    }

    let dom = sampling_domain(spec);
    let mut rng = rng::stream(seed, &[label::VALIDATE]);
    let psi = &spec.psi;
    let n = n_samples.max(2);

    let mut sup_f = f64::NEG_INFINITY;
    let mut inf_f = f64::INFINITY;
    let mut sup_h = 0.0f64;
    let mut lip_f = 0.0f64;
    let mut lip_h = 0.0f64;
    let mut sup_gj = 0.0f64;
    let mut gamma_ratio = 0.0f64;
    let mut roundtrip = 0.0f64;
    let mut inverse_error: Option<String> = None;
    let mut logdet_finite = true;

    for i in 0..n {
        let (a, m, x) = draw_state(&mut rng, &dom);
        let (a2, m2, x2) = if i % 2 == 0 { draw_state(&mut rng, &dom) } else { nudge(&mut rng, a, &m, x, &dom) };
        let fa = spec.f(a, &m, x);
        let fb = spec.f(a2, &m2, x2);
        sup_f = sup_f.max(fa);
        inf_f = inf_f.min(fa);
        let dist = (psi.value(a) - psi.value(a2)).abs() + l1(&m, &m2) + (x - x2).abs();
        if dist > 0.0 {
            lip_f = lip_f.max((fa - fb).abs() / dist);
        }

        let t = dom.t_max * rng.random::<f64>();
        let t2 = if i % 2 == 0 { dom.t_max * rng.random::<f64>() } else { (t + 1e-3 * rng.random::<f64>()).max(0.0) };
        let ha = spec.h(t, a, &m);
        let hb = spec.h(t2, a2, &m2);
        sup_h = sup_h.max(ha.abs());
        let dist_h = (t - t2).abs() + (psi.value(a) - psi.value(a2)).abs() + l1(&m, &m2);
        if dist_h > 0.0 {
            lip_h = lip_h.max((ha - hb).abs() / dist_h);
        }

        sup_gj = sup_gj.max(spec.jump.big_gamma(&m).iter().map(|v| v.abs()).sum());
        let dm = l1(&m, &m2);
        if dm > 0.0 {
            let dg: f64 = spec.jump.diff(&m, &m2).iter().map(|v| v.abs()).sum();
            gamma_ratio = gamma_ratio.max(dg / dm);
        }

        match spec.jump.inverse(&spec.jump.apply(&m)) {
            Ok(back) => roundtrip = roundtrip.max(l1(&back, &m)),
            Err(e) => inverse_error = Some(e.to_string()),
        }
        if inverse_error.is_none() {
            match spec.jump.logdet_inverse(&m) {
                Ok(v) if v.is_finite() => {}
                _ => logdet_finite = false,
            }
        }
    }

    let lip_f_analytic = spec.intensity.analytic_lipschitz(psi);
    let lip_h_analytic = spec.interaction.analytic_lipschitz();
    let gamma_bounded = match &spec.jump {
        JumpSpec::Translation { .. } | JumpSpec::AffineContraction { .. } => true,
        JumpSpec::Custom { map } => match map {
            super::CustomJump::Scale { factor } => *factor == 1.0,
            super::CustomJump::TanhShrink { .. } => true,
        },
    };

    // Boundedness and Lipschitz continuity of f, h and Γ.
    let mut detail = Vec::new();
    let mut ok = true;
    if !(inf_f > 0.0 && spec.f_min() > 0.0) {
        ok = false;
        detail.push(format!("rate lower bound {inf_f} not positive"));
    }
    match lip_f_analytic {
        Some(l) if lip_f <= l * (1.0 + LIP_SLACK) + 1e-12 => {}
        Some(l) => {
            ok = false;
            detail.push(format!("sampled L_f {lip_f} exceeds analytic {l}"));
        }
        None => {
            ok = false;
            detail.push("f is not Lipschitz in the psi-metric".into());
        }
    }
    if lip_h > lip_h_analytic * (1.0 + LIP_SLACK) + 1e-12 {
        ok = false;
        detail.push(format!("sampled L_h {lip_h} exceeds analytic {lip_h_analytic}"));
    }
    if !gamma_bounded {
        ok = false;
        detail.push("jump function is unbounded".into());
    }
    checks.push(AssumptionCheck {
        id: BOUNDED_LIPSCHITZ.into(),
        passed: ok,
        detail: if ok { format!("L_f ~ {lip_f:.3e}, L_h ~ {lip_h:.3e}, omega = {inf_f:.3e}") } else { detail.join("; ") },
    });

    let g_ok = gamma_ratio <= 1.0 + 1e-9;
    checks.push(AssumptionCheck {
        id: GAMMA_ONE_LIPSCHITZ.into(),
        passed: g_ok,
        detail: format!("max sampled ratio {gamma_ratio}"),
    });

    let mut init_ok = true;
    let mut init_detail = String::from("initial law valid");
    if let Some(b) = spec.invariant_box() {
        for (k, &(lo, hi)) in b.iter().enumerate() {
            let (slo, shi) = spec.init_law.memory_support(k);
            if slo < lo || shi > hi {
                init_ok = false;
                init_detail = format!("initial memory support [{slo}, {shi}] leaves the invariant box [{lo}, {hi}]");
            }
        }
    }
    checks.push(AssumptionCheck { id: INITIAL_CONDITIONS.into(), passed: init_ok, detail: init_detail });

    let age_free = spec.age_independent();
    checks.push(AssumptionCheck {
        id: AGE_FREE_FUNCTIONS.into(),
        passed: true,
        detail: if age_free { "f and h ignore age".into() } else { "not applicable: f or h depends on age".into() },
    });

    let (d_ok, d_detail) = match &inverse_error {
        Some(e) => (false, e.clone()),
        None if roundtrip > 1e-9 => (false, format!("round-trip error {roundtrip}")),
        None if !logdet_finite => (false, "inverse Jacobian degenerate".into()),
        None => (true, format!("round-trip error {roundtrip:.3e}")),
    };
    checks.push(AssumptionCheck { id: GAMMA_DIFFEOMORPHISM.into(), passed: d_ok, detail: d_detail });

    let passed = checks.iter().all(|c| c.passed);
    ValidationReport {
        n_samples: n,
        seed,
        sup_f,
        inf_f,
        sup_h,
        sup_gamma_jump: sup_gj,
        gamma_jump_bounded: gamma_bounded,
        lipschitz_f_sampled: lip_f,
        lipschitz_f_analytic: lip_f_analytic,
        lipschitz_h_sampled: lip_h,
        lipschitz_h_analytic: lip_h_analytic,
        gamma_lipschitz_ratio: gamma_ratio,
        roundtrip_error: if inverse_error.is_some() { f64::INFINITY } else { roundtrip },
        checks,
        passed,
    }
}
