//! Self-exciting form of the translation-jump model in d = 1: the memory is
//! rebuilt from scratch as M₀e^{−Λt} + α Σ_{own events s < t} e^{−Λ(t−s)}.

use super::{
    candidate_stream, check_run_args, draw_initial, empirical_baseline, EventRecord, SignalSum, SimulationRecord,
};
use crate::error::{AlmError, Result};
use crate::model::{JumpSpec, ModelSpec};

pub fn simulate_equivalent_hawkes(spec: &ModelSpec, n: usize, t_end: f64, seed: u64) -> Result<SimulationRecord> {
    check_run_args(n, t_end, &[])?;
    spec.check()?;
    let alpha = match &spec.jump {
        JumpSpec::Translation { alpha } if spec.d == 1 => alpha[0],
        _ => {
            return Err(AlmError::Config(
                "self-exciting form needs d = 1 and a translation jump".into(),
            ))
        }
    };
    let lambda = spec.lambda[0];
    let (draws, consts) = draw_initial(spec, n, seed);
    let h_emp = empirical_baseline(spec, &draws, &consts);
    let interacting = !spec.interaction.is_zero();
    let mut sig = SignalSum::new(&spec.interaction.kernel, false);
    let mut stream = candidate_stream(spec, n, seed);
    let inv_n = 1.0 / n as f64;
    let f_max = spec.f_max();
    let mut own: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut events = Vec::new();
    let mut n_candidates = 0u64;
    let mut t = 0.0;
    loop {
        let c = stream.next_candidate();
        t += c.dt;
        if t > t_end {
            break;
        }
        n_candidates += 1;
        let i = c.index;
        let (a0, ref m0) = draws[i];
        let age = own[i].last().map_or(a0 + t, |s| t - s);
        let self_part: f64 = own[i].iter().map(|s| (-lambda * (t - s)).exp()).sum();
        let m = [m0[0] * (-lambda * t).exp() + alpha * self_part];
        let x = h_emp.eval(t) + if interacting { inv_n * sig.value(t) } else { 0.0 };
        if c.u * f_max < spec.f(age, &m, x) {
            if interacting {
                sig.push(t, spec.interaction.modulation.value(&spec.psi, age, &m));
            }
            own[i].push(t);
            events.push(EventRecord { time: t, neuron: i, age_before: age, memory_before: m.to_vec() });
        }
    }
    Ok(SimulationRecord {
        spec_hash: spec.hash(),
        n,
        t_end,
        seed,
        n_events: events.len(),
        events,
        n_candidates,
        snapshots: Vec::new(),
        x_path_emp: Vec::new(),
    })
}
