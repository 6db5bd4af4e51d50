//! Exact event-driven simulation of the finite-N network by thinning.
//!
//! One dominating clock at rate N·f_max proposes (time, neuron, uniform)
//! triples. Neuron states are stored lazily: each neuron keeps the time of
//! its last update, and its age and memory at a later time follow in closed
//! form from the drift flow.

mod coupled;
mod equivalent;
mod export;
mod signal;

pub use coupled::{simulate_coupled_pair, CoupledRunSummary, ReplicaCoupling};
pub use equivalent::simulate_equivalent_hawkes;
pub use export::{read_events_csv, write_events_csv, write_metadata_json, write_snapshots_csv, RunMetadata};
pub use signal::SignalSum;

use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};
use crate::model::{validate_assumptions, BaselineCurve, ModelSpec};
use crate::rng::{self, label, CandidateStream};

pub const DEFAULT_EVENT_CAP: usize = 10_000_000;
pub const DEFAULT_VALIDATION_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub neuron: usize,
    pub age_before: f64,
    pub memory_before: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub ages: Vec<f64>,
    pub memories: Vec<Vec<f64>>,
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub spec_hash: String,
    pub n: usize,
    pub t_end: f64,
    pub seed: u64,
    pub events: Vec<EventRecord>,
    pub n_events: usize,
    pub n_candidates: u64,
    pub snapshots: Vec<Snapshot>,
    pub x_path_emp: Vec<(f64, f64)>,
}

/// Point set (1/N) Σ δ_{(A_t(i), M_t(i))}.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    pub t: f64,
    pub ages: Vec<f64>,
    pub memories: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub event_cap: usize,
    /// Force the list-based interaction sum even when a trace exists.
    pub lazy_signal: bool,
    pub record_events: bool,
    pub validation_samples: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            event_cap: DEFAULT_EVENT_CAP,
            lazy_signal: false,
            record_events: true,
            validation_samples: DEFAULT_VALIDATION_SAMPLES,
        }
    }
}

/// Lazily advanced (age, memory) of a population.
#[derive(Clone, Debug)]
pub(crate) struct Population {
    d: usize,
    age_ref: Vec<f64>,
    mem_ref: Vec<f64>,
    t_ref: Vec<f64>,
}

impl Population {
    pub(crate) fn new(d: usize, draws: &[(f64, Vec<f64>)]) -> Self {
        let mut mem_ref = Vec::with_capacity(draws.len() * d);
        for (_, m) in draws {
            mem_ref.extend_from_slice(m);
        }
        Self { d, age_ref: draws.iter().map(|(a, _)| *a).collect(), mem_ref, t_ref: vec![0.0; draws.len()] }
    }

    /// Age at `t`, memory written to `m`.
    #[inline]
    pub(crate) fn state_at(&self, spec: &ModelSpec, i: usize, t: f64, m: &mut [f64]) -> f64 {
        let dt = t - self.t_ref[i];
        let base = &self.mem_ref[i * self.d..(i + 1) * self.d];
        for k in 0..self.d {
            m[k] = base[k] * (-spec.lambda[k] * dt).exp();
        }
        self.age_ref[i] + dt
    }

    /// Event of neuron `i` at `t` from pre-event memory `m_before`.
    #[inline]
    pub(crate) fn fire(&mut self, spec: &ModelSpec, i: usize, t: f64, m_before: &[f64]) {
        self.age_ref[i] = 0.0;
        self.t_ref[i] = t;
        let slot = &mut self.mem_ref[i * self.d..(i + 1) * self.d];
        for k in 0..self.d {
            slot[k] = spec.jump.apply_component(k, m_before[k]);
        }
    }

    pub(crate) fn snapshot(&self, spec: &ModelSpec, t: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.age_ref.len();
        let mut ages = Vec::with_capacity(n);
        let mut mems = Vec::with_capacity(n);
        for i in 0..n {
            let mut m = vec![0.0; self.d];
            ages.push(self.state_at(spec, i, t, &mut m));
            mems.push(m);
        }
        (ages, mems)
    }
}

/// Initial (age, memory) draws and per-neuron baseline constants for a run.
pub(crate) fn draw_initial(spec: &ModelSpec, n: usize, seed: u64) -> (Vec<(f64, Vec<f64>)>, Vec<f64>) {
    let mut r_init = rng::stream(seed, &[label::INIT]);
    let draws: Vec<(f64, Vec<f64>)> = (0..n).map(|_| spec.init_law.sample(&mut r_init)).collect();
    let mut r_base = rng::stream(seed, &[label::BASELINE]);
    let consts: Vec<f64> = (0..n).map(|_| spec.baseline.draw_constant(&mut r_base)).collect();
    (draws, consts)
}

pub(crate) fn empirical_baseline(spec: &ModelSpec, draws: &[(f64, Vec<f64>)], consts: &[f64]) -> BaselineCurve {
    let m0: Vec<Vec<f64>> = draws.iter().map(|(_, m)| m.clone()).collect();
    spec.baseline.empirical_curve(&spec.lambda, consts, &m0)
}

pub(crate) fn candidate_stream(spec: &ModelSpec, n: usize, seed: u64) -> CandidateStream {
    CandidateStream::new(rng::stream(seed, &[label::CANDIDATES]), n as f64 * spec.f_max(), n)
}

pub(crate) fn check_run_args(n: usize, t_end: f64, save_times: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(AlmError::Config("N must be at least 1".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(AlmError::Config(format!("T must be positive, got {t_end}")));
    }
    if save_times.windows(2).any(|w| w[1] < w[0]) || save_times.iter().any(|&s| !(0.0..=t_end).contains(&s)) {
        return Err(AlmError::Config("save times must be sorted and inside [0, T]".into()));
    }
    Ok(())
}

/// Validated simulator for repeated runs of one spec.
pub struct Simulator<'a> {
    spec: &'a ModelSpec,
    opts: SimOptions,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a ModelSpec, opts: SimOptions) -> Result<Self> {
        let report = validate_assumptions(spec, opts.validation_samples, 0);
        if !report.passed {
            return Err(AlmError::Validation(report.failures().join("; ")));
        }
        Ok(Self { spec, opts })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn run(&self, n: usize, t_end: f64, seed: u64, save_times: &[f64]) -> Result<SimulationRecord> {
        check_run_args(n, t_end, save_times)?;
        let spec = self.spec;
        let d = spec.d;
        let (draws, consts) = draw_initial(spec, n, seed);
        let h_emp = empirical_baseline(spec, &draws, &consts);
        let h_sup = h_emp.sup_abs();
        let h_norm = spec.interaction.sup();
        let interacting = !spec.interaction.is_zero();
        let mut pop = Population::new(d, &draws);
        let mut sig = SignalSum::new(&spec.interaction.kernel, self.opts.lazy_signal);
        let mut stream = candidate_stream(spec, n, seed);
        let inv_n = 1.0 / n as f64;
        let f_max = spec.f_max();

        let mut events = Vec::new();
        let mut n_events = 0usize;
        let mut n_candidates = 0u64;
        let mut snapshots = Vec::with_capacity(save_times.len());
        let mut x_emp = Vec::with_capacity(save_times.len());
        let mut next_save = 0usize;
        let mut t = 0.0;
        let mut m = vec![0.0; d];

        loop {
            let c = stream.next_candidate();
            let tc = t + c.dt;
            while next_save < save_times.len() && save_times[next_save] < tc {
                let s = save_times[next_save];
                let x = h_emp.eval(s) + if interacting { inv_n * sig.value(s) } else { 0.0 };
                let (ages, memories) = pop.snapshot(spec, s);
                snapshots.push(Snapshot { t: s, ages, memories, x });
                x_emp.push((s, x));
                next_save += 1;
            }
            if tc > t_end {
                break;
            }
            t = tc;
            n_candidates += 1;
            let i = c.index;
            let age = pop.state_at(spec, i, t, &mut m);
            let x = h_emp.eval(t) + if interacting { inv_n * sig.value(t) } else { 0.0 };
            let bound = h_sup + h_norm * n_events as f64 * inv_n;
            if x.abs() > bound * (1.0 + 1e-9) + 1e-12 {
                return Err(AlmError::Numerical(format!("signal {x} exceeds its a-priori bound {bound} at t = {t}")));
            }
            if c.u * f_max < spec.f(age, &m, x) {
                if interacting {
                    sig.push(t, spec.interaction.modulation.value(&spec.psi, age, &m));
                }
                if self.opts.record_events {
                    events.push(EventRecord { time: t, neuron: i, age_before: age, memory_before: m.clone() });
                }
                pop.fire(spec, i, t, &m);
                n_events += 1;
                if n_events > self.opts.event_cap {
                    return Err(AlmError::EventCap { cap: self.opts.event_cap, t });
                }
            }
        }

        Ok(SimulationRecord {
            spec_hash: spec.hash(),
            n,
            t_end,
            seed,
            events,
            n_events,
            n_candidates,
            snapshots,
            x_path_emp: x_emp,
        })
    }

    /// Independent replicas with seeds split from `master_seed`.
    pub fn run_replicas(
        &self,
        n: usize,
        t_end: f64,
        master_seed: u64,
        n_replicas: usize,
        save_times: &[f64],
    ) -> Result<Vec<SimulationRecord>> {
        crate::par::map_range(n_replicas, |r| {
            self.run(n, t_end, replica_seed(master_seed, r), save_times)
        })
        .into_iter()
        .collect()
    }
}

pub fn replica_seed(master: u64, replica: usize) -> u64 {
    rng::derive(master, &[label::REPLICA, replica as u64])
}

/// Validates the spec, then simulates one run of the N-neuron network.
pub fn simulate_network(
    spec: &ModelSpec,
    n: usize,
    t_end: f64,
    seed: u64,
    save_times: &[f64],
) -> Result<SimulationRecord> {
    Simulator::new(spec, SimOptions::default())?.run(n, t_end, seed, save_times)
}

pub fn empirical_measure(record: &SimulationRecord, t: f64) -> Result<EmpiricalMeasure> {
    let snap = record
        .snapshots
        .iter()
        .find(|s| s.t == t || (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or(AlmError::NotSaved(t))?;
    let n = snap.ages.len();
    Ok(EmpiricalMeasure {
        t: snap.t,
        ages: snap.ages.clone(),
        memories: snap.memories.clone(),
        weights: vec![1.0 / n as f64; n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, IntensitySpec, InteractionSpec};

    fn constant_spec(rate: f64) -> ModelSpec {
        let mut s = presets::plain_hawkes();
        s.intensity = IntensitySpec::constant(rate);
        s.interaction = InteractionSpec::zero();
        s
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = presets::adaptation_1d();
        let a = simulate_network(&spec, 20, 3.0, 9, &[1.0, 2.0]).unwrap();
        let b = simulate_network(&spec, 20, 3.0, 9, &[1.0, 2.0]).unwrap();
        assert_eq!(a, b);
        let c = simulate_network(&spec, 20, 3.0, 10, &[1.0, 2.0]).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn events_reset_age_and_jump_memory() {
        let spec = presets::adaptation_1d();
        let rec = simulate_network(&spec, 5, 4.0, 1, &[]).unwrap();
        assert!(rec.events.windows(2).all(|w| w[0].time < w[1].time));
        let mut last: Vec<Option<&EventRecord>> = vec![None; 5];
        for e in &rec.events {
            if let Some(p) = last[e.neuron] {
                let dt = e.time - p.time;
                assert!((e.age_before - dt).abs() < 1e-12);
                let want = (p.memory_before[0] + presets::ADAPT_ALPHA) * (-dt).exp();
                assert!((e.memory_before[0] - want).abs() < 1e-12);
            }
            last[e.neuron] = Some(e);
        }
    }

    #[test]
    fn no_thinning_when_rate_is_constant_at_max() {
        let spec = constant_spec(1.5);
        let rec = simulate_network(&spec, 3, 10.0, 4, &[]).unwrap();
        assert_eq!(rec.n_events as u64, rec.n_candidates);
    }

    #[test]
    fn zero_neurons_rejected_and_event_cap_enforced() {
        let spec = constant_spec(1.0);
        assert!(simulate_network(&spec, 0, 1.0, 0, &[]).is_err());
        let sim = Simulator::new(&spec, SimOptions { event_cap: 5, ..Default::default() }).unwrap();
        assert!(matches!(sim.run(10, 10.0, 0, &[]), Err(AlmError::EventCap { .. })));
    }

    #[test]
    fn empirical_measure_requires_save_time() {
        let spec = constant_spec(1.0);
        let rec = simulate_network(&spec, 4, 1.0, 0, &[0.5]).unwrap();
        let em = empirical_measure(&rec, 0.5).unwrap();
        assert!((em.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(empirical_measure(&rec, 0.25), Err(AlmError::NotSaved(_))));
    }
}
