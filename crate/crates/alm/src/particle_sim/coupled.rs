//! Finite-N network and N independent limit processes on shared randomness.

use serde::{Deserialize, Serialize};

use super::{
    candidate_stream, check_run_args, draw_initial, empirical_baseline, replica_seed, Population, SignalSum,
};
use crate::error::{AlmError, Result};
use crate::model::ModelSpec;
use crate::xpath::XPath;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaCoupling {
    pub seed: u64,
    /// sup-distance averaged over all neurons of the replica.
    pub mean_sup: f64,
    /// sup-distance of neuron 0 alone.
    pub first_sup: f64,
    /// Candidates accepted by exactly one of the two systems.
    pub mismatches: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledRunSummary {
    pub n: usize,
    pub t_end: f64,
    pub seed: u64,
    pub n_replicas: usize,
    /// Replica mean of the neuron-averaged sup-distance.
    pub sup_distance: f64,
    /// Replica mean of neuron 0's sup-distance.
    pub sup_distance_first: f64,
    pub std_error: f64,
    pub replicas: Vec<ReplicaCoupling>,
}

/// Runs the coupled pair `n_replicas` times. Both systems share initial
/// draws and the (clock, neuron, uniform) candidate stream; the limit copies
/// see the deterministic signal `x_path` instead of X^N.
pub fn simulate_coupled_pair(
    spec: &ModelSpec,
    n: usize,
    t_end: f64,
    x_path: &XPath,
    seed: u64,
    n_replicas: usize,
) -> Result<CoupledRunSummary> {
    check_run_args(n, t_end, &[])?;
    if !x_path.covers(t_end) {
        return Err(AlmError::Domain(format!(
            "x path ends at {} before T = {t_end}",
            x_path.t_end()
        )));
    }
    if n_replicas == 0 {
        return Err(AlmError::Config("need at least one replica".into()));
    }
    let replicas: Vec<ReplicaCoupling> =
        crate::par::map_range(n_replicas, |r| coupled_replica(spec, n, t_end, x_path, replica_seed(seed, r)))
            .into_iter()
            .collect::<Result<_>>()?;
    let vals: Vec<f64> = replicas.iter().map(|r| r.mean_sup).collect();
    let mean = crate::par::pairwise_sum(&vals) / n_replicas as f64;
    let firsts: Vec<f64> = replicas.iter().map(|r| r.first_sup).collect();
    let var = if n_replicas > 1 {
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_replicas - 1) as f64
    } else {
        0.0
    };
    Ok(CoupledRunSummary {
        n,
        t_end,
        seed,
        n_replicas,
        sup_distance: mean,
        sup_distance_first: crate::par::pairwise_sum(&firsts) / n_replicas as f64,
        std_error: (var / n_replicas as f64).sqrt(),
        replicas,
    })
}

fn distance(spec: &ModelSpec, a1: f64, m1: &[f64], a2: f64, m2: &[f64]) -> f64 {
    let dm: f64 = m1.iter().zip(m2).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    (spec.psi.value(a1) - spec.psi.value(a2)).abs() + dm
}

fn coupled_replica(spec: &ModelSpec, n: usize, t_end: f64, x_path: &XPath, seed: u64) -> Result<ReplicaCoupling> {
    let d = spec.d;
    let (draws, consts) = draw_initial(spec, n, seed);
    let h_emp = empirical_baseline(spec, &draws, &consts);
    let interacting = !spec.interaction.is_zero();
    let mut net = Population::new(d, &draws);
    let mut lim = Population::new(d, &draws);
    let mut sig = SignalSum::new(&spec.interaction.kernel, false);
    let mut stream = candidate_stream(spec, n, seed);
    let inv_n = 1.0 / n as f64;
    let f_max = spec.f_max();
    let mut sup = vec![0.0f64; n];
    let mut mismatches = 0u64;
    let (mut m_net, mut m_lim) = (vec![0.0; d], vec![0.0; d]);
    let mut t = 0.0;
    loop {
        let c = stream.next_candidate();
        t += c.dt;
        if t > t_end {
            break;
        }
        let i = c.index;
        let a_net = net.state_at(spec, i, t, &mut m_net);
        let a_lim = lim.state_at(spec, i, t, &mut m_lim);
        let x_net = h_emp.eval(t) + if interacting { inv_n * sig.value(t) } else { 0.0 };
        let thr = c.u * f_max;
        let acc_net = thr < spec.f(a_net, &m_net, x_net);
        let acc_lim = thr < spec.f(a_lim, &m_lim, x_path.at(t));
        if acc_net {
            if interacting {
                sig.push(t, spec.interaction.modulation.value(&spec.psi, a_net, &m_net));
            }
            net.fire(spec, i, t, &m_net);
        }
        if acc_lim {
            lim.fire(spec, i, t, &m_lim);
        }
        if acc_net != acc_lim {
            mismatches += 1;
        }
        if acc_net || acc_lim {
            // distances only shrink along the drift, so the sup is attained at jumps
            let a1 = net.state_at(spec, i, t, &mut m_net);
            let a2 = lim.state_at(spec, i, t, &mut m_lim);
            sup[i] = sup[i].max(distance(spec, a1, &m_net, a2, &m_lim));
        }
    }
    Ok(ReplicaCoupling { seed, mean_sup: crate::par::pairwise_sum(&sup) * inv_n, first_sup: sup[0], mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, BaselineSpec, InteractionSpec};

    #[test]
    fn no_interaction_gives_zero_distance() {
        let mut spec = presets::adaptation_1d();
        spec.interaction = InteractionSpec::zero();
        spec.baseline = BaselineSpec::Zero;
        let x = XPath::constant(0.0, 2.0, 0.01);
        for n in [1, 10, 50] {
            let s = simulate_coupled_pair(&spec, n, 2.0, &x, 3, 4).unwrap();
            assert_eq!(s.sup_distance, 0.0);
            assert!(s.replicas.iter().all(|r| r.mismatches == 0));
        }
    }

    #[test]
    fn short_x_path_rejected() {
        let spec = presets::adaptation_1d();
        let x = XPath::constant(0.0, 1.0, 0.01);
        assert!(simulate_coupled_pair(&spec, 5, 2.0, &x, 0, 1).is_err());
    }

    #[test]
    fn strong_coupling_single_neuron_mismatches() {
        let mut spec = presets::adaptation_1d();
        spec.interaction = InteractionSpec::exponential(5.0, 1.0);
        let x = XPath::constant(0.0, 5.0, 0.01);
        let s = simulate_coupled_pair(&spec, 1, 5.0, &x, 11, 50).unwrap();
        assert!(s.sup_distance > 0.0);
        assert!(s.replicas.iter().any(|r| r.mismatches > 0));
    }
}
