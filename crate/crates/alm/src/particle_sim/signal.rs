//! Interaction sum Σ_k k(t − s_k)·g_k over past events.

use std::collections::VecDeque;

use crate::model::TemporalKernel;

/// Running interaction sum. Exponential and Erlang kernels use O(1) trace
/// recursions; other kernels (or `lazy = true`) keep the event list and drop
/// events once the kernel stays below the pruning threshold.
#[derive(Clone, Debug)]
pub enum SignalSum {
    Exponential { amplitude: f64, tau: f64, s: f64, t_last: f64 },
    Erlang { amplitude: f64, tau: f64, s0: f64, s1: f64, t_last: f64 },
    Lazy { kernel: TemporalKernel, horizon: f64, events: VecDeque<(f64, f64)> },
}

impl SignalSum {
    pub fn new(kernel: &TemporalKernel, lazy: bool) -> Self {
        match (kernel, lazy) {
            (TemporalKernel::Exponential { amplitude, tau }, false) => {
                Self::Exponential { amplitude: *amplitude, tau: *tau, s: 0.0, t_last: 0.0 }
            }
            (TemporalKernel::Erlang { amplitude, tau }, false) => {
                Self::Erlang { amplitude: *amplitude, tau: *tau, s0: 0.0, s1: 0.0, t_last: 0.0 }
            }
            _ => Self::Lazy { kernel: kernel.clone(), horizon: kernel.horizon(), events: VecDeque::new() },
        }
    }

    /// Σ_k k(t − s_k) g_k for t at or after the last recorded event.
    #[inline]
    pub fn value(&mut self, t: f64) -> f64 {
        match self {
            Self::Exponential { amplitude, tau, s, t_last } => *amplitude * *s * (-(t - *t_last) / *tau).exp(),
            Self::Erlang { amplitude, tau, s0, s1, t_last } => {
                let dt = t - *t_last;
                *amplitude / *tau * (*s1 + dt * *s0) * (-dt / *tau).exp()
            }
            Self::Lazy { kernel, horizon, events } => {
                while let Some(&(s, _)) = events.front() {
                    if t - s > *horizon {
                        events.pop_front();
                    } else {
                        break;
                    }
                }
                events.iter().map(|&(s, g)| kernel.value(t - s) * g).sum()
            }
        }
    }

    #[inline]
    pub fn push(&mut self, t: f64, g: f64) {
        match self {
            Self::Exponential { tau, s, t_last, .. } => {
                *s = *s * (-(t - *t_last) / *tau).exp() + g;
                *t_last = t;
            }
            Self::Erlang { tau, s0, s1, t_last, .. } => {
                let dt = t - *t_last;
                let e = (-dt / *tau).exp();
                *s1 = (*s1 + dt * *s0) * e;
                *s0 = *s0 * e + g;
                *t_last = t;
            }
            Self::Lazy { events, .. } => events.push_back((t, g)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erlang_trace_matches_lazy_sum() {
        let k = TemporalKernel::Erlang { amplitude: 1.3, tau: 0.4 };
        let mut fast = SignalSum::new(&k, false);
        let mut slow = SignalSum::new(&k, true);
        for &(s, g) in &[(0.1, 1.0), (0.35, -0.4), (0.9, 0.7)] {
            fast.push(s, g);
            slow.push(s, g);
        }
        for &t in &[0.9, 1.0, 1.7, 3.2] {
            assert!((fast.value(t) - slow.value(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_exponential_event() {
        let k = TemporalKernel::Exponential { amplitude: 2.0, tau: 0.5 };
        let mut s = SignalSum::new(&k, false);
        s.push(1.0, 1.0);
        assert!((s.value(1.6) - 2.0 * (-1.2f64).exp()).abs() < 1e-15);
    }
}
