use serde::{Deserialize, Serialize};

use super::{Method, OptimizationResult, TIE_TOLERANCE};
use crate::analytics::{evaluate, pu_idle_prob};
use crate::error::{Error, Result};
use crate::link::secondary_success_table;
use crate::params::SystemParams;
use crate::poisson::PoissonArrivals;
use crate::policy::AccessPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViSettings {
    /// Stop once the span of successive value differences, rescaled to
    /// per-slot reward, falls below this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for ViSettings {
    fn default() -> Self {
        ViSettings {
            tolerance: 1e-11,
            max_iters: 200_000,
        }
    }
}

/// Self-loop weight of the aperiodicity transform `P ← (1−a)·I + a·P`.
const APERIODICITY: f64 = 0.5;

/// Next-level distribution when `level` packets remain after spending.
fn harvest_row(arrivals: &PoissonArrivals, level: usize, cap: usize) -> Vec<f64> {
    let mut row = vec![0.0; cap + 1];
    for (k, slot) in row.iter_mut().enumerate().take(cap).skip(level) {
        *slot = arrivals.pmf(k - level);
    }
    row[cap] = arrivals.tail(cap - level);
    row
}

/// Relative value iteration on the buffer decision process.
///
/// Each state `i` chooses a spend level `j ≤ i`. With probability `Π` the
/// slot is idle, `j` packets are spent and the packet is delivered with
/// probability `P_succ(j)`; otherwise nothing is spent. The returned policy
/// is greedy with ties broken toward spending less, and its throughput is
/// recomputed through the chain solve.
pub fn value_iteration(params: &SystemParams, settings: ViSettings) -> Result<OptimizationResult> {
    params.validate()?;
    if !(settings.tolerance > 0.0) {
        return Err(Error::InvalidParams(vec![format!(
            "value-iteration tolerance must be > 0, got {}",
            settings.tolerance
        )]));
    }
    let cap = params.energy_capacity;
    let states = cap + 1;
    let idle = pu_idle_prob(params)?.prob;
    let success = secondary_success_table(params)?;
    let arrivals = PoissonArrivals::new(params.arrivals_per_slot(), cap)?;
    let after: Vec<Vec<f64>> = (0..states).map(|l| harvest_row(&arrivals, l, cap)).collect();

    // transitions[i][j] = next-state law for spend j in state i
    let transitions: Vec<Vec<Vec<f64>>> = (0..states)
        .map(|i| {
            (0..=i)
                .map(|j| {
                    let mut row: Vec<f64> = after[i - j]
                        .iter()
                        .zip(&after[i])
                        .map(|(a, b)| APERIODICITY * (idle * a + (1.0 - idle) * b))
                        .collect();
                    row[i] += 1.0 - APERIODICITY;
                    row
                })
                .collect()
        })
        .collect();
    let reward = |j: usize| APERIODICITY * idle * success[j];

    let q_value = |values: &[f64], i: usize, j: usize| -> f64 {
        reward(j)
            + transitions[i][j]
                .iter()
                .zip(values)
                .map(|(p, v)| p * v)
                .sum::<f64>()
    };

    let mut values = vec![0.0; states];
    let mut span = f64::INFINITY;
    let mut iterations = 0;
    let mut evaluations = 0u64;
    while iterations < settings.max_iters {
        iterations += 1;
        let next: Vec<f64> = (0..states)
            .map(|i| (0..=i).map(|j| q_value(&values, i, j)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        evaluations += (states * (states + 1) / 2) as u64;
        let (lo, hi) = next
            .iter()
            .zip(&values)
            .map(|(n, v)| n - v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = (hi - lo) / APERIODICITY;
        let anchor = next[0];
        values = next.into_iter().map(|v| v - anchor).collect();
        if span < settings.tolerance {
            break;
        }
    }
    if !(span < settings.tolerance) {
        return Err(Error::NoConvergence {
            iterations,
            residual: span,
        });
    }

    let actions: Vec<usize> = (0..states)
        .map(|i| {
            let q: Vec<f64> = (0..=i).map(|j| q_value(&values, i, j)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            q.iter().position(|&v| v >= best - TIE_TOLERANCE).unwrap_or(0)
        })
        .collect();
    let policy = AccessPolicy::deterministic(&actions)?;
    let (_, report) = evaluate(params, &policy)?;

    Ok(OptimizationResult {
        best_policy: policy,
        best_mu_s: report.mu_s,
        method: Method::ValueIteration,
        evaluations,
        residual: span,
        converged: true,
    })
}
