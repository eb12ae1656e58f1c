//! Maximizing secondary throughput over access policies.
//!
//! With the primary idle probability fixed by the parameters, the buffer is
//! an average-reward decision process: the state is the stored energy, the
//! action is how many packets to spend in an idle slot, and the per-slot
//! reward is `Π·P_succ(j)`. Such processes admit a deterministic optimal
//! stationary policy, so enumerating deterministic policies is exact for
//! small buffers. Relative value iteration scales to larger buffers, and a
//! projected ascent over randomized policies confirms that randomization
//! does not help.

mod ascent;
mod enumerate;
mod value_iteration;

use serde::{Deserialize, Serialize};

pub use ascent::{ascend_from, randomized_ascent, AscentRun, AscentSettings};
pub use enumerate::{deterministic_policy_count, enumerate_deterministic, ENUMERATION_LIMIT};
pub use value_iteration::{value_iteration, ViSettings};

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::policy::AccessPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Enumeration,
    ValueIteration,
    RandomizedAscent,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_policy: AccessPolicy,
    /// Throughput of `best_policy`, recomputed from a fresh chain solve.
    pub best_mu_s: f64,
    pub method: Method,
    /// Number of objective or Bellman evaluations performed.
    pub evaluations: u64,
    /// Bellman span or projected-gradient residual at termination; zero for
    /// enumeration.
    pub residual: f64,
    pub converged: bool,
}

/// Values closer than this are treated as ties.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

/// Spends exactly `packets` whenever at least that many are stored and
/// stays silent otherwise.
pub fn fixed_strategy_policy(params: &SystemParams, packets: usize) -> Result<AccessPolicy> {
    let cap = params.energy_capacity;
    if packets == 0 || packets > cap {
        return Err(Error::InvalidPolicy(format!(
            "fixed strategy needs 1 <= G <= {cap}, got {packets}"
        )));
    }
    let actions: Vec<usize> = (0..=cap).map(|i| if i >= packets { packets } else { 0 }).collect();
    AccessPolicy::deterministic(&actions)
}

/// Evaluates a fixed-strategy policy and packages it like an optimizer
/// result.
pub fn fixed_strategy(params: &SystemParams, packets: usize) -> Result<OptimizationResult> {
    let policy = fixed_strategy_policy(params, packets)?;
    let (_, report) = crate::analytics::evaluate(params, &policy)?;
    Ok(OptimizationResult {
        best_policy: policy,
        best_mu_s: report.mu_s,
        method: Method::Fixed,
        evaluations: 1,
        residual: 0.0,
        converged: true,
    })
}
