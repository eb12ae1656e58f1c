use std::cmp::Ordering;

use rayon::prelude::*;

use super::{Method, OptimizationResult, TIE_TOLERANCE};
use crate::analytics::evaluate;
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::policy::AccessPolicy;

/// Largest number of deterministic policies [`enumerate_deterministic`]
/// will visit. Reached at a capacity of 8 packets (9! policies).
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// `(E_max + 1)!`: state `i` has `i + 1` possible spend levels.
pub fn deterministic_policy_count(energy_capacity: usize) -> u128 {
    (1..=energy_capacity as u128 + 1).try_fold(1u128, |acc, k| acc.checked_mul(k)).unwrap_or(u128::MAX)
}

/// Mixed-radix decoding with state 0 most significant, so increasing
/// indices visit action vectors in lexicographic order.
fn actions_at(mut index: u64, states: usize) -> Vec<usize> {
    let mut actions = vec![0; states];
    for i in (0..states).rev() {
        let radix = i as u64 + 1;
        actions[i] = (index % radix) as usize;
        index /= radix;
    }
    actions
}

/// Prefers fewer total packets, then the lexicographically smaller vector.
fn frugality(a: &[usize], b: &[usize]) -> Ordering {
    let sa: usize = a.iter().sum();
    let sb: usize = b.iter().sum();
    sa.cmp(&sb).then_with(|| a.cmp(b))
}

/// Exhaustive search over every deterministic policy.
///
/// Candidates are evaluated in parallel and reduced in index order, so the
/// result does not depend on scheduling. Values within `1e-12` tie; ties go
/// to the policy spending fewer packets in total, then to the
/// lexicographically smallest action vector.
pub fn enumerate_deterministic(params: &SystemParams) -> Result<OptimizationResult> {
    params.validate()?;
    let states = params.num_states();
    let count = deterministic_policy_count(params.energy_capacity);
    if count > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }

    let scored: Vec<(Vec<usize>, f64)> = (0..count as u64)
        .into_par_iter()
        .map(|idx| {
            let actions = actions_at(idx, states);
            let policy = AccessPolicy::deterministic(&actions)?;
            let (_, report) = evaluate(params, &policy)?;
            Ok((actions, report.mu_s))
        })
        .collect::<Result<_>>()?;

    let mut best = &scored[0];
    for cand in &scored[1..] {
        let better = cand.1 > best.1 + TIE_TOLERANCE
            || ((cand.1 - best.1).abs() <= TIE_TOLERANCE && frugality(&cand.0, &best.0).is_lt());
        if better {
            best = cand;
        }
    }

    Ok(OptimizationResult {
        best_policy: AccessPolicy::deterministic(&best.0)?,
        best_mu_s: best.1,
        method: Method::Enumeration,
        evaluations: count as u64,
        residual: 0.0,
        converged: true,
    })
}
