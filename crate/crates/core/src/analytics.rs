//! Closed-form performance measures for one parameter set and policy.

use serde::{Deserialize, Serialize};

use crate::chain::EnergyChain;
use crate::error::{Error, Result};
use crate::link::{primary_success_prob, secondary_success_table};
use crate::params::SystemParams;
use crate::policy::AccessPolicy;

/// Probability that the primary queue is empty, with a stability flag.
///
/// A queue whose load reaches its service rate never empties, so the idle
/// probability is reported as zero rather than as an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimaryIdle {
    pub prob: f64,
    pub stable: bool,
}

pub fn pu_idle_prob(params: &SystemParams) -> Result<PrimaryIdle> {
    let mu_p = primary_success_prob(params)?;
    Ok(idle_from_service(params.primary_arrival_rate, mu_p))
}

fn idle_from_service(lambda_p: f64, mu_p: f64) -> PrimaryIdle {
    if lambda_p < mu_p {
        PrimaryIdle {
            prob: 1.0 - lambda_p / mu_p,
            stable: true,
        }
    } else {
        PrimaryIdle {
            prob: 0.0,
            stable: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    /// Primary service rate, packets/slot.
    pub mu_p: f64,
    /// Probability that the primary user leaves the slot idle.
    pub pi_p: f64,
    /// Energy packets spent per slot.
    pub mu_e: f64,
    /// Secondary throughput, packets/slot.
    pub mu_s: f64,
    /// `χ_i·Σ_j ω[i][j]·P_succ(j)` for every buffer state `i`.
    pub per_state_contrib: Vec<f64>,
    pub pu_stable: bool,
}

impl ThroughputReport {
    /// Violations of the report's internal consistency rules.
    pub fn issues(&self, energy_capacity: usize) -> Vec<String> {
        let mut out = Vec::new();
        let sum: f64 = self.per_state_contrib.iter().sum();
        if (self.mu_s - self.pi_p * sum).abs() > 1e-12 {
            out.push(format!(
                "mu_s {} differs from pi_p * sum(per_state_contrib) {}",
                self.mu_s,
                self.pi_p * sum
            ));
        }
        if !(0.0..=self.pi_p + 1e-15).contains(&self.mu_s) {
            out.push(format!("mu_s {} outside [0, pi_p = {}]", self.mu_s, self.pi_p));
        }
        let e_max = self.pi_p * energy_capacity as f64;
        if !(0.0..=e_max + 1e-12).contains(&self.mu_e) {
            out.push(format!("mu_e {} outside [0, {e_max}]", self.mu_e));
        }
        out
    }
}

fn check_chain(policy: &AccessPolicy, chain: &EnergyChain) -> Result<()> {
    if policy.num_states() != chain.num_states() {
        return Err(Error::Dimension(format!(
            "policy has {} states, chain has {}",
            policy.num_states(),
            chain.num_states()
        )));
    }
    Ok(())
}

/// Mean energy packets spent per slot: `Π·Σ_{i≥1} χ_i·Σ_{j=1}^{i} ω[i][j]·j`.
pub fn energy_service_rate(
    params: &SystemParams,
    policy: &AccessPolicy,
    chain: &EnergyChain,
) -> Result<f64> {
    check_chain(policy, chain)?;
    let idle = pu_idle_prob(params)?;
    let chi = chain.stationary();
    let spent: f64 = (1..chain.num_states())
        .map(|i| chi[i] * (1..=i).map(|j| policy.prob(i, j) * j as f64).sum::<f64>())
        .sum();
    Ok(idle.prob * spent)
}

/// Full report: `μ_s = Π·Σ_{i≥1} χ_i·Σ_{j=0}^{i} ω[i][j]·P_succ(j)`.
pub fn su_throughput(
    params: &SystemParams,
    policy: &AccessPolicy,
    chain: &EnergyChain,
) -> Result<ThroughputReport> {
    check_chain(policy, chain)?;
    if policy.num_states() != params.num_states() {
        return Err(Error::Dimension(format!(
            "policy has {} states, energy_capacity {} needs {}",
            policy.num_states(),
            params.energy_capacity,
            params.num_states()
        )));
    }
    let mu_p = primary_success_prob(params)?;
    let idle = idle_from_service(params.primary_arrival_rate, mu_p);
    let success = secondary_success_table(params)?;
    let chi = chain.stationary();
    let mut per_state_contrib = vec![0.0; chain.num_states()];
    for i in 1..chain.num_states() {
        let row: f64 = (0..=i).map(|j| policy.prob(i, j) * success[j]).sum();
        per_state_contrib[i] = chi[i] * row;
    }
    let mu_s = idle.prob * per_state_contrib.iter().sum::<f64>();
    let mu_e = energy_service_rate(params, policy, chain)?;
    Ok(ThroughputReport {
        mu_p,
        pi_p: idle.prob,
        mu_e,
        mu_s,
        per_state_contrib,
        pu_stable: idle.stable,
    })
}

/// Builds and solves the chain for `policy`, then evaluates it.
pub fn evaluate(params: &SystemParams, policy: &AccessPolicy) -> Result<(EnergyChain, ThroughputReport)> {
    let idle = pu_idle_prob(params)?;
    let chain = EnergyChain::solve(params, policy, idle.prob)?;
    let report = su_throughput(params, policy, &chain)?;
    Ok((chain, report))
}

/// Header of the analytic CSV row.
pub const CSV_HEADER: &str =
    "lambda_p,lambda_e,e_joules,E_max,mu_p,pi_p,mu_e,mu_s,policy_id,eq7_mode";

impl ThroughputReport {
    /// One CSV line matching [`CSV_HEADER`], without a trailing newline.
    pub fn csv_row(&self, params: &SystemParams, policy_id: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            params.primary_arrival_rate,
            params.energy_arrival_rate,
            params.energy_per_packet_j,
            params.energy_capacity,
            self.mu_p,
            self.pi_p,
            self.mu_e,
            self.mu_s,
            policy_id,
            params.noise_scaling.as_str()
        )
    }
}
