//! Energy-buffer Markov chain: transition kernel and stationary law.
//!
//! Within a slot the buffer first pays for the chosen transmission (only when
//! the primary user is idle), then receives the Poisson harvest, and finally
//! clips at capacity. State `n` therefore moves to `min(n − m + H, E_max)`
//! with `m` drawn from the policy row of `n` in idle slots and `m = 0` in
//! busy slots.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::poisson::PoissonArrivals;
use crate::policy::AccessPolicy;

/// Tolerance on row sums accepted by [`stationary_distribution`].
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

const POWER_TOLERANCE: f64 = 1e-14;
const POWER_MAX_ITERS: usize = 2_000_000;

/// Dense row-major square matrix of transition probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("transition matrix must be square and non-empty".into()));
        }
        Ok(TransitionMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.n..(from + 1) * self.n]
    }

    /// Row vector times matrix.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o += xi * p;
            }
        }
        out
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn check_stochastic(&self) -> Result<()> {
        if let Some(v) = self.data.iter().find(|v| !(v.is_finite() && **v >= -1e-15)) {
            return Err(Error::NotStochastic(format!("entry {v} is not a probability")));
        }
        for i in 0..self.n {
            let s: f64 = self.row(i).iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(Error::NotStochastic(format!("row {i} sums to {s}")));
            }
        }
        Ok(())
    }

    /// Number of closed communicating classes of the support graph.
    pub fn closed_class_count(&self) -> usize {
        let n = self.n;
        let mut reach = vec![vec![false; n]; n];
        for (s, row) in reach.iter_mut().enumerate() {
            let mut stack = vec![s];
            row[s] = true;
            while let Some(u) = stack.pop() {
                for (v, seen) in row.iter_mut().enumerate() {
                    if self.get(u, v) > 0.0 && !*seen {
                        *seen = true;
                        stack.push(v);
                    }
                }
            }
        }
        let recurrent: Vec<usize> = (0..n)
            .filter(|&i| (0..n).all(|j| !reach[i][j] || reach[j][i]))
            .collect();
        let mut seen = vec![false; n];
        let mut classes = 0;
        for &i in &recurrent {
            if seen[i] {
                continue;
            }
            classes += 1;
            for &j in &recurrent {
                if reach[i][j] {
                    seen[j] = true;
                }
            }
        }
        classes
    }
}

/// Builds the buffer transition matrix for a policy and a primary idle
/// probability, case by case:
///
/// * `k < E_max`, `k < n`: only idle slots can lower the level, so
///   `Π·Σ_{m=n−k}^{n} ω[n][m]·P(k−n+m)`.
/// * `k < E_max`, `k ≥ n`: `Π·Σ_{m=0}^{n} ω[n][m]·P(k−n+m) + (1−Π)·P(k−n)`.
/// * `k = E_max`: the same sums with the Poisson tail `Pr{H ≥ E_max−n+m}`
///   in place of the point mass.
pub fn build_transition_matrix(
    params: &SystemParams,
    policy: &AccessPolicy,
    pu_idle: f64,
) -> Result<TransitionMatrix> {
    params.validate()?;
    let size = params.num_states();
    if policy.num_states() != size {
        return Err(Error::Dimension(format!(
            "policy covers {} states but energy_capacity {} needs {size}",
            policy.num_states(),
            params.energy_capacity
        )));
    }
    if !(0.0..=1.0).contains(&pu_idle) {
        return Err(Error::InvalidParams(vec![format!(
            "primary idle probability must lie in [0, 1], got {pu_idle}"
        )]));
    }
    let arrivals = PoissonArrivals::new(params.arrivals_per_slot(), params.energy_capacity)?;
    Ok(kernel(&arrivals, policy.rows(), pu_idle))
}

/// Kernel for arbitrary (not necessarily stochastic) policy rows; callers
/// validate. `arrivals` must cache the pmf up to `rows.len() - 1`.
pub(crate) fn kernel(arrivals: &PoissonArrivals, rows: &[Vec<f64>], pu_idle: f64) -> TransitionMatrix {
    let size = rows.len();
    let cap = size - 1;
    let busy = 1.0 - pu_idle;
    let mut data = vec![0.0; size * size];

    for n in 0..size {
        let w = &rows[n];
        for k in 0..cap {
            let spend_lo = n.saturating_sub(k);
            let idle_part: f64 = (spend_lo..=n).map(|m| w[m] * arrivals.pmf(k + m - n)).sum();
            let busy_part = if k >= n { busy * arrivals.pmf(k - n) } else { 0.0 };
            data[n * size + k] = pu_idle * idle_part + busy_part;
        }
        let idle_tail: f64 = (0..=n).map(|m| w[m] * arrivals.tail(cap + m - n)).sum();
        data[n * size + cap] = pu_idle * idle_tail + busy * arrivals.tail(cap - n);
    }
    TransitionMatrix { n: size, data }
}

/// Stationary law of a row-stochastic matrix.
///
/// With a single closed class the law is unique and comes from a direct
/// solve of `(Λᵀ − I)·χ = 0` with one equation replaced by `Σχ = 1`. With
/// several closed classes (for instance no harvesting and a silent state)
/// the result is the limit of the chain started from the uniform law.
pub fn stationary_distribution(transition: &TransitionMatrix) -> Result<Vec<f64>> {
    transition.check_stochastic()?;
    if transition.closed_class_count() == 1 {
        linear_solve(transition)
    } else {
        let n = transition.size();
        power_iteration(transition, &vec![1.0 / n as f64; n], POWER_TOLERANCE, POWER_MAX_ITERS)
    }
}

fn linear_solve(transition: &TransitionMatrix) -> Result<Vec<f64>> {
    let x = solve_balance(transition).ok_or(Error::NoConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let mut chi: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = chi.iter().sum();
    chi.iter_mut().for_each(|v| *v /= total);
    Ok(chi)
}

/// Solves the balance equations with the last one replaced by `Σχ = 1`.
/// No stochasticity checks and no clipping, so the result is a smooth
/// function of the matrix entries. `None` when the system is singular.
pub(crate) fn solve_balance(transition: &TransitionMatrix) -> Option<Vec<f64>> {
    let n = transition.size();
    let mut a = DMatrix::<f64>::from_fn(n, n, |r, c| {
        transition.get(c, r) - if r == c { 1.0 } else { 0.0 }
    });
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Iterates `x ← x·Λ` from `init` until successive iterates differ by less
/// than `tolerance` in the max norm.
pub fn power_iteration(
    transition: &TransitionMatrix,
    init: &[f64],
    tolerance: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    transition.check_stochastic()?;
    if init.len() != transition.size() {
        return Err(Error::Dimension(format!(
            "initial vector has {} entries, matrix has {} states",
            init.len(),
            transition.size()
        )));
    }
    let mut x = init.to_vec();
    let mut diff = f64::INFINITY;
    for _ in 0..max_iters {
        let mut next = transition.left_multiply(&x);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        diff = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if diff < tolerance {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        residual: diff,
    })
}

/// Transition matrix of the buffer under one policy with its stationary law.
#[derive(Debug, Clone)]
pub struct EnergyChain {
    transition: TransitionMatrix,
    stationary: Vec<f64>,
}

impl EnergyChain {
    pub fn solve(params: &SystemParams, policy: &AccessPolicy, pu_idle: f64) -> Result<Self> {
        let transition = build_transition_matrix(params, policy, pu_idle)?;
        Self::from_transition(transition)
    }

    pub fn from_transition(transition: TransitionMatrix) -> Result<Self> {
        let stationary = stationary_distribution(&transition)?;
        Ok(EnergyChain {
            transition,
            stationary,
        })
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn num_states(&self) -> usize {
        self.transition.size()
    }

    /// `‖χΛ − χ‖_∞`.
    pub fn residual(&self) -> f64 {
        self.transition
            .left_multiply(&self.stationary)
            .iter()
            .zip(&self.stationary)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Debug dump: the rows of Λ followed by a `stationary` row holding χ.
    pub fn to_csv(&self) -> String {
        let n = self.num_states();
        let mut out = String::from("row");
        for k in 0..n {
            let _ = write!(out, ",state_{k}");
        }
        out.push('\n');
        for i in 0..n {
            let _ = write!(out, "state_{i}");
            for v in self.transition.row(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out.push_str("stationary");
        for v in &self.stationary {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(cap: usize, rate: f64) -> SystemParams {
        SystemParams {
            energy_capacity: cap,
            energy_arrival_rate: rate,
            ..SystemParams::default()
        }
    }

    #[test]
    fn empty_buffer_row_is_truncated_poisson() {
        let p = params(4, 0.7);
        let arr = PoissonArrivals::new(0.7, 4).unwrap();
        let policy = AccessPolicy::deterministic(&[0, 1, 2, 1, 4]).unwrap();
        for pi in [0.0, 0.3, 1.0] {
            let t = build_transition_matrix(&p, &policy, pi).unwrap();
            for k in 0..4 {
                assert!((t.get(0, k) - arr.pmf(k)).abs() < 1e-15);
            }
            let below: f64 = (0..4).map(|k| arr.pmf(k)).sum();
            assert!((t.get(0, 4) - (1.0 - below)).abs() < 1e-15);
        }
    }

    #[test]
    fn no_harvest_single_packet() {
        let policy = AccessPolicy::deterministic(&[0, 1]).unwrap();
        let t = build_transition_matrix(&params(1, 0.0), &policy, 0.3).unwrap();
        assert_eq!(t.get(1, 0), 0.3);
        assert!((t.get(1, 1) - 0.7).abs() < 1e-15);
        assert_eq!(t.get(0, 0), 1.0);
        let chi = stationary_distribution(&t).unwrap();
        assert_eq!(chi, vec![1.0, 0.0]);
    }

    #[test]
    fn always_spending_two_state_balance() {
        // Primary always idle and the single packet always spent: both rows
        // equal the harvest law, so χ = (P0, 1 − P0).
        let policy = AccessPolicy::deterministic(&[0, 1]).unwrap();
        let chain = EnergyChain::solve(&params(1, 1.0), &policy, 1.0).unwrap();
        let p0 = (-1f64).exp();
        assert!((chain.stationary()[0] - p0).abs() < 1e-12);
        assert!((chain.stationary()[1] - (1.0 - p0)).abs() < 1e-12);
        assert!((chain.stationary()[0] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn never_consuming_fills_up() {
        let policy = AccessPolicy::deterministic(&[0, 1]).unwrap();
        let chain = EnergyChain::solve(&params(1, 1.0), &policy, 0.0).unwrap();
        assert!(chain.stationary()[0].abs() < 1e-15);
        assert!((chain.stationary()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_capacity_is_a_single_state() {
        let chain = EnergyChain::solve(&params(0, 2.0), &AccessPolicy::silent(0), 0.5).unwrap();
        assert_eq!(chain.stationary(), &[1.0]);
        assert_eq!(chain.transition().get(0, 0), 1.0);
    }

    #[test]
    fn rejects_dimension_mismatch_and_bad_idle_prob() {
        let policy = AccessPolicy::silent(2);
        assert!(matches!(
            build_transition_matrix(&params(3, 1.0), &policy, 0.5),
            Err(Error::Dimension(_))
        ));
        assert!(build_transition_matrix(&params(2, 1.0), &policy, 1.5).is_err());
    }

    #[test]
    fn rejects_non_stochastic_input() {
        let t = TransitionMatrix::from_rows(&[vec![0.5, 0.4], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(stationary_distribution(&t), Err(Error::NotStochastic(_))));
        let neg = TransitionMatrix::from_rows(&[vec![1.5, -0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(stationary_distribution(&neg), Err(Error::NotStochastic(_))));
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        // Period-two chain never settles from a point mass.
        let t = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        match power_iteration(&t, &[1.0, 0.0], 1e-12, 50) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 50);
                assert_eq!(residual, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reducible_chain_keeps_mass_in_silent_states() {
        // No harvest; state 2 is silent and therefore absorbing, state 1
        // drains into the absorbing empty state.
        let policy = AccessPolicy::deterministic(&[0, 1, 0]).unwrap();
        let t = build_transition_matrix(&params(2, 0.0), &policy, 0.5).unwrap();
        assert_eq!(t.closed_class_count(), 2);
        let chi = stationary_distribution(&t).unwrap();
        assert!((chi[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(chi[1].abs() < 1e-12);
        assert!((chi[2] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn linear_solve_matches_power_iteration() {
        let p = params(5, 1.3);
        let policy = AccessPolicy::deterministic(&[0, 1, 1, 2, 4, 3]).unwrap();
        let chain = EnergyChain::solve(&p, &policy, 0.6).unwrap();
        let n = chain.num_states();
        let iter = power_iteration(chain.transition(), &vec![1.0 / n as f64; n], 1e-15, 100_000)
            .unwrap();
        for (a, b) in chain.stationary().iter().zip(&iter) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(chain.residual() < 1e-13);
    }

    #[test]
    fn csv_dump_layout() {
        let chain =
            EnergyChain::solve(&params(1, 1.0), &AccessPolicy::silent(1), 0.5).unwrap();
        let csv = chain.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "row,state_0,state_1");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("stationary,"));
    }
}
