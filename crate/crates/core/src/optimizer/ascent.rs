use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Method, OptimizationResult};
use crate::analytics::{evaluate, pu_idle_prob};
use crate::chain::{kernel, solve_balance};
use crate::error::{Error, Result};
use crate::link::secondary_success_table;
use crate::params::SystemParams;
use crate::poisson::PoissonArrivals;
use crate::policy::AccessPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentSettings {
    /// Number of starting policies: the uniform policy plus random ones.
    pub starts: usize,
    /// Stationarity threshold on `‖P(ω + ∇) − ω‖_∞`.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Half-width of the central differences.
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for AscentSettings {
    fn default() -> Self {
        AscentSettings {
            starts: 8,
            tolerance: 1e-8,
            max_iters: 2_000,
            fd_step: 1e-6,
            seed: 0,
        }
    }
}

/// Outcome of one projected-ascent run.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentRun {
    pub policy: AccessPolicy,
    pub mu_s: f64,
    /// Gradient evaluations performed, including the final check.
    pub gradient_checks: usize,
    pub evaluations: u64,
    pub residual: f64,
    pub converged: bool,
}

/// Throughput as a function of raw policy rows, recomputing the stationary
/// law each time. Defined slightly off the simplex so central differences
/// can straddle its faces.
struct Objective {
    arrivals: PoissonArrivals,
    idle: f64,
    success: Vec<f64>,
}

impl Objective {
    fn new(params: &SystemParams) -> Result<Self> {
        Ok(Objective {
            arrivals: PoissonArrivals::new(params.arrivals_per_slot(), params.energy_capacity)?,
            idle: pu_idle_prob(params)?.prob,
            success: secondary_success_table(params)?,
        })
    }

    fn value(&self, rows: &[Vec<f64>]) -> f64 {
        let t = kernel(&self.arrivals, rows, self.idle);
        let Some(chi) = solve_balance(&t) else {
            return f64::NEG_INFINITY;
        };
        let total: f64 = rows
            .iter()
            .zip(&chi)
            .skip(1)
            .map(|(row, c)| c * row.iter().zip(&self.success).map(|(w, s)| w * s).sum::<f64>())
            .sum();
        self.idle * total
    }
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Projects the feasible part (`j ≤ i`) of every row.
fn project_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut out = project_simplex(&row[..=i]);
            out.resize(row.len(), 0.0);
            out
        })
        .collect()
}

fn gradient(obj: &Objective, rows: &[Vec<f64>], h: f64, evaluations: &mut u64) -> Vec<Vec<f64>> {
    let mut grad = vec![vec![0.0; rows.len()]; rows.len()];
    let mut probe = rows.to_vec();
    for i in 1..rows.len() {
        for j in 0..=i {
            let orig = probe[i][j];
            probe[i][j] = orig + h;
            let up = obj.value(&probe);
            probe[i][j] = orig - h;
            let down = obj.value(&probe);
            probe[i][j] = orig;
            grad[i][j] = (up - down) / (2.0 * h);
            *evaluations += 2;
        }
    }
    grad
}

fn step(rows: &[Vec<f64>], dir: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    let moved: Vec<Vec<f64>> = rows
        .iter()
        .zip(dir)
        .map(|(r, d)| r.iter().zip(d).map(|(a, b)| a + scale * b).collect())
        .collect();
    project_rows(&moved)
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn inner(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x * y).sum()
}

/// Snaps round-off away and rebuilds a validated policy.
fn to_policy(rows: &[Vec<f64>]) -> Result<AccessPolicy> {
    let cleaned: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            let mut r: Vec<f64> = row.iter().map(|&w| if w < 1e-12 { 0.0 } else { w }).collect();
            let s: f64 = r.iter().sum();
            r.iter_mut().for_each(|w| *w /= s);
            r
        })
        .collect();
    AccessPolicy::from_rows(cleaned)
}

/// Projected gradient ascent from a single starting policy, with
/// backtracking on the step length.
pub fn ascend_from(
    params: &SystemParams,
    start: &AccessPolicy,
    settings: &AscentSettings,
) -> Result<AscentRun> {
    params.validate()?;
    if start.num_states() != params.num_states() {
        return Err(Error::Dimension(format!(
            "start policy has {} states, expected {}",
            start.num_states(),
            params.num_states()
        )));
    }
    let obj = Objective::new(params)?;
    let mut evaluations = 0u64;

    // Without idle slots or without harvesting every policy delivers nothing.
    if obj.idle == 0.0 || params.arrivals_per_slot() == 0.0 {
        let policy = AccessPolicy::silent(params.energy_capacity);
        let (_, report) = evaluate(params, &policy)?;
        return Ok(AscentRun {
            policy,
            mu_s: report.mu_s,
            gradient_checks: 0,
            evaluations: 1,
            residual: 0.0,
            converged: true,
        });
    }

    let mut rows = start.rows().to_vec();
    let mut value = obj.value(&rows);
    evaluations += 1;
    let mut scale = 1.0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut checks = 0;

    while checks < settings.max_iters {
        let grad = gradient(&obj, &rows, settings.fd_step, &mut evaluations);
        checks += 1;
        residual = max_abs_diff(&step(&rows, &grad, 1.0), &rows);
        if residual < settings.tolerance {
            converged = true;
            break;
        }
        let mut accepted = false;
        while scale > 1e-14 {
            let cand = step(&rows, &grad, scale);
            let gain = inner(&grad, &cand) - inner(&grad, &rows);
            let cand_value = obj.value(&cand);
            evaluations += 1;
            if gain > 0.0 && cand_value >= value + 1e-4 * gain {
                rows = cand;
                value = cand_value;
                scale = (scale * 2.0).min(1e8);
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let policy = to_policy(&rows)?;
    let (_, report) = evaluate(params, &policy)?;
    Ok(AscentRun {
        policy,
        mu_s: report.mu_s,
        gradient_checks: checks,
        evaluations: evaluations + 1,
        residual,
        converged,
    })
}

fn uniform_start(states: usize) -> AccessPolicy {
    let rows = (0..states)
        .map(|i| {
            let mut r = vec![1.0 / (i + 1) as f64; i + 1];
            r.resize(states, 0.0);
            r
        })
        .collect();
    AccessPolicy::from_rows(rows).expect("uniform rows are stochastic")
}

/// Flat-Dirichlet draw for every row; stream `index` of the seeded
/// generator, so each start is reproducible on its own.
fn random_start(states: usize, seed: u64, index: u64) -> AccessPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let rows: Vec<Vec<f64>> = (0..states)
        .map(|i| {
            let mut r: Vec<f64> = (0..=i).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = r.iter().sum();
            r.iter_mut().for_each(|w| *w /= s);
            r.resize(states, 0.0);
            r
        })
        .collect();
    to_policy(&rows).expect("normalized rows are stochastic")
}

/// Multi-start projected ascent over randomized policies. The first start is
/// the uniform policy; the others are random. Starts run in parallel and the
/// best is chosen by value, then by start index.
pub fn randomized_ascent(params: &SystemParams, settings: &AscentSettings) -> Result<OptimizationResult> {
    params.validate()?;
    if settings.starts == 0 {
        return Err(Error::InvalidParams(vec!["ascent needs at least one start".into()]));
    }
    let states = params.num_states();
    let runs: Vec<AscentRun> = (0..settings.starts as u64)
        .into_par_iter()
        .map(|k| {
            let start = if k == 0 {
                uniform_start(states)
            } else {
                random_start(states, settings.seed, k)
            };
            ascend_from(params, &start, settings)
        })
        .collect::<Result<_>>()?;

    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.mu_s > best.mu_s { r } else { best })
        .expect("at least one start");
    Ok(OptimizationResult {
        best_policy: best.policy,
        best_mu_s: best.mu_s,
        method: Method::RandomizedAscent,
        evaluations,
        residual: best.residual,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::enumerate_deterministic;

    #[test]
    fn simplex_projection() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let q = project_simplex(&[-1.0, 0.3, 0.2]);
        assert_eq!(q[0], 0.0);
        assert!((q[1] - 0.55).abs() < 1e-15 && (q[2] - 0.45).abs() < 1e-15);
        // shifting all coordinates does not change the projection
        let a = project_simplex(&[0.1, 0.7, 0.4]);
        let b = project_simplex(&[5.1, 5.7, 5.4]);
        assert!(max_abs_diff(&[a], &[b]) < 1e-12);
    }

    #[test]
    fn stops_immediately_at_the_optimum() {
        let p = SystemParams {
            energy_capacity: 3,
            ..SystemParams::default()
        };
        let best = enumerate_deterministic(&p).unwrap();
        let run = ascend_from(&p, &best.best_policy, &AscentSettings::default()).unwrap();
        assert!(run.converged);
        assert_eq!(run.gradient_checks, 1);
        assert_eq!(run.policy, best.best_policy);
    }

    #[test]
    fn multi_start_reaches_enumeration_value() {
        let p = SystemParams {
            energy_capacity: 3,
            ..SystemParams::default()
        };
        let en = enumerate_deterministic(&p).unwrap();
        let asc = randomized_ascent(&p, &AscentSettings::default()).unwrap();
        assert!((asc.best_mu_s - en.best_mu_s).abs() < 1e-4);
        assert!(asc.best_mu_s <= en.best_mu_s + 1e-6);
    }

    #[test]
    fn reproducible_for_a_seed() {
        let p = SystemParams {
            energy_capacity: 2,
            ..SystemParams::default()
        };
        let s = AscentSettings {
            starts: 3,
            seed: 42,
            ..AscentSettings::default()
        };
        assert_eq!(randomized_ascent(&p, &s).unwrap(), randomized_ascent(&p, &s).unwrap());
    }

    #[test]
    fn zero_starts_rejected() {
        let s = AscentSettings {
            starts: 0,
            ..AscentSettings::default()
        };
        assert!(randomized_ascent(&SystemParams::default(), &s).is_err());
    }
}
