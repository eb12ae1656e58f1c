use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentSpec, Mode, OptimizerChoice, SolverSettings, MANIFEST_MARKER};
use crate::analytics::{self, evaluate, ThroughputReport};
use crate::error::{Error, Result};
use crate::optimizer::{
    enumerate_deterministic, fixed_strategy, randomized_ascent, value_iteration, OptimizationResult,
};
use crate::params::SystemParams;
use crate::sim::{self, simulate, SimConfig, SimStats};

pub const MANIFEST_VERSION: u32 = 1;

const BOTH_HEADER: &str = "lambda_p,lambda_e,e_joules,E_max,mu_p,pi_p,mu_e,mu_s,\
est_mu_p,est_pi_p,est_mu_e,est_mu_s,hw99_mu_p,hw99_pi_p,hw99_mu_e,hw99_mu_s,policy_id,eq7_mode,seed";

pub fn csv_header(mode: Mode) -> &'static str {
    match mode {
        Mode::Analytic => analytics::CSV_HEADER,
        Mode::Simulate => sim::CSV_HEADER,
        Mode::Both => BOTH_HEADER,
    }
}

/// SplitMix64 applied to `master + (index + 1)·γ`, giving each grid point
/// its own simulation seed.
pub fn point_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Finds the policy a grid point uses.
pub fn optimize(params: &SystemParams, choice: OptimizerChoice, solver: &SolverSettings) -> Result<OptimizationResult> {
    match choice {
        OptimizerChoice::Enumeration => enumerate_deterministic(params),
        OptimizerChoice::ValueIteration => value_iteration(params, solver.vi),
        OptimizerChoice::Ascent => randomized_ascent(params, &solver.ascent),
        OptimizerChoice::Fixed(g) => fixed_strategy(params, g),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub index: usize,
    pub params: SystemParams,
    pub seed: u64,
    pub policy_id: String,
    pub optimization: OptimizationResult,
    /// Always computed; emitted only when the mode includes analytics.
    pub report: ThroughputReport,
    pub sim: Option<SimStats>,
}

impl PointResult {
    fn csv_row(&self, mode: Mode) -> String {
        match (mode, &self.sim) {
            (Mode::Analytic, _) => self.report.csv_row(&self.params, &self.policy_id),
            (Mode::Simulate, Some(s)) => s.csv_row(&self.params, &self.policy_id),
            (Mode::Both, Some(s)) => {
                let r = &self.report;
                let p = &self.params;
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    p.primary_arrival_rate,
                    p.energy_arrival_rate,
                    p.energy_per_packet_j,
                    p.energy_capacity,
                    r.mu_p,
                    r.pi_p,
                    r.mu_e,
                    r.mu_s,
                    s.csv_fields(),
                    self.policy_id,
                    p.noise_scaling.as_str(),
                    s.seed
                )
            }
            _ => unreachable!("simulation ran for every simulating mode"),
        }
    }
}

/// Results of every grid point, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub spec: ExperimentSpec,
    pub points: Vec<PointResult>,
}

fn run_point(spec: &ExperimentSpec, index: usize, params: SystemParams) -> Result<PointResult> {
    let optimization = optimize(&params, spec.optimizer, &spec.solver)?;
    let policy = &optimization.best_policy;
    let (_, report) = evaluate(&params, policy)?;
    let seed = point_seed(spec.sim.seed, index);
    let sim = if spec.mode.simulate() {
        let config = SimConfig { seed, ..spec.sim.clone() };
        Some(simulate(&params, policy, &config)?)
    } else {
        None
    };
    Ok(PointResult {
        index,
        policy_id: policy.id(),
        params,
        seed,
        optimization,
        report,
        sim,
    })
}

/// Optimizes, evaluates and (if asked) simulates every grid point in
/// parallel. The first failing point, in grid order, aborts the run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentRun> {
    let grid = spec.grid();
    let results: Vec<Result<PointResult>> = grid
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| run_point(spec, i, p))
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ExperimentRun {
        spec: spec.clone(),
        points,
    })
}

impl ExperimentRun {
    /// The CSV table, header included, one line per grid point. Fails if a
    /// report breaks its own consistency rules.
    pub fn csv(&self) -> Result<String> {
        let mode = self.spec.mode;
        let mut out = String::from(csv_header(mode));
        out.push('\n');
        for point in &self.points {
            if mode.analytic() {
                let issues = point.report.issues(point.params.energy_capacity);
                if !issues.is_empty() {
                    return Err(Error::Invariant(format!(
                        "grid point {}: {}",
                        point.index,
                        issues.join("; ")
                    )));
                }
            }
            out.push_str(&point.csv_row(mode));
            out.push('\n');
        }
        Ok(out)
    }

    /// Grid points where the primary queue is unstable; their rows carry
    /// `pi_p = 0`.
    pub fn unstable_points(&self) -> Vec<usize> {
        self.points
            .iter()
            .filter(|p| !p.report.pu_stable)
            .map(|p| p.index)
            .collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .points
            .iter()
            .filter(|p| !p.report.pu_stable)
            .map(|p| {
                format!(
                    "grid point {}: primary queue unstable (lambda_p = {} >= mu_p = {:.6}); pi_p set to 0",
                    p.index, p.params.primary_arrival_rate, p.report.mu_p
                )
            })
            .collect();
        out.extend(self.points.iter().filter(|p| !p.optimization.converged).map(|p| {
            format!(
                "grid point {}: optimizer stopped before converging (residual {:e})",
                p.index, p.optimization.residual
            )
        }));
        out
    }

    /// Everything needed to reproduce the run. Feeding the manifest back as
    /// a config repeats it exactly.
    pub fn manifest(&self) -> Value {
        let points: Vec<Value> = self
            .points
            .iter()
            .map(|p| {
                json!({
                    "index": p.index,
                    "params": p.params,
                    "seed": p.seed,
                    "policy_id": p.policy_id,
                    "policy": p.optimization.best_policy,
                    "method": p.optimization.method,
                    "converged": p.optimization.converged,
                    "residual": p.optimization.residual,
                    "pu_stable": p.report.pu_stable,
                    "sim": p.sim,
                })
            })
            .collect();
        json!({
            MANIFEST_MARKER: MANIFEST_VERSION,
            "crate_version": env!("CARGO_PKG_VERSION"),
            "spec": self.spec.to_value(),
            "csv_header": csv_header(self.spec.mode),
            "unstable_points": self.unstable_points(),
            "warnings": self.warnings(),
            "points": points,
        })
    }

    /// Writes the CSV and manifest to the spec's output paths, creating
    /// parent directories as needed.
    pub fn write(&self) -> Result<()> {
        let csv = self.csv()?;
        let manifest = serde_json::to_string_pretty(&self.manifest())?;
        write_file(&self.spec.output.csv, &csv)?;
        write_file(&self.spec.output.manifest_path(), &(manifest + "\n"))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let err = |e| Error::io(path.display().to_string(), e);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    std::fs::write(path, contents).map_err(err)
}
