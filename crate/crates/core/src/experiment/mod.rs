//! Config-driven experiments: single evaluations, optimizations,
//! simulations and one- or two-axis parameter sweeps.

mod config;
mod run;

use serde::{Deserialize, Serialize};

pub use config::{
    load_config_value, merge, parse_config_text, resolve, validate_config, ExperimentSpec, Mode,
    OptimizerChoice, OutputPaths, SolverSettings, SweepAxis, MANIFEST_MARKER,
};
pub use run::{
    csv_header, optimize, point_seed, run_experiment, ExperimentRun, PointResult, MANIFEST_VERSION,
};

/// One problem found while resolving a config, located by its key path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigIssue {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}
