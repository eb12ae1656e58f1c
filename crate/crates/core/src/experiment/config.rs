//! Experiment configuration: parsing, defaulting and validation.
//!
//! Config files are TOML, or JSON when the extension is `.json`. Every key is
//! optional. A run manifest written by a sweep is itself a valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::ConfigIssue;
use crate::error::{Error, Result};
use crate::optimizer::{deterministic_policy_count, AscentSettings, ViSettings, ENUMERATION_LIMIT};
use crate::params::{NoiseScaling, SystemParams, NUMERIC_FIELDS};
use crate::sim::{PrimaryTraffic, ServiceMode, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Analytic,
    Simulate,
    Both,
}

impl Mode {
    pub fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }

    pub fn simulate(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Both)
    }
}

/// Which policy each grid point uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerChoice {
    #[default]
    Enumeration,
    ValueIteration,
    Ascent,
    /// Fixed strategy spending exactly this many packets.
    Fixed(usize),
}

impl std::str::FromStr for OptimizerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "enum" => Ok(OptimizerChoice::Enumeration),
            "vi" => Ok(OptimizerChoice::ValueIteration),
            "ascent" => Ok(OptimizerChoice::Ascent),
            other => match other.strip_prefix("fixed:").map(str::parse::<usize>) {
                Some(Ok(g)) if g >= 1 => Ok(OptimizerChoice::Fixed(g)),
                _ => Err(format!(
                    "expected one of `enum`, `vi`, `ascent`, `fixed:G` with G >= 1, got `{other}`"
                )),
            },
        }
    }
}

impl std::fmt::Display for OptimizerChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptimizerChoice::Enumeration => f.write_str("enum"),
            OptimizerChoice::ValueIteration => f.write_str("vi"),
            OptimizerChoice::Ascent => f.write_str("ascent"),
            OptimizerChoice::Fixed(g) => write!(f, "fixed:{g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSettings {
    pub vi: ViSettings,
    pub ascent: AscentSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    /// Defaults to the CSV path with a `.manifest.json` extension.
    pub manifest: Option<PathBuf>,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            csv: PathBuf::from("results.csv"),
            manifest: None,
        }
    }
}

impl OutputPaths {
    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.csv.with_extension("manifest.json"))
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentSpec {
    pub base: SystemParams,
    /// Zero, one or two axes; two axes expand to their Cartesian product
    /// with the first axis outermost.
    pub sweep: Vec<SweepAxis>,
    pub mode: Mode,
    pub optimizer: OptimizerChoice,
    pub solver: SolverSettings,
    pub sim: SimConfig,
    pub output: OutputPaths,
}

const TOP_KEYS: &[&str] = &["params", "sweep", "mode", "optimizer", "solver", "sim", "output"];
const SOLVER_KEYS: &[&str] = &[
    "vi_tolerance",
    "vi_max_iters",
    "ascent_starts",
    "ascent_tolerance",
    "ascent_max_iters",
    "ascent_fd_step",
    "ascent_seed",
];
const SIM_KEYS: &[&str] = &["slots", "seed", "replications", "warmup_slots", "service", "primary"];
const OUTPUT_KEYS: &[&str] = &["csv", "manifest"];
const AXIS_KEYS: &[&str] = &["param", "values", "start", "stop", "step"];
/// Marks a run manifest; its `spec` member holds the config.
pub const MANIFEST_MARKER: &str = "manifest_version";

impl ExperimentSpec {
    /// Parameter sets of every grid point, in output order.
    pub fn grid(&self) -> Vec<SystemParams> {
        let mut points = vec![self.base.clone()];
        for axis in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.set(&axis.param, v).expect("axis validated");
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// JSON form accepted back by [`resolve`].
    pub fn to_value(&self) -> Value {
        let mut params = serde_json::to_value(&self.base).expect("params serialize");
        params["noise_scaling"] = json!(self.base.noise_scaling.as_str());
        let mut output = json!({ "csv": self.output.csv });
        if let Some(m) = &self.output.manifest {
            output["manifest"] = json!(m);
        }
        json!({
            "params": params,
            "sweep": self.sweep,
            "mode": self.mode,
            "optimizer": self.optimizer.to_string(),
            "solver": {
                "vi_tolerance": self.solver.vi.tolerance,
                "vi_max_iters": self.solver.vi.max_iters,
                "ascent_starts": self.solver.ascent.starts,
                "ascent_tolerance": self.solver.ascent.tolerance,
                "ascent_max_iters": self.solver.ascent.max_iters,
                "ascent_fd_step": self.solver.ascent.fd_step,
                "ascent_seed": self.solver.ascent.seed,
            },
            "sim": self.sim,
            "output": output,
        })
    }
}

/// Reads a config file into a JSON value without interpreting it.
pub fn load_config_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config_text(&text, path.extension().is_some_and(|e| e == "json"))
        .map_err(|message| Error::Config(vec![ConfigIssue::new(path.display().to_string(), message)]))
}

pub fn parse_config_text(text: &str, json: bool) -> Result<Value, String> {
    if json {
        serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))
    } else {
        toml::from_str::<Value>(text).map_err(|e| format!("invalid TOML: {e}"))
    }
}

/// Parses, defaults and validates a config file, reporting every problem at
/// once.
pub fn validate_config(path: &Path) -> Result<ExperimentSpec> {
    resolve(&load_config_value(path)?)
}

/// Recursively overlays `patch` onto `base`.
pub fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue::new(path, message));
    }

    fn table<'a>(&mut self, value: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(map) = value.as_object() else {
            self.push(path, format!("expected a table, got {}", kind(value)));
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.push(
                    format!("{path}.{key}"),
                    format!("unknown key; valid keys: {}", allowed.join(", ")),
                );
            }
        }
        Some(map)
    }

    fn number(&mut self, value: &Value, path: &str) -> Option<f64> {
        let v = value.as_f64();
        if v.is_none() {
            self.push(path, format!("expected a number, got {}", kind(value)));
        }
        v
    }

    fn unsigned(&mut self, value: &Value, path: &str) -> Option<u64> {
        let v = value.as_u64();
        if v.is_none() {
            self.push(path, format!("expected a non-negative integer, got {value}"));
        }
        v
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&mut self, value: &Value, path: &str) -> Option<T> {
        let Some(s) = value.as_str() else {
            self.push(path, format!("expected a string, got {}", kind(value)));
            return None;
        };
        s.parse().map_err(|e| self.push(path, e)).ok()
    }

    fn choice<T: for<'de> Deserialize<'de>>(&mut self, value: &Value, path: &str, names: &[&str]) -> Option<T> {
        serde_json::from_value(value.clone())
            .map_err(|_| self.push(path, format!("expected one of {}, got {value}", names.join(", "))))
            .ok()
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "a table",
    }
}

/// Rounds grid arithmetic such as `3 × 0.05` back to the intended decimal.
fn tidy(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(12 - v.abs().log10().ceil() as i32);
    (v * scale).round() / scale
}

fn parse_axis(issues: &mut Issues, value: &Value, path: &str) -> Option<SweepAxis> {
    let map = issues.table(value, path, AXIS_KEYS)?;
    let param = match map.get("param").map(|v| (v, v.as_str())) {
        Some((_, Some(name))) if NUMERIC_FIELDS.contains(&name) => Some(name.to_string()),
        Some((_, Some(name))) => {
            issues.push(
                format!("{path}.param"),
                format!("unknown parameter `{name}`; valid names: {}", NUMERIC_FIELDS.join(", ")),
            );
            None
        }
        Some((v, None)) => {
            issues.push(format!("{path}.param"), format!("expected a string, got {}", kind(v)));
            None
        }
        None => {
            issues.push(format!("{path}.param"), "missing; name the parameter to sweep");
            None
        }
    };

    let values = if let Some(list) = map.get("values") {
        if ["start", "stop", "step"].iter().any(|k| map.contains_key(*k)) {
            issues.push(path, "give either `values` or `start`/`stop`/`step`, not both");
            return None;
        }
        let Some(items) = list.as_array() else {
            issues.push(format!("{path}.values"), format!("expected an array, got {}", kind(list)));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (k, item) in items.iter().enumerate() {
            out.push(issues.number(item, &format!("{path}.values[{k}]"))?);
        }
        out
    } else {
        let mut get = |key: &str| match map.get(key) {
            Some(v) => issues.number(v, &format!("{path}.{key}")),
            None => {
                issues.push(format!("{path}.{key}"), "missing; give `values` or `start`/`stop`/`step`");
                None
            }
        };
        let (start, stop, step) = (get("start"), get("stop"), get("step"));
        let (start, stop, step) = (start?, stop?, step?);
        if !(step > 0.0) || stop < start {
            issues.push(path, format!("need step > 0 and stop >= start, got {start}..{stop} by {step}"));
            return None;
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| tidy(start + k as f64 * step)).collect()
    };

    if values.is_empty() {
        issues.push(format!("{path}.values"), "grid must not be empty");
        return None;
    }
    if values.iter().any(|v| !v.is_finite()) {
        issues.push(format!("{path}.values"), "grid values must be finite");
        return None;
    }
    if let Some(k) = values.windows(2).position(|w| w[1] <= w[0]) {
        issues.push(
            format!("{path}.values[{}]", k + 1),
            format!("grid must be strictly increasing ({} follows {})", values[k + 1], values[k]),
        );
        return None;
    }
    let param = param?;
    let mut probe = SystemParams::default();
    for (k, &v) in values.iter().enumerate() {
        if let Err(e) = probe.set(&param, v) {
            issues.push(format!("{path}.values[{k}]"), e);
            return None;
        }
    }
    Some(SweepAxis { param, values })
}

/// Turns a parsed config value into a validated spec.
pub fn resolve(value: &Value) -> Result<ExperimentSpec> {
    let value = match value.get(MANIFEST_MARKER) {
        Some(_) => value.get("spec").unwrap_or(&Value::Null),
        None => value,
    };
    let mut issues = Issues(Vec::new());
    let mut spec = ExperimentSpec::default();
    let Some(top) = issues.table(value, "config", TOP_KEYS) else {
        return Err(Error::Config(issues.0));
    };

    if let Some(params) = top.get("params") {
        let mut allowed: Vec<&str> = NUMERIC_FIELDS.to_vec();
        allowed.push("noise_scaling");
        if let Some(map) = issues.table(params, "params", &allowed) {
            for (key, v) in map {
                let path = format!("params.{key}");
                if key == "noise_scaling" {
                    if let Some(n) = issues.parsed::<NoiseScaling>(v, &path) {
                        spec.base.noise_scaling = n;
                    }
                } else if NUMERIC_FIELDS.contains(&key.as_str()) {
                    if let Some(x) = issues.number(v, &path) {
                        if let Err(e) = spec.base.set(key, x) {
                            issues.push(path, e);
                        }
                    }
                }
            }
        }
    }
    for problem in spec.base.issues() {
        issues.push("params", problem);
    }

    if let Some(sweep) = top.get("sweep") {
        match sweep.as_array() {
            Some(axes) => {
                for (k, axis) in axes.iter().enumerate() {
                    if let Some(a) = parse_axis(&mut issues, axis, &format!("sweep[{k}]")) {
                        spec.sweep.push(a);
                    }
                }
                if axes.len() > 2 {
                    issues.push("sweep", format!("at most two axes are supported, got {}", axes.len()));
                }
                if spec.sweep.len() == 2 && spec.sweep[0].param == spec.sweep[1].param {
                    issues.push("sweep[1].param", "both axes sweep the same parameter");
                }
            }
            None => issues.push("sweep", format!("expected an array of axes, got {}", kind(sweep))),
        }
    }

    if let Some(m) = top.get("mode") {
        if let Some(mode) = issues.choice(m, "mode", &["analytic", "simulate", "both"]) {
            spec.mode = mode;
        }
    }
    if let Some(o) = top.get("optimizer") {
        if let Some(opt) = issues.parsed::<OptimizerChoice>(o, "optimizer") {
            spec.optimizer = opt;
        }
    }

    if let Some(solver) = top.get("solver") {
        if let Some(map) = issues.table(solver, "solver", SOLVER_KEYS) {
            for (key, v) in map {
                let path = format!("solver.{key}");
                let s = &mut spec.solver;
                match key.as_str() {
                    "vi_tolerance" => issues.number(v, &path).map(|x| s.vi.tolerance = x),
                    "vi_max_iters" => issues.unsigned(v, &path).map(|x| s.vi.max_iters = x as usize),
                    "ascent_starts" => issues.unsigned(v, &path).map(|x| s.ascent.starts = x as usize),
                    "ascent_tolerance" => issues.number(v, &path).map(|x| s.ascent.tolerance = x),
                    "ascent_max_iters" => issues.unsigned(v, &path).map(|x| s.ascent.max_iters = x as usize),
                    "ascent_fd_step" => issues.number(v, &path).map(|x| s.ascent.fd_step = x),
                    "ascent_seed" => issues.unsigned(v, &path).map(|x| s.ascent.seed = x),
                    _ => None,
                };
            }
        }
        let s = &spec.solver;
        if !(s.vi.tolerance > 0.0) {
            issues.push("solver.vi_tolerance", "must be > 0");
        }
        if s.ascent.starts == 0 {
            issues.push("solver.ascent_starts", "must be >= 1");
        }
        if !(s.ascent.tolerance > 0.0) {
            issues.push("solver.ascent_tolerance", "must be > 0");
        }
        if !(s.ascent.fd_step > 0.0) {
            issues.push("solver.ascent_fd_step", "must be > 0");
        }
    }

    if let Some(sim) = top.get("sim") {
        if let Some(map) = issues.table(sim, "sim", SIM_KEYS) {
            for (key, v) in map {
                let path = format!("sim.{key}");
                let c = &mut spec.sim;
                match key.as_str() {
                    "slots" => issues.unsigned(v, &path).map(|x| c.slots = x),
                    "seed" => issues.unsigned(v, &path).map(|x| c.seed = x),
                    "replications" => issues.unsigned(v, &path).map(|x| c.replications = x as usize),
                    "warmup_slots" => issues.unsigned(v, &path).map(|x| c.warmup_slots = x),
                    "service" => issues
                        .choice::<ServiceMode>(v, &path, &["bernoulli", "channel-gain"])
                        .map(|x| c.service = x),
                    "primary" => issues
                        .choice::<PrimaryTraffic>(v, &path, &["queue", "independent"])
                        .map(|x| c.primary = x),
                    _ => None,
                };
            }
        }
    }
    for problem in spec.sim.issues() {
        issues.push("sim", problem);
    }

    if let Some(out) = top.get("output") {
        if let Some(map) = issues.table(out, "output", OUTPUT_KEYS) {
            for (key, v) in map {
                let path = format!("output.{key}");
                match v.as_str() {
                    Some(s) if !s.is_empty() => match key.as_str() {
                        "csv" => spec.output.csv = PathBuf::from(s),
                        _ => spec.output.manifest = Some(PathBuf::from(s)),
                    },
                    _ => issues.push(path, format!("expected a non-empty path string, got {v}")),
                }
            }
        }
    }

    if issues.0.is_empty() {
        check_grid(&spec, &mut issues);
    }
    if issues.0.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Config(issues.0))
    }
}

/// Checks constraints that depend on individual grid points.
fn check_grid(spec: &ExperimentSpec, issues: &mut Issues) {
    for (k, point) in spec.grid().iter().enumerate() {
        let at = |issues: &mut Issues, msg: String| issues.push(format!("sweep point {k}"), msg);
        for problem in point.issues() {
            at(issues, problem);
        }
        match spec.optimizer {
            OptimizerChoice::Enumeration
                if deterministic_policy_count(point.energy_capacity) > ENUMERATION_LIMIT =>
            {
                at(
                    issues,
                    format!(
                        "optimizer `enum` cannot handle energy_capacity {}; use `vi`",
                        point.energy_capacity
                    ),
                )
            }
            OptimizerChoice::Fixed(g) if g > point.energy_capacity => at(
                issues,
                format!("fixed:{g} needs energy_capacity >= {g}, got {}", point.energy_capacity),
            ),
            _ => {}
        }
        if issues.0.len() > 20 {
            break;
        }
    }
}
