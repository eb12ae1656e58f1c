//! `ehaccess`: evaluate, optimize, simulate and sweep the energy-harvesting
//! secondary access model from the command line.
//!
//! Exit status is 0 on success, 1 for invalid input (bad config, flags,
//! parameters or unwritable output) and 2 when a numerical procedure fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use ehaccess_core::experiment::{
    load_config_value, merge, optimize, resolve, run_experiment, ExperimentRun, ExperimentSpec, Mode,
    MANIFEST_MARKER,
};
use ehaccess_core::Error;

#[derive(Parser)]
#[command(name = "ehaccess", version, about = "Energy-harvesting cognitive radio access: analytics, optimization and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the chosen policy analytically at the base parameters.
    Eval(Flags),
    /// Find the best access policy at the base parameters and print it as JSON.
    Optimize(Flags),
    /// Monte Carlo simulation of the chosen policy at the base parameters.
    Simulate(Flags),
    /// Run the configured sweep and write the CSV table and JSON manifest.
    Sweep(Flags),
    /// Resolve a config, report every problem, and print the resolved spec.
    Validate(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML or JSON config file; a run manifest also works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path (JSON for `optimize`). The manifest goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Noise term of the secondary outage formula.
    #[arg(long, value_parser = ["literal", "bandwidth"])]
    eq7: Option<String>,
    /// enum, vi, ascent or fixed:G.
    #[arg(long)]
    optimizer: Option<String>,
    /// Measured slots per replication.
    #[arg(long)]
    slots: Option<u64>,
    /// Independent replications.
    #[arg(long)]
    reps: Option<u64>,
}

impl Flags {
    fn patch(&self) -> Value {
        let mut patch = Map::new();
        let mut sim = Map::new();
        if let Some(s) = self.seed {
            sim.insert("seed".into(), json!(s));
        }
        if let Some(s) = self.slots {
            sim.insert("slots".into(), json!(s));
        }
        if let Some(r) = self.reps {
            sim.insert("replications".into(), json!(r));
        }
        if !sim.is_empty() {
            patch.insert("sim".into(), Value::Object(sim));
        }
        if let Some(e) = &self.eq7 {
            patch.insert("params".into(), json!({ "noise_scaling": e }));
        }
        if let Some(o) = &self.optimizer {
            patch.insert("optimizer".into(), json!(o));
        }
        if let Some(out) = &self.out {
            patch.insert("output".into(), json!({ "csv": out }));
        }
        Value::Object(patch)
    }

    /// Loads the config, applies flag overrides and resolves it. Verbs that
    /// work on one point drop the sweep first.
    fn spec(&self, keep_sweep: bool, mode: Option<Mode>) -> Result<ExperimentSpec, Error> {
        let mut value = match &self.config {
            Some(path) => load_config_value(path)?,
            None => json!({}),
        };
        if value.get(MANIFEST_MARKER).is_some() {
            value = value.get("spec").cloned().unwrap_or(Value::Null);
        }
        if let Value::Object(map) = &mut value {
            if !keep_sweep {
                map.remove("sweep");
            }
            if let Some(m) = mode {
                map.insert("mode".into(), json!(m));
            }
        }
        merge(&mut value, &self.patch());
        resolve(&value)
    }
}

fn warn(run: &ExperimentRun) {
    for w in run.warnings() {
        eprintln!("warning: {w}");
    }
}

/// Prints the table; with `--out` also writes it and the manifest.
fn emit(run: &ExperimentRun, write: bool) -> Result<(), Error> {
    warn(run);
    if write {
        run.write()?;
        eprintln!(
            "wrote {} rows to {} (manifest {})",
            run.points.len(),
            run.spec.output.csv.display(),
            run.spec.output.manifest_path().display()
        );
    } else {
        print!("{}", run.csv()?);
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Validate(flags) => {
            let spec = flags.spec(true, None)?;
            println!("{}", serde_json::to_string_pretty(&spec.to_value())?);
            eprintln!("config ok: {} grid point(s)", spec.grid().len());
        }
        Command::Eval(flags) => {
            let spec = flags.spec(false, Some(Mode::Analytic))?;
            emit(&run_experiment(&spec)?, flags.out.is_some())?;
        }
        Command::Simulate(flags) => {
            let spec = flags.spec(false, Some(Mode::Simulate))?;
            emit(&run_experiment(&spec)?, flags.out.is_some())?;
        }
        Command::Sweep(flags) => {
            let spec = flags.spec(true, None)?;
            emit(&run_experiment(&spec)?, true)?;
        }
        Command::Optimize(flags) => {
            let spec = flags.spec(false, None)?;
            let result = optimize(&spec.base, spec.optimizer, &spec.solver)?;
            let (_, report) = ehaccess_core::evaluate(&spec.base, &result.best_policy)?;
            if !report.pu_stable {
                eprintln!("warning: primary queue unstable; pi_p set to 0");
            }
            let body = json!({
                "params": spec.base,
                "optimizer": spec.optimizer.to_string(),
                "policy_id": result.best_policy.id(),
                "result": result,
                "report": report,
            });
            let text = serde_json::to_string_pretty(&body)? + "\n";
            match &flags.out {
                Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
