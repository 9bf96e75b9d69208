//! Command-line front end: scenario files in, CSV tables and a JSON
//! metadata sidecar out.

mod commands;
mod presets;
mod scenario;
mod table;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use crate::simulator::QuantMode;

pub use commands::{run_analyze, run_compare, run_plan, run_simulate, Report, Status, Z_GATE};
pub use presets::{preset_scenario, rate_vs_bits, run_preset, PRESETS};
pub use scenario::{Metric, PlanSpec, PowerUnit, Scenario, Variant};
pub use table::{fmt_g9, meta_path, Cell, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GATE: i32 = 3;
pub const EXIT_NONCONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "iacsi", version, about = "Interference alignment with quantized CSI: closed forms and Monte Carlo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form metrics, baselines, losses and floors.
    Analyze(Common),
    /// Monte Carlo estimates with standard errors.
    Simulate(Common),
    /// Theory against simulation with a 3-standard-error gate.
    Compare(Common),
    /// Feedback budget schedule over the SNR axis.
    Plan(Common),
    /// Figure data from a built-in scenario.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Scenario file (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// CSV destination; the metadata goes next to it. Defaults to the
    /// scenario's `output`, else stdout.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub trials: Option<u64>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    ErrorModel,
    Rvq,
}

impl From<ModeArg> for QuantMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ErrorModel => QuantMode::ErrorModel,
            ModeArg::Rvq => QuantMode::Rvq,
        }
    }
}

impl Common {
    fn resolve(&self, base: Option<Scenario>) -> Result<Scenario, Error> {
        let mut sc = match (&self.config, base) {
            (Some(path), _) => Scenario::load(path)?,
            (None, Some(sc)) => sc,
            (None, None) => return Err(Error::Config("--config PATH is required".into())),
        };
        if let Some(t) = self.trials {
            sc.trials = t;
        }
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(m) = self.mode {
            sc.mode = m.into();
        }
        if let Some(o) = &self.output {
            sc.output = Some(o.clone());
        }
        if self.threads == Some(0) {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Infeasible(_)
        | Error::Index(_)
        | Error::NonUniformBits(_)
        | Error::BudgetExceeded { .. }
        | Error::Unattainable(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args`, runs the command, writes outputs and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: &Command) -> Result<i32, Error> {
    let (name, common, sc) = match cmd {
        Command::Analyze(c) => ("analyze", c, c.resolve(None)?),
        Command::Simulate(c) => ("simulate", c, c.resolve(None)?),
        Command::Compare(c) => ("compare", c, c.resolve(None)?),
        Command::Plan(c) => ("plan", c, c.resolve(None)?),
        Command::Preset { name, common } => ("preset", common, common.resolve(Some(preset_scenario(name)?))?),
    };
    let report = match cmd {
        Command::Analyze(_) => run_analyze(&sc)?,
        Command::Simulate(_) => run_simulate(&sc, common.threads)?,
        Command::Compare(_) => run_compare(&sc, common.threads)?,
        Command::Plan(_) => run_plan(&sc)?,
        Command::Preset { name, .. } => run_preset(name, &sc, common.threads)?,
    };
    let label = match cmd {
        Command::Preset { name, .. } => format!("preset {name}"),
        _ => name.to_string(),
    };
    let meta = json!({
        "artifact": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": label,
        "seed": sc.seed,
        "threads": common.threads,
        "scenario": serde_json::to_value(&sc).expect("scenario serializes"),
        "results": report.notes,
    });
    match &sc.output {
        Some(path) => {
            table::write_outputs(&report.table, path, &meta)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(report.table.to_csv().as_bytes());
        }
    }
    Ok(match report.status {
        Status::Ok => EXIT_OK,
        Status::GateFailed => {
            eprintln!("compare gate failed: {}", report.notes.get("failures").unwrap_or(&json!(null)));
            EXIT_GATE
        }
        Status::NonConverged => {
            eprintln!(
                "IA solver did not converge in a fraction {} of trials",
                report.notes.get("nonconverged_fraction").unwrap_or(&json!(null))
            );
            EXIT_NONCONVERGED
        }
    })
}
