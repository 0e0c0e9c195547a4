//! The `twoport` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use twoport_core::{energy_audit, integrate, IntegrationError, Scheme, Trajectory};

use crate::build::build_system;
use crate::config::{parse_scenario, ScenarioConfig};
use crate::table::ResultTable;

pub const EXIT_OK: i32 = 0;
/// Output could not be written.
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// Scenario missing, unreadable, malformed or inconsistent.
pub const EXIT_INVALID: i32 = 3;
/// The simulation stopped early; the samples computed so far are written.
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "twoport", version, about = "Simulate multibody scenarios built from two-port blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario and write the sampled DOFs.
    Run(RunArgs),
    /// Parse and check a scenario without running it.
    Validate { scenario: PathBuf },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Step size (s); overrides the scenario.
    #[arg(long, value_parser = positive)]
    dt: Option<f64>,
    /// Final time (s); overrides the scenario.
    #[arg(long = "t-final", value_parser = non_negative)]
    t_final: Option<f64>,
    /// rk4 or semi-implicit-euler; overrides the scenario.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Append energy ledger columns and report the balance residual.
    #[arg(long)]
    audit_energy: bool,
    /// Recorded in structured output for reproducible test hooks.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Structured,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a non-negative number")),
    }
}

#[derive(Serialize)]
struct Structured<'a> {
    scenario: &'a str,
    scheme: String,
    dt: f64,
    t_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    completed: bool,
    #[serde(flatten)]
    table: &'a ResultTable,
}

/// Run the command line with explicit streams; returns the exit status.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match cli.command {
        Command::Validate { scenario } => match load(&scenario, stderr) {
            Ok(_) => {
                let _ = writeln!(stdout, "{}: ok", scenario.display());
                EXIT_OK
            }
            Err(code) => code,
        },
        Command::Run(args) => run(args, stdout, stderr),
    }
}

fn load(path: &Path, stderr: &mut dyn Write) -> Result<ScenarioConfig, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(stderr, "error: cannot read scenario `{}`: {e}", path.display());
        EXIT_INVALID
    })?;
    let config = parse_scenario(&text).map_err(|e| {
        let _ = writeln!(stderr, "error: {}: {e}", path.display());
        EXIT_INVALID
    })?;
    for b in &config.bodies {
        if let Ok(body) = config.rigid_body(b) {
            if let Some(m) = body.triangle_inequality_violation() {
                let _ = writeln!(
                    stderr,
                    "warning: body `{}` has principal moments {:.6}, {:.6}, {:.6} that violate the triangle inequality",
                    b.name, m[0], m[1], m[2]
                );
            }
        }
    }
    Ok(config)
}

fn run(args: RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let mut config = match load(&args.scenario, stderr) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(dt) = args.dt {
        config.integration.dt = dt;
    }
    if let Some(t) = args.t_final {
        config.integration.t_final = t;
    }
    if let Some(s) = args.scheme {
        config.integration.scheme = s.name().to_string();
    }
    let sys = match build_system(&config).and_then(|g| {
        g.assemble().map_err(|source| crate::BuildError::Engine {
            context: "assembly".into(),
            source,
        })
    }) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}: {e}", args.scenario.display());
            return EXIT_INVALID;
        }
    };

    let it = &config.integration;
    let x0 = sys.initial_state();
    let (traj, failure): (Trajectory, Option<String>) = match integrate(&sys, &x0, it.dt, it.t_final, config.scheme()) {
        Ok(t) => (t, None),
        Err(IntegrationError::Halted { partial, source, time, .. }) => {
            (*partial, Some(format!("simulation halted at t = {time}: {source}")))
        }
        Err(e @ IntegrationError::Settings(_)) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };

    let ledger = if args.audit_energy {
        match energy_audit(&sys, &traj) {
            Ok(l) => {
                let last = l.residual.last().copied().unwrap_or(0.0);
                let _ = writeln!(
                    stderr,
                    "energy balance: final residual {last:.6e} J, max relative residual {:.6e}",
                    l.max_relative_residual()
                );
                Some(l)
            }
            Err(e) => {
                let _ = writeln!(stderr, "warning: energy audit failed: {e}");
                None
            }
        }
    } else {
        None
    };

    let table = match ResultTable::from_trajectory(&sys, &traj, &config.outputs.dofs, config.outputs.every, ledger.as_ref())
    {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID;
        }
    };

    let written = match &args.out {
        Some(path) => File::create(path)
            .map_err(|e| format!("cannot create `{}`: {e}", path.display()))
            .and_then(|f| emit(&args, &config, &table, failure.is_none(), BufWriter::new(f))),
        None => emit(&args, &config, &table, failure.is_none(), &mut *stdout),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_IO;
    }
    match failure {
        Some(msg) => {
            let _ = writeln!(stderr, "error: {msg} ({} samples written)", table.len());
            EXIT_RUNTIME
        }
        None => EXIT_OK,
    }
}

fn emit<W: Write>(args: &RunArgs, config: &ScenarioConfig, table: &ResultTable, completed: bool, mut out: W) -> Result<(), String> {
    let res = match args.format {
        Format::Csv => table.write_csv(&mut out),
        Format::Structured => {
            let doc = Structured {
                scenario: &config.metadata.name,
                scheme: config.scheme().to_string(),
                dt: config.integration.dt,
                t_final: config.integration.t_final,
                seed: args.seed,
                completed,
                table,
            };
            serde_json::to_writer_pretty(&mut out, &doc)
                .map_err(Into::into)
                .and_then(|_| writeln!(out).map_err(|e| crate::TableError::Csv(e.into())))
        }
    };
    res.map_err(|e| e.to_string())?;
    out.flush().map_err(|e| e.to_string())
}
