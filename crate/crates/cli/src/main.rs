//! `spacelab`: batch front end. Every run writes `report.json` to the output
//! directory, plus CSV node dumps where the command produces fields.

mod commands;
mod config;
mod error;
mod setup;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spacelab", version, about = "Spacelike submanifolds of Lorentzian spacetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON run configuration (by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "spacelab-out")]
    out: PathBuf,
    /// Seed for randomized sampling; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "SPACELAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Mean curvature vector and trapped-surface tag of an immersion.
    Classify,
    /// Divergence identity and integral formula for a vector field.
    Identities,
    /// Spacelike graph in a static model: margin, angle, mean curvature.
    Graph,
    /// Prescribed mean curvature equation for graphs.
    Solve,
    /// Constraints, shape operator sign and stationarity obstruction.
    InitialData,
    /// Killing, homothetic or conformal character and applicable results.
    Symmetry,
    /// The acceptance battery.
    Suite,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Identities => "identities",
            Command::Graph => "graph",
            Command::Solve => "solve",
            Command::InitialData => "initial-data",
            Command::Symmetry => "symmetry",
            Command::Suite => "suite",
        }
    }
}

fn execute(cli: &Cli) -> Result<(Outcome, u64), CliError> {
    let (cfg, base) = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None if matches!(cli.command, Command::Suite) => (RunConfig::default(), PathBuf::new()),
        None => return Err(CliError::Config("--config is required".into())),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let outcome = match cli.command {
        Command::Classify => commands::classify(&cfg, &base),
        Command::Identities => commands::identities(&cfg, &base),
        Command::Graph => commands::graph(&cfg, &base),
        Command::Solve => commands::solve_problem(&cfg, &base),
        Command::InitialData => commands::initial_data(&cfg, &base),
        Command::Symmetry => commands::symmetry(&cfg, seed),
        Command::Suite => commands::run_suite(&cfg, seed),
    }?;
    let outcome = if cfg.csv_enabled() {
        outcome
    } else {
        Outcome { csv: vec![], ..outcome }
    };
    Ok((outcome, seed))
}

fn write_outputs(dir: &Path, report: &serde_json::Value, csv: &[(String, String)]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Output(e.to_string()))?;
    std::fs::write(dir.join("report.json"), text + "\n").map_err(io)?;
    for (name, body) in csv {
        std::fs::write(dir.join(name), body).map_err(io)?;
    }
    Ok(())
}

fn status(code: i32) -> &'static str {
    match code {
        error::EXIT_OK => "ok",
        error::EXIT_HYPOTHESES => "hypotheses_violated",
        error::EXIT_NONCONVERGENT => "nonconvergent",
        error::EXIT_CONFIG => "config_error",
        _ => "failed",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("spacelab: cannot configure {k} threads: {e}");
            return ExitCode::from(error::EXIT_CONFIG as u8);
        }
    }
    let (code, report, csv) = match execute(&cli) {
        Ok((outcome, seed)) => (
            outcome.exit,
            json!({
                "schema": spacelab::suite::SCHEMA,
                "command": cli.command.name(),
                "status": status(outcome.exit),
                "exit_code": outcome.exit,
                "seed": seed,
                "conventions": commands::conventions(),
                "report": outcome.report,
            }),
            outcome.csv,
        ),
        Err(e) => {
            eprintln!("spacelab {}: {e}", cli.command.name());
            let code = e.exit_code();
            (
                code,
                json!({
                    "schema": spacelab::suite::SCHEMA,
                    "command": cli.command.name(),
                    "status": e.kind(),
                    "exit_code": code,
                    "error": e.to_string(),
                }),
                vec![],
            )
        }
    };
    if let Err(e) = write_outputs(&cli.out, &report, &csv) {
        eprintln!("spacelab: {e}");
        return ExitCode::from(error::EXIT_FAILED as u8);
    }
    ExitCode::from(code as u8)
}
