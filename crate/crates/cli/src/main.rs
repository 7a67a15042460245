mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qlink_core::scenario::{
    parse_scenario, parse_scenario_str, OutputError, ResultBundle, RunManifest, Scenario, ScenarioError, REFERENCE_SCENARIO,
};
use qlink_core::ModelError;
use thiserror::Error;

/// CSV layout version; bump when a column changes.
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Output(#[from] OutputError),
    #[error("{0}")]
    Model(#[from] ModelError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario(_) | CliError::Output(_) => 2,
            CliError::Model(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "qlink", version, about = "CubeSat quantum-downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario TOML; omitted keys take their reference values.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory for CSVs, summary.txt and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Pass opportunities over the run.
    Passes(RunArgs),
    /// Link budget against elevation for both sources.
    Linkbudget(RunArgs),
    /// Closed-loop fine-pointing run over one night pass.
    Pointing(RunArgs),
    /// Photon-level key exchange over one night pass.
    Qkd(RunArgs),
    /// Orbital lifetime for each solar-activity scenario.
    Deorbit(RunArgs),
    /// Whole-mission schedule, key yield and data backlog.
    Mission(RunArgs),
    /// Print the reference scenario, every key at its default.
    ReferenceScenario,
}

fn load(path: Option<&Path>) -> Result<(Scenario, Option<String>, Option<String>), CliError> {
    match path {
        Some(p) => {
            let scenario = parse_scenario(p)?;
            let bytes = std::fs::read(p).map_err(|e| ScenarioError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            Ok((scenario, Some(p.display().to_string()), Some(qlink_core::scenario::sha256_hex(&bytes))))
        }
        None => Ok((parse_scenario_str("")?, None, None)),
    }
}

fn run(name: &str, args: &RunArgs) -> Result<(), CliError> {
    let (scenario, path, hash) = load(args.scenario.as_deref())?;
    let mut bundle = ResultBundle::create(&args.out)?;
    let out = match name {
        "passes" => commands::passes(&scenario),
        "linkbudget" => commands::linkbudget(&scenario),
        "pointing" => commands::pointing(&scenario, args.seed),
        "qkd" => commands::qkd(&scenario, args.seed),
        "deorbit" => commands::deorbit(&scenario),
        "mission" => commands::mission(&scenario, args.seed),
        _ => unreachable!("subcommand table"),
    }?;
    for t in &out.tables {
        bundle.write_table(t)?;
    }
    bundle.write_text("summary.txt", &out.summary)?;
    bundle.finish(RunManifest {
        tool: "qlink".into(),
        version: format!("{} (csv schema {SCHEMA_VERSION})", env!("CARGO_PKG_VERSION")),
        command: name.into(),
        seed: args.seed,
        scenario_path: path,
        scenario_sha256: hash,
        defaults_applied: scenario.defaults_applied,
        files: Vec::new(),
    })?;
    print!("{}", out.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Passes(a) => ("passes", a),
        Command::Linkbudget(a) => ("linkbudget", a),
        Command::Pointing(a) => ("pointing", a),
        Command::Qkd(a) => ("qkd", a),
        Command::Deorbit(a) => ("deorbit", a),
        Command::Mission(a) => ("mission", a),
        Command::ReferenceScenario => {
            print!("{REFERENCE_SCENARIO}");
            return ExitCode::SUCCESS;
        }
    };
    match run(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
