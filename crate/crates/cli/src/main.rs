//! Batch front-end for the tapestry simulator.
//!
//! Subcommands: `evolve`, `reconstruct`, `pcm`, `scenario`, `bounds`,
//! `parse`. Runs are driven by a TOML config; identical config and seed
//! produce byte-identical outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tapestry::algebra::RuleTable;
use tapestry_cli::error::{CliError, EXIT_CHECK_FAILED};
use tapestry_cli::{config, parser, scenarios};

#[derive(Parser)]
#[command(name = "tapestry", version, about = "Discrete path-integral simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Extra spatial refinement levels for the free-packet sweep.
    #[arg(long, default_value_t = 0)]
    refine: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured packet and emit fields, snapshots, errors.
    Evolve(RunArgs),
    /// Reconstruct the configured packet from its lattice samples.
    Reconstruct(RunArgs),
    /// Enumerate the covering map of the configured custom expression.
    Pcm(RunArgs),
    /// Run the configured scenario preset.
    Scenario(RunArgs),
    /// Evaluate the published error-bound formulas at the configured scale.
    Bounds(RunArgs),
    /// Parse a process expression and print its round-tripped form.
    Parse {
        /// Expression text, e.g. "0.707*A (+) 0.707*B".
        text: String,
    },
}

fn run(args: &RunArgs, which: &str) -> Result<scenarios::RunArtifacts, CliError> {
    let raw = config::load(&args.config)?;
    let cfg = config::validate(raw, args.seed)?;
    match which {
        "evolve" => scenarios::run_evolve(&cfg, &args.out),
        "reconstruct" => scenarios::run_reconstruct(&cfg, &args.out),
        "pcm" => scenarios::scenario_custom(&cfg, &args.out),
        "scenario" => scenarios::run_scenario(&cfg, &args.out, args.refine),
        "bounds" => scenarios::run_bounds(&cfg, &args.out),
        _ => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Parse { text } => {
            let rules = RuleTable::builtin();
            match parser::parse_process_expr(text, &rules) {
                Ok(expr) => {
                    println!("{}", parser::print_expr(&expr));
                    return ExitCode::SUCCESS;
                }
                Err(e) => Err(CliError::Parse(e)),
            }
        }
        Command::Evolve(a) => run(a, "evolve"),
        Command::Reconstruct(a) => run(a, "reconstruct"),
        Command::Pcm(a) => run(a, "pcm"),
        Command::Scenario(a) => run(a, "scenario"),
        Command::Bounds(a) => run(a, "bounds"),
    };
    match outcome {
        Ok(artifacts) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&artifacts.report).expect("serializable")
            );
            if artifacts.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("numerical check failed");
                ExitCode::from(EXIT_CHECK_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
