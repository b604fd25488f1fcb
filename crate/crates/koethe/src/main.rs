use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use koethe::commands::{self, ConditionArg, Format, Settings, WitnessKind};
use koethe::config::load;
use koethe::CliError;

#[derive(Parser)]
#[command(name = "koethe", version, about = "Köthe sequence algebra workbench")]
struct Cli {
    /// Prefix length for numerics (overrides the config).
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Level budget for target searches (overrides the config).
    #[arg(long, global = true)]
    levels: Option<u64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for the sampled membership battery.
    #[arg(long, env = "KOETHE_SEED", default_value_t = 0, hide = true)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a config and check the Köthe set axioms.
    Validate { config: PathBuf },
    /// Write <name>.profile.json with conditions and dimensions.
    Classify { config: PathBuf },
    /// Decide one condition.
    Check {
        #[arg(value_enum)]
        condition: ConditionArg,
        config: PathBuf,
    },
    /// Construct a counterexample sequence.
    Witness {
        #[arg(value_enum)]
        kind: WitnessKind,
        config: PathBuf,
        /// Number of blocks (non-algebra) or largest index searched (non-idempotent).
        #[arg(long, default_value_t = 64)]
        k_max: u64,
    },
    /// Build the approximate identity u_n and its convergence curve.
    ApproxId {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        level: u64,
        #[arg(long, default_value_t = 100)]
        steps: u64,
        #[arg(long, default_value = "2^(-i)")]
        element: String,
    },
    /// Coefficientwise product of two power series.
    Hadamard {
        /// Builtin name (exp, geometric) or coefficient CSV.
        f: String,
        g: String,
        #[arg(long, default_value_t = 512)]
        n: usize,
    },
    /// Aggregate the profiles in a directory into one table.
    Report { dir: PathBuf },
}

fn run(cli: Cli) -> Result<String, CliError> {
    let settings = Settings {
        depth: cli.depth,
        levels: cli.levels,
        epsilon: cli.epsilon,
        out: cli.out,
        format: cli.format,
        seed: cli.seed,
    };
    match cli.command {
        Command::Validate { config } => commands::validate(&load(&config)?, &settings),
        Command::Classify { config } => commands::classify_cmd(&load(&config)?, &settings),
        Command::Check { condition, config } => commands::check_cmd(&load(&config)?, condition, &settings),
        Command::Witness { kind, config, k_max } => commands::witness_cmd(&load(&config)?, kind, k_max, &settings),
        Command::ApproxId { config, level, steps, element } => {
            commands::approx_id(&load(&config)?, level, steps, &element, &settings)
        }
        Command::Hadamard { f, g, n } => commands::hadamard_cmd(&f, &g, n, &settings),
        Command::Report { dir } => commands::report_cmd(&dir, &settings),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
