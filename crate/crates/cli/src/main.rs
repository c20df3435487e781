mod commands;
mod config;
mod error;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::RunFlags;
use config::{Format, Preset};

/// Monte Carlo simulator of error detection, state preparation and erasure
/// conversion in a molecular tweezer array.
#[derive(Debug, Parser)]
#[command(name = "erasim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a schedule script and write records, summary.json and meta.json.
    Run(RunArgs),
    /// Repeat a run over values of one parameter (or a `script.NAME`
    /// placeholder) and write sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted parameter key, or `script.NAME` to fill `{NAME}` in the script.
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Run registered reference scenarios and compare with their reference values.
    Reproduce {
        /// Target id or criterion number; all targets when omitted.
        target: Option<String>,
        /// List the registered targets.
        #[arg(long)]
        list: bool,
        /// Replace the registered master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the state catalog and partition classes as JSON.
    Catalog,
    /// Print the hold transition rates as JSON.
    Rates {
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration; flags take precedence over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed. Required here or in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Raman scheme used by every pulse and composite detection in the script.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Parameter override with a dotted key, e.g. `images.error.threshold=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Treat schedule warnings as validation errors.
    #[arg(long)]
    strict: bool,
}

impl From<RunArgs> for RunFlags {
    fn from(a: RunArgs) -> Self {
        RunFlags {
            config: a.config,
            script: a.script,
            trials: a.trials,
            seed: a.seed,
            out: a.out,
            format: a.format,
            preset: a.preset,
            set: a.set,
            strict: a.strict,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(&args.into()),
        Command::Sweep { run, key, values } => commands::sweep(&run.into(), &key, &values),
        Command::Reproduce { target, list, seed, set, json } => {
            commands::reproduce(target.as_deref(), list, seed, &set, json.as_deref())
        }
        Command::Catalog => commands::catalog(),
        Command::Rates { set } => commands::rates(&set),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit()
        }
    }
}
