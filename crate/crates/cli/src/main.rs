use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qfolio::commands::{
    self, cmd_backtest, cmd_compare, cmd_ingest, cmd_train, comparison_csv, load_config, CliError,
};
use qfolio::synth::{broadcast, generate, SynthSpec};

#[derive(Parser)]
#[command(
    name = "qfolio",
    about = "Deep Q-learning portfolio backtesting engine",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's rng_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the dataset and print its summary.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the agent over the configured training range.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a checkpoint greedily over the test range.
    Backtest {
        #[command(flatten)]
        run: RunArgs,
        /// Trained checkpoint file.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Compare the agent against the classical baselines.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Trained checkpoint file.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Generate a seeded synthetic market CSV.
    Synth {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        assets: usize,
        #[arg(long)]
        days: usize,
        /// Daily log drift: one value, or one per asset, comma-separated.
        #[arg(long, default_value = "0.0", value_delimiter = ',')]
        drift: Vec<f64>,
        /// Daily volatility: one value, or one per asset, comma-separated.
        #[arg(long, default_value = "0.01", value_delimiter = ',')]
        vol: Vec<f64>,
        /// Common pairwise shock correlation in [0, 1].
        #[arg(long, default_value_t = 0.0)]
        corr: f64,
        #[arg(long, default_value = "2016-01-04")]
        start_date: chrono::NaiveDate,
        #[arg(long, default_value_t = 100.0)]
        initial_price: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { config, seed } => {
            let config = load_config(&config, seed)?;
            let summary = cmd_ingest(&config)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
        }
        Command::Train { run } => {
            let config = load_config(&run.config, run.seed)?;
            let manifest = cmd_train(&config, &run.out)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&manifest).expect("manifest serializes")
            );
        }
        Command::Backtest { run, checkpoint } => {
            let config = load_config(&run.config, run.seed)?;
            let (metrics, _) = cmd_backtest(&config, &checkpoint, &run.out)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&metrics).expect("metrics serialize")
            );
        }
        Command::Compare { run, checkpoint } => {
            let config = load_config(&run.config, run.seed)?;
            let rows = cmd_compare(&config, &checkpoint, &run.out)?;
            print!("{}", comparison_csv(&rows));
        }
        Command::Synth {
            out,
            assets,
            days,
            drift,
            vol,
            corr,
            start_date,
            initial_price,
            seed,
        } => {
            let spec = SynthSpec {
                assets,
                days,
                start_date,
                drift: broadcast(&drift, assets)?,
                vol: broadcast(&vol, assets)?,
                correlation: corr,
                initial_price,
                seed,
            };
            let table = generate(&spec)?;
            commands::write_table_csv(&table, &out)?;
            println!(
                "wrote {} ({} assets, {} rows)",
                out.display(),
                table.num_assets(),
                table.num_rows()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.kind.exit_code() as u8)
        }
    }
}
