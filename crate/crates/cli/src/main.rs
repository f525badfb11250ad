//! `textspike` command-line driver.
//!
//! ```text
//! textspike prepare --corpus data/20news
//! textspike train --set encoder.neurons=200
//! textspike eval
//! textspike sweep --axis inhibition --levels 0,0.5,1,1.5,2
//! textspike inspect --model out/bank/encoder_00.setm --neuron 3
//! ```

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "textspike", version, about = "Spiking-neural-network text encoder")]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set encoder.neurons=50`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(flatten)]
    paths: PathFlags,

    /// Worker threads for training and encoding.
    #[arg(long, global = true)]
    parallelism: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct PathFlags {
    /// Raw corpus root (`paths.corpus`).
    #[arg(long, global = true, value_name = "DIR")]
    corpus: Option<PathBuf>,
    /// Prepared artifacts directory (`paths.prepared`).
    #[arg(long, global = true, value_name = "DIR")]
    prepared: Option<PathBuf>,
    /// Encoder bank directory (`paths.bank`).
    #[arg(long, global = true, value_name = "DIR")]
    bank: Option<PathBuf>,
    /// Results directory (`paths.results`).
    #[arg(long, global = true, value_name = "DIR")]
    results: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize the corpus and write the dictionary and TF-IDF matrices.
    Prepare,
    /// Train, prune and save the encoder bank.
    Train,
    /// Encode prepared documents with the bank into spike-count features.
    Encode {
        #[arg(long, value_enum, default_value_t = SplitArg::Both)]
        split: SplitArg,
    },
    /// Encode, fit the classifier on the training split and score the test split.
    Eval,
    /// Accuracy over a grid of inhibition levels or bank sizes and pruning levels.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated inhibition levels (default: `sweep.inhibition_levels`).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// Comma-separated neurons per encoder (default: `sweep.sizes`).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Comma-separated pruning levels (default: `sweep.thetas`).
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
    },
    /// Print the strongest connections of one neuron.
    Inspect {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long)]
        neuron: usize,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Also write every kept weight of the neuron, sorted, as CSV.
        #[arg(long, value_name = "FILE")]
        export: Option<PathBuf>,
    },
    /// Write a synthetic topic corpus in the bydate layout.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        train_per_class: usize,
        #[arg(long, default_value_t = 100)]
        test_per_class: usize,
        #[arg(long, default_value_t = 20)]
        seed: u64,
    },
    /// Print the resolved configuration as TOML.
    Config,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Inhibition,
    SizePruning,
}

/// Bad configuration or arguments; reported with exit code 2.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut config = base.with_overrides(&cli.overrides)?;
    let p = &cli.paths;
    for (flag, slot) in [
        (&p.corpus, &mut config.paths.corpus),
        (&p.prepared, &mut config.paths.prepared),
        (&p.bank, &mut config.paths.bank),
        (&p.results, &mut config.paths.results),
    ] {
        if let Some(v) = flag {
            *slot = v.clone();
        }
    }
    if let Some(n) = cli.parallelism {
        config.parallelism = n;
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = resolve_config(&cli).map_err(|e| InputError(format!("{e:#}")))?;
    match cli.command {
        Command::Prepare => commands::prepare(&config),
        Command::Train => commands::train(&config),
        Command::Encode { split } => commands::encode(
            &config,
            matches!(split, SplitArg::Train | SplitArg::Both),
            matches!(split, SplitArg::Test | SplitArg::Both),
        ),
        Command::Eval => commands::eval(&config),
        Command::Sweep {
            axis,
            levels,
            sizes,
            thetas,
        } => {
            let mut grid = config.sweep.clone();
            grid.inhibition_levels = levels.unwrap_or(grid.inhibition_levels);
            grid.sizes = sizes.unwrap_or(grid.sizes);
            grid.thetas = thetas.unwrap_or(grid.thetas);
            match axis {
                AxisArg::Inhibition => commands::sweep_inhibition(&config, &grid.inhibition_levels),
                AxisArg::SizePruning => commands::sweep_size_pruning(&config, &grid.sizes, &grid.thetas),
            }
        }
        Command::Inspect {
            model,
            neuron,
            top_k,
            export,
        } => commands::inspect(&config, &model, neuron, top_k, export.as_deref()),
        Command::Synth {
            out,
            train_per_class,
            test_per_class,
            seed,
        } => commands::synth(&out, train_per_class, test_per_class, seed),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<textspike::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
