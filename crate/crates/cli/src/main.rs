mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use beamtrack::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "beamtrack", version, about = "Simulate, train and evaluate beam-tracking predictors")]
struct Cli {
    /// Worker threads for data-parallel training and embedding.
    #[arg(long, global = true, env = "BEAMTRACK_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Options shared by commands that read a JSON config.
#[derive(Args, Clone, Debug)]
pub struct ConfigArgs {
    /// JSON config file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set train.learning_rate=0.01`.
    #[arg(long = "set", value_name = "KEY.PATH=VALUE")]
    sets: Vec<String>,
}

#[derive(Args, Clone, Debug)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "BEAMTRACK_OUT_DIR")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic corpus and write it as CSV plus feature files.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Read a ViWi-style CSV and its feature files into a dataset directory.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Re-partition a (train, validation) pair into image-disjoint D_t, D_v1, D_v2.
    Split {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Partition a dataset into std clusters A, B and C.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Score the last-step, linear-regression and statistical baselines.
    Baselines {
        /// Dataset to score.
        #[arg(long)]
        data: PathBuf,
        /// Dataset the statistical baseline is fitted on; defaults to `--data`.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        sigma: f64,
        #[arg(long, default_value_t = 128)]
        num_beams: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train a predictor, checkpointing after every epoch.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop once this many epochs are complete, leaving a checkpoint.
        #[arg(long)]
        stop_after_epoch: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Score a trained predictor on a dataset.
    Eval {
        /// Model or checkpoint file written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Override the scoring sigma stored with the model.
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a cluster-conditioned training plan or a memory-length sweep.
    Experiment {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Render a saved report file as text or CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Dimension(_) | Error::Bounds(_) | Error::Json(_) => 2,
        Error::Leakage { .. }
        | Error::Integrity(_)
        | Error::Parse { .. }
        | Error::Index { .. }
        | Error::Contract(_)
        | Error::Csv(_)
        | Error::Io { .. } => 3,
        Error::Checkpoint(_) => 4,
        Error::Training(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("global pool is set once");
    }
    let result = match cli.command {
        Command::Simulate { cfg, out } => commands::simulate(&cfg, &out.out),
        Command::Ingest { csv, features, out } => commands::ingest(&csv, &features, &out.out),
        Command::Split { train, val, cfg, out } => commands::split(&train, &val, &cfg, &out.out),
        Command::Cluster { data, cfg, out } => commands::cluster(&data, &cfg, &out.out),
        Command::Baselines { data, train, sigma, num_beams, seed, out } => {
            commands::baselines(&data, train.as_deref(), sigma, num_beams, seed, &out.out)
        }
        Command::Train { train, cfg, resume, stop_after_epoch, out } => {
            commands::train(&train, &cfg, resume, stop_after_epoch, &out.out)
        }
        Command::Eval { model, data, sigma, out } => commands::eval(&model, &data, sigma, &out.out),
        Command::Experiment { train, val, cfg, out } => commands::experiment(&train, &val, &cfg, &out.out),
        Command::Report { input, format, output } => commands::report(&input, format, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
