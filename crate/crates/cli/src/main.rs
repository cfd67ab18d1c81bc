//! `tempora` — train, evaluate and inspect temporal restricted Boltzmann
//! machines from the command line.
//!
//! Subcommands: `train` (staged pipeline → checkpoint + manifest + metrics),
//! `eval` (filling-in report and free-running horizon curve), `synth`
//! (seeded benchmark data and chunk augmentation), `verify` (oracle-backed
//! self checks) and `inspect` (checkpoint metadata). Everything is seeded;
//! a run with the same config and seed reproduces its artifacts
//! byte for byte.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use commands::CliError;
use config::EvalModeName;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "tempora",
    version,
    about = "Temporal RBMs with autoencoding pretraining: train, evaluate, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint.bin, manifest.txt and metrics.csv
    Train(TrainArgs),
    /// Score a checkpoint: filling-in report.csv and horizon.csv
    Eval(EvalArgs),
    /// Generate a dataset: seeded synthetic benchmarks or chunk augmentation
    Synth(SynthArgs),
    /// Run the oracle-backed self checks and print a pass/fail table
    Verify(VerifyArgs),
    /// Print what a checkpoint contains
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Config file of `key = value` lines (see `--set` for the keys)
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set model.order=4 (repeatable)
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Dataset CSV; flag form of data.path
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Flag form of train.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Autoencoding pretraining on delayed weights; flag form of train.use_ta
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    use_ta: Option<bool>,
    /// Worker-thread cap; flag form of `threads` (TEMPORA_THREADS also works)
    #[arg(long)]
    threads: Option<usize>,
    /// Where checkpoint.bin, manifest.txt and metrics.csv go
    #[arg(long, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint produced by `tempora train`
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Dataset CSV; defaults to the one named in the run manifest
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Config file of `key = value` lines
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key (repeatable)
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// First frame of the evaluation range; defaults to the end of the
    /// training range when evaluating the training dataset
    #[arg(long)]
    start: Option<usize>,
    /// One past the last frame of the evaluation range; defaults to the end
    /// of the dataset
    #[arg(long)]
    end: Option<usize>,
    /// How predictions are formed; flag form of eval.mode
    #[arg(long, value_enum)]
    mode: Option<EvalModeName>,
    /// Chains averaged per prediction in posterior-mean mode
    #[arg(long)]
    samples: Option<usize>,
    /// Gibbs steps per prediction; flag form of eval.gibbs_steps
    #[arg(long)]
    gibbs_steps: Option<usize>,
    /// Repetitions behind every mean ± sd; flag form of eval.repetitions
    #[arg(long)]
    repetitions: Option<usize>,
    /// Free-running steps for horizon.csv (0 skips it); flag form of
    /// eval.horizon
    #[arg(long)]
    horizon: Option<usize>,
    /// Evaluation RNG seed; flag form of train.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Permit scoring frames the checkpoint was trained on
    #[arg(long)]
    allow_train_eval: bool,
    /// Worker-thread cap (TEMPORA_THREADS also works)
    #[arg(long)]
    threads: Option<usize>,
    /// Where report.csv and horizon.csv go
    #[arg(long, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[command(subcommand)]
    kind: SynthKind,
}

#[derive(Subcommand)]
enum SynthKind {
    /// Sum of one independent sine per dimension — the simplest smoke dataset
    Multisine {
        #[arg(long, default_value_t = tempora_core::data::MULTISINE_DIMS)]
        dims: usize,
        /// Frames to generate
        #[arg(long, default_value_t = tempora_core::data::MULTISINE_LENGTH)]
        length: usize,
        /// Tone frequencies (cycles per frame), one per dimension
        #[arg(long, value_delimiter = ',', value_name = "F1,F2,...")]
        freqs: Option<Vec<f64>>,
        /// Observation-noise standard deviation
        #[arg(long, default_value_t = tempora_core::data::MULTISINE_NOISE_SD)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; a sidecar .manifest.txt records the generator settings
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Mixed harmonic oscillators; defaults are the released benchmark config
    Harmonic {
        #[arg(long, default_value_t = tempora_core::data::BENCHMARK_DIMS)]
        dims: usize,
        /// Frames to generate
        #[arg(long, default_value_t = tempora_core::data::BENCHMARK_LENGTH)]
        length: usize,
        /// Fundamental periods in frames, one per oscillator (at most `dims`)
        #[arg(long, value_delimiter = ',', value_name = "P1,P2,...")]
        periods: Option<Vec<f64>>,
        /// Overtones per oscillator
        #[arg(long, default_value_t = tempora_core::data::BENCHMARK_HARMONICS)]
        harmonics: usize,
        /// Overtone amplitude falloff exponent (amplitude 1/k^decay)
        #[arg(long, default_value_t = tempora_core::data::BENCHMARK_HARMONIC_DECAY)]
        decay: f64,
        /// Observation-noise standard deviation
        #[arg(long, default_value_t = tempora_core::data::BENCHMARK_NOISE_SD)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; a sidecar .manifest.txt records the generator settings
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Group a univariate series into frames of `chunk` observations
    Chunk {
        /// Univariate input CSV
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Observations per frame
        #[arg(long)]
        chunk: usize,
        /// Input has a header row
        #[arg(long)]
        has_header: bool,
        /// Output CSV; a sidecar .manifest.txt records the source
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum LevelArg {
    /// One model per check — a fast smoke pass
    Quick,
    /// The complete sweep over unit kinds and extra model draws
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FaultArg {
    None,
    /// Negate the CD gradient before the direction check
    FlipCdSign,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
    level: LevelArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corrupt a computation on purpose to demonstrate the checks can fail
    #[arg(long, value_enum, hide = true, default_value_t = FaultArg::None)]
    inject_fault: FaultArg,
}

#[derive(Args)]
struct InspectArgs {
    /// Checkpoint to describe
    checkpoint: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Synth(args) => commands::synth::run(args),
        Command::Verify(args) => commands::verify::run(args),
        Command::Inspect(args) => commands::inspect::run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::MissingInput(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Other(error)) => {
            eprintln!("error: {error:#}");
            ExitCode::from(1)
        }
    }
}
