//! `neurodecode`: synthesize or preprocess data, train decoders and the
//! CSP+LDA baseline, and analyze the resulting runs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neurodecode::analysis::{Aggregation, ExtractionMode};
use neurodecode::dataset::{SynthMode, Target};
use neurodecode::models::{Arch, Size};

#[derive(Parser, Debug)]
#[command(name = "neurodecode", version, about = "EEG animacy decoding benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded synthetic data set.
    Synth(SynthArgs),
    /// Run the preprocessing chain over a raw recording file.
    Preprocess(PreprocessArgs),
    /// Train a decoder with the fixed protocol into a run directory.
    Train(TrainArgs),
    /// Fit and evaluate the CSP+LDA baseline into a run directory.
    Baseline(BaselineArgs),
    /// Print the peak metrics of a run.
    Eval(EvalArgs),
    /// Write metrics, curves, object comparison and category tables.
    Analyze(AnalyzeArgs),
    /// Finite-difference check of every model's gradients.
    Gradcheck(GradcheckArgs),
    /// Compare parameter counts with the reference table.
    AuditParams,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generator mode: linear, xor or subject.
    #[arg(long, value_parser = clap::value_parser!(SynthMode))]
    pub mode: SynthMode,
    /// Number of trials (even).
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Number of synthetic subjects.
    #[arg(long, default_value_t = 1)]
    pub subjects: u32,
    /// Signal peak over per-channel noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub snr: f64,
    /// Generator seed.
    #[arg(long, env = "NEURODECODE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output epoch file; metadata goes to FILE.meta.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Write a continuous 1000 Hz, 64-channel recording instead of epochs.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Raw recording file written by `synth --raw`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output epoch file.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Epoch file.
    #[arg(long)]
    pub data: PathBuf,
    /// eegnet, lstm, dgcnn, transformer or conformer.
    #[arg(long, value_parser = clap::value_parser!(Arch))]
    pub arch: Arch,
    /// small, medium or large.
    #[arg(long, value_parser = clap::value_parser!(Size), default_value = "small")]
    pub size: Size,
    /// `cross`, `single:ID`, `single:ID,ID,...` or `single:all`.
    #[arg(long, default_value = "cross")]
    pub task: String,
    /// Defaults to 945 for cross-subject and 460 for single-subject runs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seed for initialization, dropout, shuffling and the split; overrides
    /// the configuration file (default 0).
    #[arg(long, env = "NEURODECODE_SEED")]
    pub seed: Option<u64>,
    /// Run directory; one subject-ID subdirectory per subject when several
    /// subjects are trained.
    #[arg(long)]
    pub out: PathBuf,
    /// Training configuration (JSON); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Label to decode: animacy or subject.
    #[arg(long, value_parser = parse_target)]
    pub target: Option<Target>,
    /// Defaults to the size's rate, or 0.5 for single-subject runs.
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Learning rate at the start of each cycle.
    #[arg(long)]
    pub lr_max: Option<f64>,
    /// Learning rate at the end of each cycle.
    #[arg(long)]
    pub lr_min: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Test fraction used when the data carries no test split.
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    /// Parallel single-subject runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// Epoch file.
    #[arg(long)]
    pub data: PathBuf,
    /// Spatial filter pairs.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the train/test split when the data carries none.
    #[arg(long, env = "NEURODECODE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Test fraction used when the data carries no test split.
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Run directory.
    #[arg(long)]
    pub run: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Run directories, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub runs: Vec<PathBuf>,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Headline extraction: max_last5 or mean_last5.
    #[arg(long, default_value = "max_last5", value_parser = parse_mode)]
    pub mode: ExtractionMode,
    /// Category table aggregation: mean_of_models or pooled.
    #[arg(long, default_value = "mean_of_models", value_parser = parse_aggregation)]
    pub aggregation: Aggregation,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Check one architecture only.
    #[arg(long, value_parser = clap::value_parser!(Arch))]
    pub arch: Option<Arch>,
    /// Check one size only.
    #[arg(long, value_parser = clap::value_parser!(Size))]
    pub size: Option<Size>,
    /// Seed for the model weights, inputs and probed entries.
    #[arg(long, env = "NEURODECODE_SEED", default_value_t = 0)]
    pub seed: u64,
}

fn parse_target(s: &str) -> Result<Target, String> {
    match s {
        "animacy" => Ok(Target::Animacy),
        "subject" => Ok(Target::Subject),
        _ => Err(format!("unknown target {s:?} (animacy, subject)")),
    }
}

fn parse_mode(s: &str) -> Result<ExtractionMode, String> {
    s.parse().map_err(|e: neurodecode::Error| e.to_string())
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    s.parse().map_err(|e: neurodecode::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
