mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use instatrait::pipeline::PipelineError;
use instatrait::psychometrics::Scheme;
use thiserror::Error;

/// Predicts Big Five traits and behavioral competencies from Instagram
/// profile features.
#[derive(Debug, Parser)]
#[command(name = "instatrait", version)]
pub struct Cli {
    /// Pipeline configuration (JSON). A run manifest is accepted as well.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides the base seed of the configuration.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Work or run directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score questionnaires, compute norms and bin every trait.
    ScoreQuestionnaire,
    /// Parse the exported Instagram snapshots.
    Ingest,
    /// Build the popular-account catalog from ingested snapshots.
    Catalog,
    /// Assemble the participant x feature matrix.
    Features,
    /// Split each trait and select features on the training rows.
    Select,
    /// Train every configured family on the selected features.
    Train,
    /// Score the trained models on the held-out rows.
    Evaluate,
    /// Render the evaluation tables.
    Report,
    /// Generate a synthetic cohort and a config that reads it.
    Synth(SynthArgs),
    /// Run every stage into the output directory.
    Run,
    /// Score one candidate with the models of a completed run.
    ScoreCandidate(CandidateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Cohort specification (JSON); defaults apply otherwise.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub participants: Option<usize>,
    /// Number of popular accounts.
    #[arg(long)]
    pub width: Option<usize>,
    /// Planted accounts per trait.
    #[arg(long)]
    pub planted: Option<usize>,
    #[arg(long)]
    pub effect: Option<f64>,
    #[arg(long)]
    pub label_noise: Option<f64>,
    /// No planted signal at all.
    #[arg(long)]
    pub null: bool,
    /// Every profile public and crawled.
    #[arg(long)]
    pub no_missingness: bool,
}

#[derive(Debug, Args)]
pub struct CandidateArgs {
    /// Completed run directory; defaults to `--out`.
    #[arg(long, value_name = "DIR")]
    pub run: Option<PathBuf>,
    /// Export directory of the candidate (profile.json and friends).
    #[arg(long, value_name = "DIR")]
    pub snapshot: Option<PathBuf>,
    /// Demographics CSV holding the candidate's row.
    #[arg(long, value_name = "FILE")]
    pub demographics: Option<PathBuf>,
    /// Row to take from the demographics file; defaults to the snapshot's id.
    #[arg(long)]
    pub participant: Option<String>,
    #[arg(long, default_value = "two")]
    pub scheme: Scheme,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Pipeline(e) if e.is_validation() => 2,
            CliError::Pipeline(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
