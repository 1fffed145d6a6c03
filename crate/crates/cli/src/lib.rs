//! `ttm` command-line front end: planted-data generation, fitting,
//! evaluation, Monte-Carlo sweeps and scree data, each writing a replayable
//! manifest next to its outputs.

pub mod commands;
pub mod error;
pub mod format;
pub mod manifest;
pub mod sweep;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ttm", version, about = "Tensor topic modeling by HOSVD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a planted model and multinomial counts from a JSON spec.
    Generate(GenerateArgs),
    /// Fit a Tucker topic model to a tensor file.
    Fit(FitArgs),
    /// Permutation-aligned losses of a fitted model against a planted one.
    Eval(EvalArgs),
    /// Monte-Carlo sweep over a grid of sizes, lengths and methods.
    Sweep(SweepArgs),
    /// Leading eigenvalues of one mode's second-moment matrix.
    Scree(ScreeArgs),
    /// Re-run a command from its manifest and compare outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator spec (JSON); omitted fields take their defaults.
    pub spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub tensor: PathBuf,
    /// Ranks K1,K2,K3.
    #[arg(long, value_parser = parse_ranks)]
    pub ranks: Option<[usize; 3]>,
    /// Vocabulary threshold constant c' (0 keeps every word).
    #[arg(long)]
    pub sparse: Option<f64>,
    /// HOOI refinement sweeps (5 when given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "5")]
    pub hooi: Option<usize>,
    /// Treat the input as expected frequencies: no variance correction,
    /// no thresholding.
    #[arg(long)]
    pub oracle: bool,
    /// Recorded in the manifest; fitting itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with any of `ranks`, `sparse`, `hooi`, `oracle`, `seed`;
    /// flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub truth: PathBuf,
    /// Write `PREFIX.eval.csv` and a manifest instead of printing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub grid: PathBuf,
    /// Overrides the grid's trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Overrides the grid's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScreeArgs {
    pub tensor: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub mode: u8,
    #[arg(long = "k-max")]
    pub k_max: usize,
    /// Skip the mode-3 variance correction.
    #[arg(long)]
    pub oracle: bool,
    /// Write `PREFIX.scree.csv` and a manifest instead of printing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Prefix for the replayed outputs.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_ranks(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected K1,K2,K3, got `{s}`"));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .parse::<usize>()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| format!("rank `{p}` is not a positive integer"))?;
    }
    Ok(out)
}

/// Parses `args` (without the program name) and runs the command.
/// Output that is not written to files goes to `stdout`.
pub fn run_args<I, S>(args: I, stdout: &mut dyn std::io::Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(std::iter::once("ttm".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    commands::dispatch(cli.command, argv, stdout)
}
