mod commands;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] fairshare::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(fairshare::Error::Size { .. }) => 3,
            _ => 2,
        }
    }
}

/// Allocation with verified, budget-balanced payments.
#[derive(Debug, Parser)]
#[command(name = "fairshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Canonical optimal allocation of the declared scores.
    Solve { file: PathBuf },
    /// Run the mechanism: allocate, verify, pay.
    Pay {
        file: PathBuf,
        #[command(flatten)]
        rule: RuleArgs,
        /// Route the exact rule to the sampled one above its agent cap.
        #[arg(long)]
        fallback_sampled: bool,
    },
    /// Run property checks on the mechanism at the file's true scores.
    Audit {
        file: PathBuf,
        /// Comma-separated checks; defaults to all of them.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        checks: Option<Vec<String>>,
        #[command(flatten)]
        rule: RuleArgs,
        /// Extra deviation tried first, e.g. `r1:p2=2,p3=2`. Repeatable.
        #[arg(long = "deviation")]
        deviations: Vec<String>,
        /// Randomised trials for implementability and no-punishment.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Runs of the sampled rule measured by sampler-accuracy.
        #[arg(long, default_value_t = 200)]
        sampler_trials: usize,
        /// Write counterexamples here instead of standard error.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shapley value of a coalitional game over the true scores.
    Shapley {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = GameKind::Best)]
        game: GameKind,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Parse a scenario file and print it back in normal form.
    Check { file: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleKind {
    Exact,
    ExactDeclared,
    Sampled,
    Normalized,
    Proj,
    Owner,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GameKind {
    Best,
    Marg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Sampled,
}

#[derive(Debug, Args)]
struct RuleArgs {
    #[arg(long, value_enum, default_value_t = RuleKind::Exact)]
    rule: RuleKind,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Scale `all` by the total verified value (budget-balanced).
    #[arg(long)]
    variant_all: bool,
    /// Normalized rule with the sign `p = v − ξ̂·R`.
    #[arg(long = "paper-sign")]
    flipped_sign: bool,
}

#[derive(Debug, Args)]
struct SamplingArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = fairshare::sampling::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = fairshare::sampling::DEFAULT_DELTA)]
    delta: f64,
    /// Samples per repetition, overriding the value derived from ε.
    #[arg(long)]
    samples: Option<usize>,
    /// Repetitions, overriding the value derived from δ.
    #[arg(long)]
    reps: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
