mod config;
mod run;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {0}: {1}")]
    Io(String, std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(#[from] subcmv::Error),
    #[error("coherence violation: singular verdict with bounded transfer matrices at theta = {0:?}")]
    Coherence(Vec<f64>),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(..) => 2,
            CliError::Numerical(_) | CliError::Coherence(_) => 3,
        }
    }
}

/// Spectral classification of extended CMV matrices.
///
/// Output paths in the config are resolved against $SUBCMV_OUT_DIR when set.
#[derive(Parser)]
#[command(name = "subcmv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a grid of angles and write the verdict reports.
    Classify {
        #[arg(long)]
        config: PathBuf,
        /// Uniform grid size, overriding `theta_grid`.
        #[arg(long)]
        theta: Option<usize>,
        /// Worker threads; defaults to the available processors.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Write the radial trace at one angle.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        force: bool,
    },
    /// Run the embedded invariant checks.
    Selftest {
        /// Negate an entry of the Szegő matrix; the determinant check must fail.
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Classify { config, theta, jobs, force } => run::run_classify(&config, theta, jobs, force).map(|r| {
            eprintln!("classified {} angles", r.points.len());
        }),
        Command::Trace { config, theta, force } => run::run_trace(&config, theta, force).map(|v| {
            eprintln!("theta = {theta}: {}", v.verdict.as_str());
        }),
        Command::Selftest { inject_sign_flip } => {
            let opts = subcmv::selftest::SelftestOptions { flip_szego_sign: inject_sign_flip };
            return match run::run_selftest(&mut std::io::stdout().lock(), opts) {
                Ok(true) => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("subcmv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
