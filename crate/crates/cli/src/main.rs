//! `matscat`: forward and inverse scattering jobs from a JSON job file.

mod config;
mod manifest;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Job, Mode};
use run::Failure;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_WARNINGS: u8 = 4;

#[derive(Parser)]
#[command(name = "matscat", version, about = "Matrix Schrödinger scattering on the half-line and on star graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a job and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the mode in the job file.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Output directory; defaults to the job's `out`, else `matscat-out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        parallel: Option<usize>,
        /// Exit with status 4 when any warning was raised.
        #[arg(long)]
        strict: bool,
    },
    /// Check a job file without running any numerics.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { config, mode } => validate(&config, mode),
        Command::Run { config, mode, out, parallel, strict } => run_job(&config, mode, out, parallel, strict),
    }
}

fn load(path: &std::path::Path, mode: Option<Mode>) -> Result<(Job, Mode), ExitCode> {
    let report = |diags: Vec<config::Diagnostic>| {
        for d in &diags {
            eprintln!("error: {d}");
        }
        ExitCode::from(EXIT_CONFIG)
    };
    let job = Job::load(path).map_err(report)?;
    let diags = job.validate(mode);
    if !diags.is_empty() {
        return Err(report(diags));
    }
    let mode = mode.or(job.config.mode).expect("validated");
    Ok((job, mode))
}

fn validate(path: &std::path::Path, mode: Option<Mode>) -> ExitCode {
    match load(path, mode) {
        Ok((_, mode)) => {
            println!("{}: valid {} job", path.display(), mode.name());
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

fn run_job(path: &std::path::Path, mode: Option<Mode>, out: Option<PathBuf>, parallel: Option<usize>, strict: bool) -> ExitCode {
    let (job, mode) = match load(path, mode) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let out = out.unwrap_or_else(|| job.config.out.as_ref().map(|p| job.resolve(p)).unwrap_or_else(|| PathBuf::from("matscat-out")));
    let threads = parallel.or(job.config.parallel).unwrap_or(0);
    if parallel == Some(0) {
        eprintln!("error: --parallel must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match pool.install(|| run::run(&job, mode, &out)) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} job finished: {} files in {}", mode.name(), outcome.files, out.display());
            if strict && !outcome.warnings.is_empty() {
                ExitCode::from(EXIT_WARNINGS)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Numerical { stage, message }) => {
            eprintln!("error: numerical failure in stage {stage}: {message}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Config(m)) | Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
