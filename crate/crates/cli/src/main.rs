//! Command-line frontend. Every subcommand reads a TOML experiment
//! configuration; flags override the `[run]` section where that makes
//! sense. Exit codes: 0 on success, 1 when a verification check fails or an
//! internal invariant breaks, 2 on configuration or input errors.

mod config;
mod experiment;

use clap::{Parser, Subcommand, ValueEnum};
use config::{ExperimentConfig, Mode};
use experiment::CliError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "brwre",
    version,
    about = "Branching random walks in a site-indexed random environment: \
             simulation, velocity solving, and verification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Tree,
    Counts,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Tree => Mode::Tree,
            ModeArg::Counts => Mode::Counts,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for the minimal-position velocity and related constants
    Velocity {
        #[arg(long)]
        config: PathBuf,
        /// Also write the report as JSON
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Classify the regime (supercritical / critical / subcritical)
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run replicas and write minimal positions at the checkpoints as CSV
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override run.mode
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Override run.n
        #[arg(long)]
        n: Option<u32>,
        /// Override run.replicas
        #[arg(long)]
        replicas: Option<u32>,
        /// Override run.seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one tree genealogy through the location-to-time transformation
    Transform {
        #[arg(long)]
        config: PathBuf,
        /// Override run.n
        #[arg(long)]
        n: Option<u32>,
        /// Override run.seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replica study of M_n/n across checkpoints with summary statistics
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Write the per-replica table as CSV
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the summary as JSON
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Cross-check the simulators against exact small-case references
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
    },
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing summary: {e}")))?;
    std::fs::write(path, json + "\n")
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.cmd {
        Cmd::Velocity { config, summary } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let v = experiment::velocity_summary(&cfg)?;
            print!("{}", v.to_text());
            if let Some(path) = summary {
                write_json(&path, &v)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Classify { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let (text, ok) = experiment::classify_report(&cfg)?;
            print!("{text}");
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Simulate {
            config,
            mode,
            n,
            replicas,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?
                .override_run(mode.map(Mode::from), n, replicas, seed)?;
            let outcomes = experiment::run_replicas(&cfg)?;
            experiment::write_ratio_csv(&out, &outcomes)?;
            let rows: usize = outcomes.iter().map(|o| o.at_checkpoints.len()).sum();
            println!("wrote {rows} rows to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Transform {
            config,
            n,
            seed,
            out,
        } => {
            let cfg =
                ExperimentConfig::from_path(&config)?.override_run(None, n, None, seed)?;
            let result = experiment::run_transform(&cfg)?;
            experiment::write_transform_csv(&out, &result.process)?;
            let horizon = result.minima.horizon();
            println!(
                "wrote {} occupied sites to {} (final minimum M_{horizon} = {})",
                result.process.max_site(),
                out.display(),
                result.minima.m(horizon)?,
            );
            let mut failed = false;
            for c in &result.checks {
                let verdict = match c.verdict {
                    brwre::KnVerdict::Pass => "pass",
                    brwre::KnVerdict::Censored => "censored",
                    brwre::KnVerdict::Fail => {
                        failed = true;
                        "FAIL"
                    }
                };
                println!("n={} k_n={} M_n={} verdict={verdict}", c.n, c.k_n, c.m_n);
            }
            Ok(if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Cmd::Convergence {
            config,
            out,
            summary,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let (s, outcomes) = experiment::run_convergence(&cfg)?;
            print!("{}", s.to_text());
            if let Some(path) = out {
                experiment::write_ratio_csv(&path, &outcomes)?;
            }
            if let Some(path) = summary {
                write_json(&path, &s)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::OracleCheck { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let (report, all_pass) = experiment::oracle_check(&cfg)?;
            print!("{report}");
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

/// Restore the default SIGPIPE disposition so `brwre ... | head` exits
/// quietly instead of panicking on a closed pipe.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
