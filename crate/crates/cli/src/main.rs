use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fracdual_cli::{run, Command, ExperimentConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Assemble,
    Solve,
    DualityCheck,
    Convergence,
    Fundamental,
    Regularity,
    Embedding,
    Riesz,
    Geometry,
    Exponents,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Assemble => Command::Assemble,
            Sub::Solve => Command::Solve,
            Sub::DualityCheck => Command::DualityCheck,
            Sub::Convergence => Command::Convergence,
            Sub::Fundamental => Command::Fundamental,
            Sub::Regularity => Command::Regularity,
            Sub::Embedding => Command::Embedding,
            Sub::Riesz => Command::Riesz,
            Sub::Geometry => Command::Geometry,
            Sub::Exponents => Command::Exponents,
        }
    }
}

/// Nonlocal Dirichlet experiments. Exit status: 0 when every check passes,
/// 2 when a check fails, 1 on errors.
#[derive(Debug, Parser)]
#[command(name = "fracdual", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// Experiment description in TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replaces the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the rayon choice.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command.into(), &cfg, &cli.out, cli.seed) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
