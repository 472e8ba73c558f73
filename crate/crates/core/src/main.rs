use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use riesz_eq::harness::{self, Experiment, ExperimentConfig};

/// Riesz equilibrium measures on self-similar fractals.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cell tree level M; overrides the config.
    #[arg(long)]
    level: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    cfg.experiment = Some(cli.experiment);
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(level) = cli.level {
        cfg.level = level;
    }
    match harness::run(cli.experiment, &cfg) {
        Ok(report) => {
            for c in &report.checks {
                let tag = if c.passed { "ok  " } else { "FAIL" };
                println!(
                    "{tag} {}: {:.6e} (threshold {:?} {:.3e})",
                    c.name, c.value, c.relation, c.threshold
                );
            }
            if report.unconverged {
                println!("FAIL solver did not converge");
            }
            println!(
                "{}: {}",
                report.experiment,
                if report.passed { "passed" } else { "failed" }
            );
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
