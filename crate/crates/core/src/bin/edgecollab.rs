use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edgecollab::harness::{self, ExperimentConfig};
use edgecollab::Error;

#[derive(Debug, Parser)]
#[command(version, about = "Collaborative edge computing experiments")]
struct Cli {
    #[command(subcommand)]
    study: Study,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed` in the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Configuration override, `dotted.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Use the full network widths.
    #[arg(long, global = true)]
    paper_shapes: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Study {
    /// TPSA versus brute-force and random-order scheduling.
    TpsaBench,
    /// Train the DDPG agent and write checkpoints plus a training log.
    Train,
    /// Per-slot metrics of one policy.
    Evaluate,
    /// Policies swept over task arrival rates.
    Compare,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Error> {
    let mut overrides = cli.overrides;
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if cli.paper_shapes {
        overrides.push("nn.paper_shapes=true".into());
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    log::info!("config hash {}", cfg.hash());
    match cli.study {
        Study::TpsaBench => harness::tpsa_bench(&cfg, &cli.out),
        Study::Train => harness::train(&cfg, &cli.out).map(|(paths, _)| paths),
        Study::Evaluate => harness::evaluate(&cfg, &cli.out),
        Study::Compare => harness::compare(&cfg, &cli.out).map(|(paths, _)| paths),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
