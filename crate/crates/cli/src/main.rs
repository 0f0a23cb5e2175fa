use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use walkcount::collision::CollisionInstance;
use walkcount::rng::seeded;
use walkcount_cli::{run, Config, RunOptions};

#[derive(Parser)]
#[command(name = "walkcount", version, about = "Quantum-walk approximate counting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in a config file.
    Run {
        /// TOML config with one `[[experiment]]` table per experiment.
        #[arg(short, long)]
        config: PathBuf,
        /// Directory for the CSV and JSON outputs.
        #[arg(short, long, default_value = "results")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(short, long)]
        jobs: Option<usize>,
        /// Overrides every experiment's seed.
        #[arg(short, long)]
        seed: Option<u64>,
        /// Only run experiments whose name contains this string. Repeatable.
        #[arg(short, long)]
        filter: Vec<String>,
    },
    /// Write a random injective instance with exactly `m` collisions.
    GenerateInstance {
        #[arg(short = 'n', long)]
        n: usize,
        /// Codomain size.
        #[arg(short = 'k', long)]
        k: u64,
        #[arg(short = 'm', long)]
        m: usize,
        #[arg(short, long, default_value_t = 0)]
        seed: u64,
        /// Output file (default: stdout).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Run { config, out, jobs, seed, filter } => {
            if let Some(j) = jobs {
                rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("configuring worker threads")?;
            }
            let config = Config::load(&config)?;
            let summaries = run(&config, &RunOptions { out_dir: out, seed, filter })?;
            for s in &summaries {
                println!(
                    "{:<28} {}  ({} rows, {} failed)",
                    s.experiment,
                    if s.pass { "pass" } else { "FAIL" },
                    s.trials,
                    s.failed_trials
                );
            }
            Ok(summaries.iter().all(|s| s.pass))
        }
        Command::GenerateInstance { n, k, m, seed, out } => {
            let inst = CollisionInstance::generate(n, k, m, &mut seeded(seed))?;
            let text = format!("# {m} planted collisions, seed {seed}\n{}", inst.to_text());
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(true)
        }
    }
}
