//! `modsel`: generate instances, run experiments and acceptance suites, and
//! recompute summaries.
//!
//! Exit status is 0 on success (or a passing suite), 1 on failure and 2 on
//! configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modsel::harness::{report, run_experiment, run_suite, ExperimentConfig, Instance, Mode, SUMMARY_FILE};
use modsel::Error;

#[derive(Parser)]
#[command(name = "modsel", version, about = "Adaptive model selection for bandits and episodic MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// `key=value` applied to the config before validation; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured instance and write it as JSON.
    Gen {
        #[command(flatten)]
        config: ConfigArgs,
        /// Generator seed, replacing the config's.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment and write its traces and summary.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Root seed, replacing the config's.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, replacing the config's.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run an acceptance suite and report pass/fail.
    Suite {
        /// One of coverage-bandit, coverage-mdp, selection, oracle-compare, sublinearity.
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; `suite-<name>` when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Recompute `summary.json` from an experiment directory's CSV files.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(&args.config, &args.overrides)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("harness types serialise") + "\n"
}

fn execute(command: Command) -> Result<bool, Error> {
    match command {
        Command::Gen { config, seed, out } => {
            let mut config = load(&config)?;
            if let Some(seed) = seed {
                match config.mode {
                    Mode::Bandit => config.bandit.iter_mut().for_each(|g| g.seed = seed),
                    Mode::Mdp => config.mdp.iter_mut().for_each(|g| g.seed = seed),
                }
            }
            let instance = Instance::generate(&config)?;
            match out {
                Some(path) => instance.save(&path)?,
                None => print!("{}", to_json(&instance)),
            }
            Ok(true)
        }
        Command::Run { config, seed, out, jobs } => {
            let mut config = load(&config)?;
            if let Some(seed) = seed {
                config.root_seed = seed;
            }
            if out.is_some() {
                config.out = out;
            }
            let summary = run_experiment(&config, jobs)?;
            println!(
                "{} seeds: mean regret {:.4} (std {:.4}), late-epoch selection of m* {:.3}, coverage {}",
                summary.n_seeds,
                summary.mean_regret,
                summary.std_regret,
                summary.consistent_selection_rate,
                summary.coverage_rate.map_or("n/a".to_string(), |c| format!("{c:.3}"))
            );
            Ok(true)
        }
        Command::Suite { name, seed, out, jobs } => {
            let out = out.unwrap_or_else(|| PathBuf::from(format!("suite-{name}")));
            let report = run_suite(&name, &out, jobs, seed)?;
            for c in &report.criteria {
                println!("{c}");
            }
            Ok(report.passed)
        }
        Command::Report { out } => {
            let summary = report(&out)?;
            let text = to_json(&summary);
            write_text(&out.join(SUMMARY_FILE), &text)?;
            print!("{text}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
