use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hqcnn::cli::{self, ExperimentConfig, Preset, SEED_ENV};
use hqcnn::{Error, Result};

#[derive(Parser)]
#[command(name = "hqcnn", version, about = "Hybrid quantum-classical CNN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic causal-heatmap dataset.
    GenData {
        #[arg(long)]
        per_class: usize,
        /// Falls back to $HQCNN_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one configuration and write its run directory.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` override; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Run directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a family of configurations and rank them.
    Sweep {
        /// Base config for presets.
        #[arg(long, conflicts_with = "configs")]
        config: Option<PathBuf>,
        /// `ansatz-depth` or `feature-maps`.
        #[arg(long, required_unless_present = "configs")]
        preset: Option<String>,
        /// Explicit configs differing in exactly one key.
        #[arg(long, num_args = 2.., conflicts_with = "preset")]
        configs: Vec<PathBuf>,
        /// `key=value` override applied to every run; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute curve metrics from a run directory or training log.
    Analyze { path: PathBuf },
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { per_class, seed, out } => {
            let seed = match seed {
                Some(s) => s,
                None => env_seed()
                    .map(|s| s.parse().map_err(|_| Error::Config(format!("{SEED_ENV}: cannot parse '{s}'"))))
                    .transpose()?
                    .unwrap_or(0),
            };
            let data = cli::gen_data(per_class, seed, &out)?;
            println!("wrote {} samples to {}", data.len(), out.display());
        }
        Command::Train { config, sets, out } => {
            let mut cfg = ExperimentConfig::load(config.as_deref(), &sets, env_seed().as_deref())?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let m = cli::run_train(&cfg)?;
            let run = m.run.as_ref().expect("run info");
            println!(
                "{}: train acc {:.4}, val acc {:.4}",
                cfg.out_dir.display(),
                run.final_train_acc,
                run.final_val_acc
            );
            print!("{}", m.flat_report());
        }
        Command::Sweep { config, preset, configs, sets, out } => {
            let plan = match preset {
                Some(p) => {
                    let base = ExperimentConfig::load(config.as_deref(), &sets, env_seed().as_deref())?;
                    cli::preset_plan(p.parse::<Preset>()?, &base, &out)
                }
                None => {
                    let loaded = configs
                        .iter()
                        .map(|c| ExperimentConfig::load(Some(c), &sets, env_seed().as_deref()))
                        .collect::<Result<Vec<_>>>()?;
                    cli::explicit_plan(loaded, &out)?
                }
            };
            let rows = cli::run_sweep(&plan, &out)?;
            print!("{}", cli::summary_csv(&plan.swept_key, &rows));
        }
        Command::Analyze { path } => {
            print!("{}", cli::analyze(&path)?.flat_report());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
