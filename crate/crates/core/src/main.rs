use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use xlmimo::config::ExperimentConfig;
use xlmimo::{experiment, output};

#[derive(Parser)]
#[command(name = "xlmimo", version, about = "XL-MIMO uplink SE, combiner and scheduling experiments")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo and closed-form SE over the SNR grid.
    Sweep(RunArgs),
    /// Greedy scheduling at every SNR point.
    Schedule(RunArgs),
    /// Parse and check a config without running it.
    Validate(RunArgs),
    /// Exhaustive-search or Monte-Carlo reference values.
    Oracle(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the Monte-Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn load(&self) -> xlmimo::Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        config.validate()?;
        Ok(config)
    }

    fn path(&self, config: &ExperimentConfig, suffix: &str) -> PathBuf {
        self.out.join(format!("{}{suffix}", config.experiment))
    }
}

fn prepare(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Validate(args) => {
            let config = args.load()?;
            let scenario = config.scenario()?;
            println!(
                "{}: ok (M = {}, N = {}, K = {})",
                config.experiment,
                config.geometry.num_antennas,
                config.geometry.num_subarrays,
                scenario.num_users()
            );
        }
        Command::Sweep(args) => {
            let config = args.load()?;
            let rows = experiment::run_sweep(&config)?;
            prepare(&args.out)?;
            let csv = args.path(&config, ".csv");
            output::write_csv(&csv, &rows)?;
            output::write_sidecar(&args.path(&config, ".json"), &config)?;
            println!("wrote {} rows to {}", rows.len(), csv.display());
        }
        Command::Schedule(args) => {
            let config = args.load()?;
            let report = experiment::run_schedule(&config)?;
            prepare(&args.out)?;
            let csv = args.path(&config, ".csv");
            output::write_csv(&csv, &report.results)?;
            output::write_csv(&args.path(&config, "_schedule.csv"), &report.decisions)?;
            output::write_csv(&args.path(&config, "_vr_map.csv"), &report.vr_map)?;
            output::write_json(&args.path(&config, "_outcomes.json"), &report.runs)?;
            output::write_sidecar(&args.path(&config, ".json"), &config)?;
            for run in &report.runs {
                println!(
                    "{} {} {:>5.1} dB: {} users, sum SE {:.3}",
                    run.architecture,
                    run.receiver,
                    run.snr_db,
                    run.outcome.scheduled_users.len(),
                    run.outcome.sum_se
                );
            }
            println!("wrote {}", csv.display());
        }
        Command::Oracle(args) => {
            let config = args.load()?;
            prepare(&args.out)?;
            let csv = args.path(&config, "_oracle.csv");
            if config.schedule.is_some() {
                let rows = experiment::run_schedule_oracle(&config)?;
                output::write_csv(&csv, &rows)?;
                for r in &rows {
                    println!(
                        "{} {} {:>5.1} dB: greedy {:.3} / optimum {:.3} = {:.3}",
                        r.architecture, r.receiver, r.snr_db, r.greedy_se, r.oracle_se, r.ratio
                    );
                }
            } else {
                let rows = experiment::run_se_oracle(&config)?;
                output::write_csv(&csv, &rows)?;
                let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
                println!("{} comparisons, worst relative error {:.4}", rows.len(), worst);
            }
            output::write_sidecar(&args.path(&config, "_oracle.json"), &config)?;
            println!("wrote {}", csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let guard = e
                .downcast_ref::<xlmimo::Error>()
                .is_some_and(xlmimo::Error::is_numerical_guard);
            ExitCode::from(if guard { 2 } else { 1 })
        }
    }
}
