//! Command-line benchmark harness.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mslqr_bench::config::{preset, preset_names, ExperimentConfig, InstabilityConfig, Scale};
use mslqr_bench::metrics::{emit_instability_csv, load_csv_file, write_csv_file};
use mslqr_bench::slope::{rate_slope, summarize, write_summary_csv, Metric};
use mslqr_bench::{experiment, validate};

#[derive(Parser)]
#[command(name = "mslqr-bench", version, about = "Benchmark suite for data-driven control of linear systems with multiplicative noise")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run an experiment from a built-in preset or a TOML config file
    Run {
        /// Built-in preset name (see `presets`)
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Path to an experiment TOML file
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the experiment seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of repeats
        #[arg(long)]
        repeats: Option<usize>,
        /// Override the number of iterations
        #[arg(long)]
        iterations: Option<usize>,
        /// Preset size: desk for CI-sized runs, paper for the full protocol
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
        /// Output directory for metrics and summary CSV files
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Sweep the PI confidence parameter and report unstable-policy rates
    Instability {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Fit the final-window log-log rate slope of a metrics CSV
    Rates {
        /// Metrics CSV produced by `run`
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Suboptimality)]
        metric: Metric,
        /// Number of final iterations in the fit window
        #[arg(long, default_value_t = 50)]
        window: usize,
    },
    /// Run the structural invariant suite
    Validate {
        #[arg(long, default_value_t = 1234)]
        seed: u64,
    },
    /// List the built-in experiment presets
    Presets,
}

fn load_run_config(
    preset_name: Option<String>,
    config_path: Option<PathBuf>,
    scale: Scale,
) -> Result<ExperimentConfig> {
    match (preset_name, config_path) {
        (Some(name), None) => preset(&name, scale)
            .with_context(|| format!("unknown preset {name:?}; see `mslqr-bench presets`")),
        (None, Some(path)) => ExperimentConfig::from_file(&path)
            .with_context(|| format!("loading config {}", path.display())),
        (None, None) => bail!("pass either --preset NAME or --config PATH"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Commands::Run {
            preset,
            config,
            seed,
            repeats,
            iterations,
            scale,
            out,
        } => {
            let mut cfg = load_run_config(preset, config, scale)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(repeats) = repeats {
                cfg.repeats = repeats;
            }
            if let Some(iterations) = iterations {
                cfg.iterations = iterations;
            }
            cfg.validate()?;

            eprintln!(
                "running {} ({} repeats x {} iterations, seed {})",
                cfg.id, cfg.repeats, cfg.iterations, cfg.seed
            );
            let started = std::time::Instant::now();
            let records = experiment::run_experiment(&cfg)?;
            eprintln!("finished in {:.1}s", started.elapsed().as_secs_f64());

            std::fs::create_dir_all(&out)?;
            let metrics_path = out.join(format!("{}.csv", cfg.id));
            write_csv_file(&records, &metrics_path)?;
            let summary_path = out.join(format!("{}-summary.csv", cfg.id));
            let mut summary_file = std::io::BufWriter::new(std::fs::File::create(&summary_path)?);
            write_summary_csv(&records, &mut summary_file)?;
            println!("metrics: {}", metrics_path.display());
            println!("summary: {}", summary_path.display());

            if let Some(last) = summarize(&records, Metric::Suboptimality).last() {
                println!(
                    "final median suboptimality: {:.3e} (N = {})",
                    last.median, last.samples
                );
            }
            if let Some(last) = summarize(&records, Metric::GainError).last() {
                println!("final median gain error:    {:.3e}", last.median);
            }
            let window = (cfg.iterations / 2).max(5);
            for metric in [Metric::Suboptimality, Metric::GainError] {
                match rate_slope(&records, metric, window) {
                    Ok(slope) => println!("{} slope over final {window} iterations: {slope:.3}", metric.name()),
                    Err(e) => println!("{} slope unavailable: {e}", metric.name()),
                }
            }
        }
        Commands::Instability {
            seed,
            repeats,
            scale,
            out,
        } => {
            let mut cfg = InstabilityConfig::at_scale(scale);
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(repeats) = repeats {
                cfg.repeats = repeats;
            }
            eprintln!(
                "instability sweep: betas {:?}, {} repeats x {} iterations",
                cfg.betas, cfg.repeats, cfg.iterations
            );
            let records = experiment::instability_experiment(&cfg)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("instability.csv");
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            emit_instability_csv(&records, &mut file)?;
            println!("table: {}", path.display());

            for &beta in &cfg.betas {
                let rows: Vec<f64> = records
                    .iter()
                    .filter(|r| r.beta0 == beta)
                    .map(|r| r.percent_unstable)
                    .collect();
                let mean = rows.iter().sum::<f64>() / rows.len() as f64;
                println!("beta0 = {beta:>6}: mean unstable {mean:.2}%");
            }
        }
        Commands::Rates {
            file,
            metric,
            window,
        } => {
            let records = load_csv_file(&file)?;
            let slope = rate_slope(&records, metric, window)?;
            println!("{} slope over final {window} iterations: {slope:.4}", metric.name());
        }
        Commands::Validate { seed } => {
            if !validate::run_invariant_suite(seed) {
                bail!("invariant suite failed");
            }
        }
        Commands::Presets => {
            for name in preset_names() {
                let cfg = preset(name, Scale::Desk).expect("listed preset exists");
                println!(
                    "{name:<14} {} repeats x {} iterations, M = {}, T = {}",
                    cfg.repeats, cfg.iterations, cfg.rollout.trajectories, cfg.rollout.horizon
                );
            }
        }
    }
    Ok(())
}
