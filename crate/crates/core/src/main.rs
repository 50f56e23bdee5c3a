use anyhow::{Context, Result};
use christoffel::checkpoint;
use christoffel::cli_io::config::{parse_config, to_toml_string, RawConfig};
use christoffel::cli_io::manifest::read_manifest;
use christoffel::cli_io::results::emit_results;
use christoffel::experiment_driver::{prepare, run_suite};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "christoffel", version, about = "Christoffel-weighted adaptive sampling \
    experiments for neural network regression", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Directory the results files are written to.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Override the number of trials per method.
    #[arg(long)]
    trials: Option<u32>,
    /// Override the base seed (grid and test seeds follow unless set).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the arithmetic precision.
    #[arg(long, value_parser = ["single", "double"])]
    precision: Option<String>,
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment suite described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check a config file and print it with all defaults filled in.
    Validate { config: PathBuf },
    /// Re-run the experiment recorded in a run manifest.
    Resume {
        manifest: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Print a summary of a checkpoint file.
    Inspect { checkpoint: PathBuf },
}

fn apply_overrides(raw: &mut RawConfig, flags: &RunFlags) {
    if let Some(t) = flags.trials {
        raw.run.trials = Some(t);
    }
    if let Some(s) = flags.seed {
        raw.run.seed = Some(s);
    }
    if let Some(p) = &flags.precision {
        raw.run.precision = Some(p.clone());
    }
}

fn execute(mut raw: RawConfig, base_dir: &Path, flags: &RunFlags) -> Result<()> {
    apply_overrides(&mut raw, flags);
    if let Some(threads) = flags.threads {
        anyhow::ensure!(threads > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool already configured")?;
    }
    let loaded = raw.resolve(base_dir)?;
    let started = Instant::now();
    let prep = prepare(loaded.config)?;
    let result = run_suite(&prep)?;
    for f in &result.failures {
        eprintln!(
            "warning: {} trial {} stopped at stage {}: {}",
            f.method.as_str(),
            f.trial,
            f.stage,
            f.message
        );
    }
    let paths = emit_results(&prep, &result, &loaded.normalized, &flags.out_dir)?;
    println!(
        "{} stage records over {} trials in {:.1}s; {} files in {}",
        result.records.len(),
        prep.config.trials,
        started.elapsed().as_secs_f64(),
        paths.len(),
        flags.out_dir.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, flags } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let raw: RawConfig = text.parse()?;
            let base_dir = config.parent().unwrap_or_else(|| Path::new("."));
            execute(raw, base_dir, &flags)
        }
        Command::Validate { config } => {
            let loaded = parse_config(&config)?;
            print!("{}", to_toml_string(&loaded.normalized));
            Ok(())
        }
        Command::Resume { manifest, flags } => {
            let parsed = read_manifest(&manifest)
                .with_context(|| format!("reading {}", manifest.display()))?;
            eprintln!(
                "resuming a run recorded by {} {}",
                parsed.manifest.tool, parsed.manifest.version
            );
            let base_dir = manifest.parent().unwrap_or_else(|| Path::new("."));
            execute(parsed.config, base_dir, &flags)
        }
        Command::Inspect { checkpoint } => {
            let state = checkpoint::load(&checkpoint)
                .with_context(|| format!("reading {}", checkpoint.display()))?;
            print!("{}", state.summary());
            Ok(())
        }
    }
}
