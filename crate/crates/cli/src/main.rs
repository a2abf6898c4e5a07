use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use ctdb_core::dataset::{generate, report, GenerationConfig, ReportOptions};
use ctdb_core::iqa::MetricName;
use ctdb_core::phantom::make_phantom;
use ctdb_core::tomo::io::save_image;

#[derive(Debug, Parser)]
#[command(name = "ctdb", version, about = "Simulated CT degradation benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate reference phantoms, degraded images, metadata and a manifest.
    Generate {
        /// JSON generation config.
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides `master_seed` in the config.
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute metrics over a generated dataset and write correlation reports.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated subset of psnr, ssim, vif.
        #[arg(long, default_value = "psnr,ssim,vif", value_delimiter = ',')]
        metrics: Vec<String>,
        /// CTDE embedding file; adds the embedding drift report.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Report directory; defaults to `reports/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a single procedural phantom as a CTDI image.
    Phantom {
        #[arg(long, default_value_t = 512)]
        size: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Bad arguments, config or inputs: nothing was produced.
    Config(anyhow::Error),
    /// Some outputs were produced but the run is incomplete.
    Partial(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Partial(_) => 2,
        }
    }
}

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn partial_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Partial(e.into())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("CTDB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("CTDB_THREADS must be a positive integer, got '{value}'"))?;
    if n == 0 {
        bail!("CTDB_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn run_generate(config: &Path, seed: u64, out: &Path) -> Result<(), Failure> {
    let mut cfg = GenerationConfig::load(config)
        .with_context(|| format!("loading config {}", config.display()))
        .map_err(config_err)?;
    cfg.master_seed = seed;
    cfg.output_dir = Some(out.to_path_buf());
    let manifest = generate(&cfg, out)
        .with_context(|| format!("generating into {}", out.display()))
        .map_err(partial_err)?;
    println!(
        "wrote {} samples from {} references to {}",
        manifest.samples.len(),
        manifest.references.len(),
        out.display()
    );
    Ok(())
}

fn run_report(
    manifest: &Path,
    metrics: &[String],
    embeddings: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let metrics = metrics
        .iter()
        .map(|m| m.parse::<MetricName>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;
    if metrics.is_empty() {
        return Err(config_err(anyhow::anyhow!("no metrics selected")));
    }
    if !manifest.is_file() {
        return Err(config_err(anyhow::anyhow!(
            "manifest {} not found",
            manifest.display()
        )));
    }
    let out_dir = out.unwrap_or_else(|| ctdb_core::dataset::dataset_root(manifest).join("reports"));
    let opts = ReportOptions {
        metrics,
        embeddings,
        out_dir,
    };
    let outcome = report(manifest, &opts)
        .with_context(|| format!("reporting on {}", manifest.display()))
        .map_err(partial_err)?;
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }
    if !outcome.is_complete() {
        for m in &outcome.missing {
            eprintln!("missing: {m}");
        }
        return Err(partial_err(anyhow::anyhow!(
            "{} samples could not be evaluated",
            outcome.missing.len()
        )));
    }
    Ok(())
}

fn run_phantom(size: usize, seed: u64, out: &Path) -> Result<(), Failure> {
    let img = make_phantom(size, seed).map_err(config_err)?;
    save_image(out, &img)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(partial_err)?;
    println!("wrote {size}x{size} phantom to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Generate { config, seed, out } => run_generate(&config, seed, &out),
        Command::Report {
            manifest,
            metrics,
            embeddings,
            out,
        } => run_report(&manifest, &metrics, embeddings, out),
        Command::Phantom { size, seed, out } => run_phantom(size, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(e) | Failure::Partial(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
