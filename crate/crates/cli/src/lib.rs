//! Command-line front end: argument parsing, run configuration, per-run
//! manifests, and the pipeline subcommands.

pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use commands::{AnalyzeOptions, BootstrapOptions, Grouping};
pub use config::RunConfig;

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

#[derive(Debug, Parser)]
#[command(
    name = "moralvis",
    version,
    about = "Moral rating inference from image and caption features"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build feature matrices (and the bow vocabulary) for the labeled set and corpus.
    Featurize,
    /// Assign the train/test split.
    Split,
    /// Cross-validate α on the training split and fit the final models.
    Train,
    /// Score test-set R² per space and target.
    Evaluate,
    /// Apply the trained models to the corpus.
    Predict,
    /// Group means with SEM, group × year cells and foundation profiles.
    Analyze {
        #[arg(long, value_enum)]
        group: Option<Grouping>,
        #[arg(long)]
        target: Option<String>,
    },
    /// Bootstrap test that a category has the highest mean.
    Bootstrap {
        #[arg(long)]
        candidate: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        resamples: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Featurize => "featurize",
            Command::Split => "split",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Predict => "predict",
            Command::Analyze { .. } => "analyze",
            Command::Bootstrap { .. } => "bootstrap",
        }
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_fingerprint: String,
    outputs: BTreeMap<String, String>,
}

fn write_manifest(cfg: &RunConfig, command: &str, outputs: &[PathBuf]) -> Result<PathBuf> {
    let outputs = outputs
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(&cfg.out_dir).unwrap_or(p);
            Ok((rel.to_string_lossy().replace('\\', "/"), file_digest(p)?))
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        command,
        config_fingerprint: cfg.fingerprint(),
        outputs,
    };
    let path = cfg.out_dir.join(format!("manifest_{command}.json"));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Loads the config, applies flag overrides and validates it.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one subcommand; returns the paths written, manifest last.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(&cli)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    fs::write(cfg.out_dir.join(RESOLVED_CONFIG_FILE), cfg.to_toml())?;
    log::info!(
        "config fingerprint={} out={}",
        cfg.fingerprint(),
        cfg.out_dir.display()
    );

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let name = cli.command.name();
    let mut written = pool.install(|| match &cli.command {
        Command::Featurize => commands::cmd_featurize(&cfg),
        Command::Split => commands::cmd_split(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Evaluate => commands::cmd_evaluate(&cfg),
        Command::Predict => commands::cmd_predict(&cfg),
        Command::Analyze { group, target } => commands::cmd_analyze(
            &cfg,
            &AnalyzeOptions {
                group: *group,
                target: target.clone(),
            },
        ),
        Command::Bootstrap {
            candidate,
            target,
            resamples,
        } => commands::cmd_bootstrap(
            &cfg,
            &BootstrapOptions {
                candidate: candidate.clone(),
                target: target.clone(),
                resamples: *resamples,
            },
        ),
    })?;
    written.push(write_manifest(&cfg, name, &written)?);
    Ok(written)
}
