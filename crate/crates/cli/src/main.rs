use anyhow::{bail, Context, Result};
use causal_reg::runner::{
    cmd_estimate, cmd_gen, cmd_report, cmd_theorem, cmd_train, with_jobs, ExperimentConfig,
};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Causal-effect-regularized classification experiments.
#[derive(Parser, Debug)]
#[command(name = "causal-reg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replace the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate train/val/test datasets for every (κ, seed).
    Gen,
    /// Run the configured effect estimators on every dataset.
    Estimate,
    /// Sweep methods over their grids and select a model per cell.
    Train,
    /// Randomized audit of the regularization preference theorem.
    Theorem,
    /// Aggregate run records into tables and plots.
    Report {
        /// Directory holding `runs.jsonl` (directly or one level down);
        /// defaults to the output directory.
        records: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed_override {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if cli.common.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    let cfg = load(&cli.common)?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let jobs = cli.common.jobs;
    match cli.command {
        Command::Gen => {
            let files = with_jobs(jobs, || cmd_gen(&cfg, &out))??;
            println!("wrote {} dataset files under {}", files.len(), out.join("datasets").display());
        }
        Command::Estimate => {
            let rows = with_jobs(jobs, || cmd_estimate(&cfg, &out))??;
            println!("wrote {} estimates to {}", rows.len(), out.join("estimates.csv").display());
        }
        Command::Train => {
            let recs = with_jobs(jobs, || cmd_train(&cfg, &out))??;
            let failed = recs.iter().filter(|r| r.failed).count();
            println!("wrote {} run records ({failed} failed) to {}", recs.len(), out.join("runs.csv").display());
        }
        Command::Theorem => {
            let s = with_jobs(jobs, || cmd_theorem(&cfg, &out))??;
            println!(
                "{} instances, mean condition on {}, counterexamples {}, strict-without-mean {}: {}",
                s.rows.len(),
                s.mean_holding,
                s.counterexamples,
                s.implication_violations,
                if s.passed() { "pass" } else { "FAIL" }
            );
            if !s.passed() {
                std::process::exit(2);
            }
        }
        Command::Report { records } => {
            let dir = records.unwrap_or_else(|| out.clone());
            let rows = cmd_report(&dir, &out)?;
            let incomplete = rows.iter().filter(|r| !r.complete()).count();
            println!("wrote {} report rows ({incomplete} incomplete) to {}", rows.len(), out.join("report.csv").display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
