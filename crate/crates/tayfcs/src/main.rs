use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tayfcs::config::PipelineConfig;
use tayfcs::csv_io::write_dataset_csv;
use tayfcs::pipeline::{self, StageStatus, Workspace};
use tayfcs::{Error, Result};
use tayfcs_core::data::{generate_synthetic, SyntheticSpec};

#[derive(Parser)]
#[command(name = "tayfcs", version, about = "Select feature combinations for embedding-MLP CTR models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for stage artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for scoring and gain evaluation.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Load or generate data, split and encode it.
    Prepare(Common),
    /// Train the base model on the original fields.
    TrainBase(Common),
    /// Score all pairs (and triples) with the trained base model.
    Score(Common),
    /// Filter the ranked list by shuffle gains of a logistic surrogate.
    Select(Common),
    /// Retrain with the selected combinations and compare to the base model.
    Augment(Common),
    /// All stages in order, reusing finished ones.
    Pipeline(Common),
    /// Write a synthetic dataset described by a TOML spec as CSV.
    Synth {
        /// Synthetic spec (TOML with cardinalities, planted, bias, noise, records, seed).
        #[arg(long)]
        config: PathBuf,
        /// CSV file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Accepted for interface symmetry; generation is single-threaded.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

fn workspace(c: &Common) -> Result<Workspace> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    Workspace::new(&c.out, cfg, c.threads)
}

fn report(stage: &str, status: StageStatus) {
    let verb = match status {
        StageStatus::Ran => "done",
        StageStatus::Reused => "up to date",
    };
    eprintln!("{stage}: {verb}");
}

fn run(cli: Cli) -> Result<()> {
    let single = |c: &Common, name: &str| -> Result<()> {
        let ws = workspace(c)?;
        let f = pipeline::STAGES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, f)| *f)
            .expect("known stage");
        report(name, f(&ws)?);
        Ok(())
    };
    match &cli.command {
        Command::Prepare(c) => single(c, "prepare"),
        Command::TrainBase(c) => single(c, "train-base"),
        Command::Score(c) => single(c, "score"),
        Command::Select(c) => single(c, "select"),
        Command::Augment(c) => single(c, "augment"),
        Command::Pipeline(c) => {
            let ws = workspace(c)?;
            for (name, status) in pipeline::run_pipeline(&ws)? {
                report(name, status);
            }
            let m: pipeline::FinalMetrics = pipeline::read_json(&ws.path(pipeline::METRICS))?;
            println!(
                "base auc {:.4} logloss {:.4} | augmented auc {:.4} logloss {:.4} | rel imp {}",
                m.base.auc,
                m.base.logloss,
                m.augmented.auc,
                m.augmented.logloss,
                m.augmented.rel_imp.map_or_else(|| "n/a".into(), |v| format!("{v:.2}%"))
            );
            Ok(())
        }
        Command::Synth { config, out, seed, .. } => {
            let text = std::fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
            let mut spec: SyntheticSpec = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            if let Some(s) = seed {
                spec.seed = *s;
            }
            let ds = generate_synthetic(&spec)?;
            write_dataset_csv(out, &ds, "label")
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
