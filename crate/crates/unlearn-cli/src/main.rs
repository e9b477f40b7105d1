use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use unlearn_cli::commands;
use unlearn_cli::config::{ExperimentConfig, Setting};

#[derive(Parser)]
#[command(
    name = "unlearn",
    about = "Forget-set-only machine unlearning experiments on a small classifier",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON). Every field is optional.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the training setting: i = train/val, ii = train+val/test.
    #[arg(long)]
    setting: Option<Setting>,
}

impl CommonArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(setting) = self.setting {
            cfg.pretrain.setting = setting;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the classifier from scratch and write the model artifact.
    Pretrain {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one unlearning strategy against a pretrained model artifact.
    Unlearn {
        #[command(flatten)]
        common: CommonArgs,
        /// Pretrained model artifact from `pretrain`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the full tau x N x strategy x seed grid and aggregate results.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render the comparison table from an aggregated results CSV.
    Report {
        /// Aggregated results CSV produced by `sweep`.
        results: PathBuf,
        /// Held-out evaluation set size per seed (read from
        /// sweep_summary.json when omitted).
        #[arg(long)]
        n_eval: Option<usize>,
        /// Write the rendered table here instead of stdout only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Pretrain { common } => {
            let cfg = common.load()?;
            let out = commands::run_pretrain(&cfg, &common.out)?;
            println!(
                "pretrained on {} samples; {} UAR {:.3}; artifact {}",
                out.eval.n_samples,
                out.eval.split_name,
                out.eval.uar,
                out.artifact_path.display()
            );
        }
        Command::Unlearn { common, model } => {
            let cfg = common.load()?;
            let out = commands::run_unlearn(&cfg, &model, &common.out)?;
            println!(
                "strategy {}: forget-set UAR (true labels) {:.3}, {} UAR {:.3}; report {}",
                cfg.unlearn.strategy,
                out.eval_forget.uar,
                out.eval_heldout.split_name,
                out.eval_heldout.uar,
                out.report_path.display()
            );
        }
        Command::Sweep { common } => {
            let cfg = common.load()?;
            let started = std::time::Instant::now();
            let (rows, summary) = commands::run_sweep(&cfg, &common.out)?;
            println!(
                "swept {} grid points in {:.1}s; results {}",
                rows.len(),
                started.elapsed().as_secs_f64(),
                common.out.join("sweep_results.csv").display()
            );
            for best in &summary.best {
                println!(
                    "  best {} N={}: tau={} D_e={:.3} eval={:.3}",
                    best.strategy, best.n_forget, best.tau, best.mean_uar_forget, best.mean_uar_eval
                );
            }
        }
        Command::Report { results, n_eval, out } => {
            let table = commands::run_report(&results, n_eval, out.as_deref())?;
            println!("{table}");
        }
    }
    Ok(())
}
