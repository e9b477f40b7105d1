//! Command drivers behind the CLI verbs: pretrain, unlearn, sweep, report.
//!
//! Every command is a pure function of (config, master seed): datasets,
//! splits, initialization, relabelling, attacks, and shuffling all draw from
//! named sub-seeds fanned out of the master seed, and every output document
//! embeds the exact resolved configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use unlearn_core::data::{
    load_csv, save_csv, select_forget, split_by_group, synth_generate, LabeledDataset, Sample,
};
use unlearn_core::metrics::{evaluate, EvalReport};
use unlearn_core::model::{train_classifier, Classifier};
use unlearn_core::rng::child_seed;
use unlearn_core::unlearning::{unlearn, Strategy, UnlearnReport};

use crate::artifact::ModelArtifact;
use crate::config::{ExperimentConfig, Setting, SweepBlock};
use crate::report;

/// Train/eval pools for one master seed under one setting.
pub struct DataContext {
    pub train_pool: LabeledDataset,
    pub eval_set: LabeledDataset,
}

fn merge(a: &LabeledDataset, b: &LabeledDataset) -> anyhow::Result<LabeledDataset> {
    let samples: Vec<Sample> = a
        .samples()
        .iter()
        .chain(b.samples())
        .cloned()
        .collect();
    Ok(LabeledDataset::new(
        samples,
        a.class_count().max(b.class_count()),
        a.feature_dim(),
    )?)
}

/// Builds the dataset named by the config (synthetic unless a CSV is given)
/// and splits it by group; the training pool and held-out evaluation set
/// depend on the setting.
pub fn build_data(cfg: &ExperimentConfig, master: u64) -> anyhow::Result<DataContext> {
    let ds = match &cfg.data {
        Some(block) => load_csv(&block.csv, block.class_count)?,
        None => synth_generate(&cfg.synth_block().to_spec(child_seed(master, "data")))?,
    };
    let split_spec = cfg.split.to_spec(child_seed(master, "split"));
    let (train, val, test) = split_by_group(&ds, &split_spec)?;
    let (train_pool, eval_set) = match cfg.pretrain.setting {
        Setting::I => (train, val),
        Setting::II => (merge(&train, &val)?, test),
    };
    Ok(DataContext {
        train_pool,
        eval_set,
    })
}

/// Trains the classifier from scratch on the training pool.
pub fn pretrain_model(cfg: &ExperimentConfig, data: &DataContext, master: u64) -> anyhow::Result<Classifier> {
    let mut model = Classifier::new(
        data.train_pool.feature_dim(),
        &cfg.model.hidden,
        data.train_pool.class_count(),
        child_seed(master, "init"),
    )?;
    train_classifier(
        &mut model,
        &data.train_pool,
        cfg.pretrain.epochs,
        cfg.pretrain.batch_size,
        cfg.pretrain.lr,
        child_seed(master, "pretrain_shuffle"),
    )?;
    Ok(model)
}

#[derive(Debug, Serialize)]
struct PretrainDocument<'a> {
    config: &'a ExperimentConfig,
    master_seed: u64,
    setting: Setting,
    train_samples: usize,
    eval: &'a EvalReport,
}

#[derive(Debug)]
pub struct PretrainOutput {
    pub model: Classifier,
    pub eval: EvalReport,
    pub artifact_path: PathBuf,
    pub report_path: PathBuf,
}

/// `pretrain`: train on the configured pool, evaluate on the held-out split,
/// and persist the model artifact plus a report document.
pub fn run_pretrain(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<PretrainOutput> {
    std::fs::create_dir_all(out_dir)?;
    let master = cfg.seed;
    let data = build_data(cfg, master)?;
    let model = pretrain_model(cfg, &data, master)?;
    let eval = evaluate(&model, &data.eval_set, cfg.pretrain.setting.eval_split_name())?;

    let artifact_path = out_dir.join("model.json");
    ModelArtifact::from_classifier(&model, master).save(&artifact_path)?;

    let report_path = out_dir.join("pretrain_report.json");
    let doc = PretrainDocument {
        config: cfg,
        master_seed: master,
        setting: cfg.pretrain.setting,
        train_samples: data.train_pool.len(),
        eval: &eval,
    };
    std::fs::write(&report_path, serde_json::to_string_pretty(&doc)?)?;

    Ok(PretrainOutput {
        model,
        eval,
        artifact_path,
        report_path,
    })
}

#[derive(Debug, Serialize)]
struct UnlearnDocument<'a> {
    config: &'a ExperimentConfig,
    master_seed: u64,
    setting: Setting,
    strategy: Strategy,
    report: &'a UnlearnReport,
    eval_forget_true_labels: &'a EvalReport,
    eval_heldout: &'a EvalReport,
    pre_uar_heldout: f64,
}

#[derive(Debug)]
pub struct UnlearnOutput {
    pub model: Classifier,
    pub report: UnlearnReport,
    pub eval_forget: EvalReport,
    pub eval_heldout: EvalReport,
    pub artifact_path: PathBuf,
    pub report_path: PathBuf,
}

/// `unlearn`: load a pretrained artifact, rebuild its data context, run the
/// configured strategy, and evaluate on the forget set (against true labels)
/// and the held-out split.
pub fn run_unlearn(
    cfg: &ExperimentConfig,
    model_path: &Path,
    out_dir: &Path,
) -> anyhow::Result<UnlearnOutput> {
    std::fs::create_dir_all(out_dir)?;
    let artifact = ModelArtifact::load(model_path)?;
    if artifact.master_seed != cfg.seed {
        anyhow::bail!(
            "artifact was pretrained with master seed {} but the config requests {}; \
             pass the matching seed so forget-set selection sees the same data",
            artifact.master_seed,
            cfg.seed
        );
    }
    let master = cfg.seed;
    let model = artifact.to_classifier()?;
    let data = build_data(cfg, master)?;

    let (forget, remain) = select_forget(
        &data.train_pool,
        cfg.unlearn.forget_count,
        child_seed(master, "forget"),
    )?;
    let strategy = cfg.unlearn.strategy;
    let unlearn_cfg = cfg
        .unlearn
        .to_config(strategy, cfg.unlearn.attack.tau, master);
    let remain_opt = (strategy == Strategy::RemainInvolved).then_some(&remain);

    let pre_uar = evaluate(&model, &data.eval_set, cfg.pretrain.setting.eval_split_name())?.uar;
    let outcome = unlearn(&model, &forget, &unlearn_cfg, remain_opt)?;
    let eval_forget = evaluate(&outcome.model, &forget, "forget")?;
    let eval_heldout = evaluate(
        &outcome.model,
        &data.eval_set,
        cfg.pretrain.setting.eval_split_name(),
    )?;

    let artifact_path = out_dir.join("unlearned_model.json");
    ModelArtifact::from_classifier(&outcome.model, master).save(&artifact_path)?;

    if cfg.unlearn.dump_adversarial_csv && !outcome.adv_set.is_empty() {
        let samples: Vec<Sample> = outcome
            .adv_set
            .iter()
            .map(|a| Sample {
                features: a.features.clone(),
                label: a.target_label,
                group: a.source_index as u32,
            })
            .collect();
        let adv_ds = LabeledDataset::new(samples, forget.class_count(), forget.feature_dim())?;
        save_csv(&adv_ds, &out_dir.join("adversarial_set.csv"))?;
    }

    let report_path = out_dir.join("unlearn_report.json");
    let doc = UnlearnDocument {
        config: cfg,
        master_seed: master,
        setting: cfg.pretrain.setting,
        strategy,
        report: &outcome.report,
        eval_forget_true_labels: &eval_forget,
        eval_heldout: &eval_heldout,
        pre_uar_heldout: pre_uar,
    };
    std::fs::write(&report_path, serde_json::to_string_pretty(&doc)?)?;

    Ok(UnlearnOutput {
        model: outcome.model,
        report: outcome.report,
        eval_forget,
        eval_heldout,
        artifact_path,
        report_path,
    })
}

/// One row of the aggregated sweep results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: Strategy,
    pub tau: f64,
    pub n_forget: usize,
    pub seed: u64,
    pub uar_forget: f64,
    pub uar_eval: f64,
}

/// Best tau per (strategy, N), selected on held-out UAR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSelection {
    pub strategy: Strategy,
    pub n_forget: usize,
    pub tau: f64,
    pub mean_uar_forget: f64,
    pub mean_uar_eval: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub config: ExperimentConfig,
    pub setting: Setting,
    /// Held-out evaluation set size per sweep seed.
    pub n_eval: BTreeMap<u64, usize>,
    /// Pre-unlearning held-out UAR per sweep seed.
    pub pre_uar: BTreeMap<u64, f64>,
    pub best: Vec<BestSelection>,
}

struct SeedContext {
    data: DataContext,
    model: Classifier,
    pre_uar: f64,
}

/// `sweep`: the full cartesian grid tau x N x strategy x seed. Each seed's
/// model is pretrained once; grid points are independent and may run in
/// parallel; rows are emitted in deterministic grid order.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<(Vec<SweepRow>, SweepSummary)> {
    std::fs::create_dir_all(out_dir)?;
    let sweep = cfg.sweep.clone().unwrap_or_default();
    if sweep.taus.is_empty()
        || sweep.forget_counts.is_empty()
        || sweep.strategies.is_empty()
        || sweep.seeds.is_empty()
    {
        anyhow::bail!("sweep grids must be nonempty");
    }

    let mut contexts: BTreeMap<u64, SeedContext> = BTreeMap::new();
    for &seed in &sweep.seeds {
        let mut seeded = cfg.clone();
        seeded.seed = seed;
        let data = build_data(&seeded, seed)?;
        let model = pretrain_model(&seeded, &data, seed)?;
        let pre_uar = evaluate(&model, &data.eval_set, cfg.pretrain.setting.eval_split_name())?.uar;
        contexts.insert(seed, SeedContext { data, model, pre_uar });
    }

    let mut jobs: Vec<(f64, usize, Strategy, u64)> = Vec::new();
    for &tau in &sweep.taus {
        for &n in &sweep.forget_counts {
            for &strategy in &sweep.strategies {
                for &seed in &sweep.seeds {
                    jobs.push((tau, n, strategy, seed));
                }
            }
        }
    }

    let results = unlearn_core::parallel::map_collect(&jobs, |&(tau, n, strategy, seed)| {
        let ctx = &contexts[&seed];
        let (forget, remain) = select_forget(&ctx.data.train_pool, n, child_seed(seed, "forget"))
            .map_err(anyhow::Error::from)?;
        let mut unlearn_cfg = cfg.unlearn.to_config(strategy, tau, seed);
        unlearn_cfg.forget_count = n;
        let remain_opt = (strategy == Strategy::RemainInvolved).then_some(&remain);
        let outcome = unlearn(&ctx.model, &forget, &unlearn_cfg, remain_opt)?;
        let uar_forget = evaluate(&outcome.model, &forget, "forget")?.uar;
        let uar_eval = evaluate(
            &outcome.model,
            &ctx.data.eval_set,
            cfg.pretrain.setting.eval_split_name(),
        )?
        .uar;
        Ok::<SweepRow, anyhow::Error>(SweepRow {
            strategy,
            tau,
            n_forget: n,
            seed,
            uar_forget,
            uar_eval,
        })
    });
    let rows: Vec<SweepRow> = results.into_iter().collect::<Result<_, _>>()?;

    let best = select_best(&rows, &sweep);
    let summary = SweepSummary {
        config: cfg.clone(),
        setting: cfg.pretrain.setting,
        n_eval: contexts
            .iter()
            .map(|(s, c)| (*s, c.data.eval_set.len()))
            .collect(),
        pre_uar: contexts.iter().map(|(s, c)| (*s, c.pre_uar)).collect(),
        best,
    };

    let csv_path = out_dir.join("sweep_results.csv");
    std::fs::write(&csv_path, report::rows_to_csv(&rows))?;
    let summary_path = out_dir.join("sweep_summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;

    Ok((rows, summary))
}

/// Per (strategy, N): the tau maximizing the seed-mean held-out UAR.
fn select_best(rows: &[SweepRow], sweep: &SweepBlock) -> Vec<BestSelection> {
    let mut best = Vec::new();
    for &strategy in &sweep.strategies {
        for &n in &sweep.forget_counts {
            let mut candidates: Vec<BestSelection> = Vec::new();
            for &tau in &sweep.taus {
                let cell: Vec<&SweepRow> = rows
                    .iter()
                    .filter(|r| r.strategy == strategy && r.n_forget == n && r.tau == tau)
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let mean_f = cell.iter().map(|r| r.uar_forget).sum::<f64>() / cell.len() as f64;
                let mean_e = cell.iter().map(|r| r.uar_eval).sum::<f64>() / cell.len() as f64;
                candidates.push(BestSelection {
                    strategy,
                    n_forget: n,
                    tau,
                    mean_uar_forget: mean_f,
                    mean_uar_eval: mean_e,
                });
            }
            if let Some(top) = candidates.into_iter().max_by(|a, b| {
                a.mean_uar_eval
                    .partial_cmp(&b.mean_uar_eval)
                    .expect("finite UARs")
            }) {
                best.push(top);
            }
        }
    }
    best
}

/// `report`: render the results table with significance stars.
pub fn run_report(
    results_path: &Path,
    n_eval_override: Option<usize>,
    out: Option<&Path>,
) -> anyhow::Result<String> {
    let text = std::fs::read_to_string(results_path)
        .map_err(|e| anyhow::anyhow!("cannot read results {}: {e}", results_path.display()))?;
    let rows = report::rows_from_csv(&text)
        .map_err(|e| anyhow::anyhow!("in {}: {e}", results_path.display()))?;

    let n_trials = match n_eval_override {
        Some(n) => {
            let seeds: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
            n * seeds.len()
        }
        None => {
            let summary_path = results_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("sweep_summary.json");
            let text = std::fs::read_to_string(&summary_path).map_err(|_| {
                anyhow::anyhow!(
                    "no sweep_summary.json next to the results CSV; pass --n-eval to size the z-test"
                )
            })?;
            let summary: SweepSummary = serde_json::from_str(&text)?;
            summary.n_eval.values().sum()
        }
    };

    let table = report::render_table(&rows, n_trials)?;
    if let Some(path) = out {
        std::fs::write(path, &table)?;
    }
    Ok(table)
}
