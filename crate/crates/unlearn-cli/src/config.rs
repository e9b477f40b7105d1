//! Experiment configuration: one JSON document describes one experiment.
//!
//! Every field has a default, so `{}` is a valid config that runs the
//! bundled synthetic benchmark end to end. A master seed fans out into
//! named sub-seeds (data, split, init, pretrain shuffle, forget selection,
//! unlearning, attack) so each stage is independently reproducible.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use unlearn_core::attacks::{AttackConfig, AttackDirection, ClipMode};
use unlearn_core::data::{SplitSpec, SynthSpec};
use unlearn_core::rng::child_seed;
use unlearn_core::unlearning::{LossWeights, Strategy, UnlearnConfig};

/// Which training protocol to run: setting `i` trains on the train split and
/// evaluates on val; setting `ii` trains on train+val and evaluates on test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Setting {
    #[default]
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    II,
}

impl Setting {
    pub fn eval_split_name(&self) -> &'static str {
        match self {
            Setting::I => "val",
            Setting::II => "test",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "i" | "I" => Ok(Setting::I),
            "ii" | "II" => Ok(Setting::II),
            other => Err(format!("unknown setting `{other}` (expected i or ii)")),
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Setting::I => "i",
            Setting::II => "ii",
        })
    }
}

fn default_seed() -> u64 {
    42
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_pretrain_epochs() -> usize {
    20
}

fn default_unlearn_epochs() -> usize {
    15
}

fn default_batch_size() -> usize {
    16
}

fn default_pretrain_lr() -> f64 {
    1e-3
}

fn default_attack_steps() -> usize {
    50
}

fn default_per_sample_count() -> usize {
    20
}

fn default_tau() -> f64 {
    0.7
}

fn default_taus() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7]
}

fn default_forget_counts() -> Vec<usize> {
    vec![10, 30, 50, 100]
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_sweep_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_forget_count() -> usize {
    10
}

/// Synthetic-data block; mirrors `SynthSpec` minus the seed, which comes
/// from the master seed fan-out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthBlock {
    #[serde(default = "SynthBlock::default_class_count")]
    pub class_count: usize,
    #[serde(default = "SynthBlock::default_group_count")]
    pub group_count: usize,
    #[serde(default = "SynthBlock::default_spgpc")]
    pub samples_per_group_per_class: usize,
    #[serde(default = "SynthBlock::default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "SynthBlock::default_separation")]
    pub separation: f64,
    #[serde(default = "SynthBlock::default_within_std")]
    pub within_std: f64,
    #[serde(default = "SynthBlock::default_group_std")]
    pub group_std: f64,
}

impl SynthBlock {
    fn default_class_count() -> usize {
        SynthSpec::default().class_count
    }
    fn default_group_count() -> usize {
        SynthSpec::default().group_count
    }
    fn default_spgpc() -> usize {
        SynthSpec::default().samples_per_group_per_class
    }
    fn default_feature_dim() -> usize {
        SynthSpec::default().feature_dim
    }
    fn default_separation() -> f64 {
        SynthSpec::default().separation
    }
    fn default_within_std() -> f64 {
        SynthSpec::default().within_std
    }
    fn default_group_std() -> f64 {
        SynthSpec::default().group_std
    }

    pub fn to_spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            class_count: self.class_count,
            group_count: self.group_count,
            samples_per_group_per_class: self.samples_per_group_per_class,
            feature_dim: self.feature_dim,
            separation: self.separation,
            within_std: self.within_std,
            group_std: self.group_std,
            seed,
        }
    }
}

impl Default for SynthBlock {
    fn default() -> Self {
        let spec = SynthSpec::default();
        Self {
            class_count: spec.class_count,
            group_count: spec.group_count,
            samples_per_group_per_class: spec.samples_per_group_per_class,
            feature_dim: spec.feature_dim,
            separation: spec.separation,
            within_std: spec.within_std,
            group_std: spec.group_std,
        }
    }
}

/// External dataset block: a CSV in the interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub csv: PathBuf,
    #[serde(default)]
    pub class_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitBlock {
    #[serde(default = "SplitBlock::default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "SplitBlock::default_fraction")]
    pub val_fraction: f64,
    #[serde(default = "SplitBlock::default_fraction")]
    pub test_fraction: f64,
}

impl SplitBlock {
    fn default_fraction() -> f64 {
        1.0 / 3.0
    }

    pub fn to_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            val_fraction: self.val_fraction,
            test_fraction: self.test_fraction,
            seed,
        }
    }
}

impl Default for SplitBlock {
    fn default() -> Self {
        Self {
            train_fraction: 1.0 / 3.0,
            val_fraction: 1.0 / 3.0,
            test_fraction: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainBlock {
    #[serde(default = "default_pretrain_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_pretrain_lr")]
    pub lr: f64,
    #[serde(default)]
    pub setting: Setting,
}

impl Default for PretrainBlock {
    fn default() -> Self {
        Self {
            epochs: default_pretrain_epochs(),
            batch_size: default_batch_size(),
            lr: default_pretrain_lr(),
            setting: Setting::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackBlock {
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Per-step size; defaults to `2.5 * tau / steps` when omitted.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_attack_steps")]
    pub steps: usize,
    #[serde(default = "default_per_sample_count")]
    pub per_sample_count: usize,
    #[serde(default)]
    pub direction: AttackDirection,
    #[serde(default)]
    pub clip_mode: ClipMode,
}

impl Default for AttackBlock {
    fn default() -> Self {
        Self {
            tau: default_tau(),
            sigma: None,
            steps: default_attack_steps(),
            per_sample_count: default_per_sample_count(),
            direction: AttackDirection::default(),
            clip_mode: ClipMode::default(),
        }
    }
}

impl AttackBlock {
    pub fn to_config(&self, seed: u64) -> AttackConfig {
        self.to_config_with_tau(self.tau, seed)
    }

    pub fn to_config_with_tau(&self, tau: f64, seed: u64) -> AttackConfig {
        let mut cfg = AttackConfig::new(tau, self.steps, self.per_sample_count, seed);
        if let Some(sigma) = self.sigma {
            cfg.sigma = sigma;
        }
        cfg.direction = self.direction;
        cfg.clip_mode = self.clip_mode;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnlearnBlock {
    #[serde(default = "UnlearnBlock::default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_forget_count")]
    pub forget_count: usize,
    #[serde(default = "default_unlearn_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// When omitted, each strategy uses its own default rate.
    #[serde(default)]
    pub lr: Option<f64>,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub attack: AttackBlock,
    /// When set, the generated adversarial set is also written as a dataset
    /// CSV next to the other outputs.
    #[serde(default)]
    pub dump_adversarial_csv: bool,
}

impl UnlearnBlock {
    fn default_strategy() -> Strategy {
        Strategy::Adv
    }

    pub fn to_config(&self, strategy: Strategy, tau: f64, master: u64) -> UnlearnConfig {
        UnlearnConfig {
            strategy,
            weights: self.weights,
            attack: self
                .attack
                .to_config_with_tau(tau, child_seed(master, "attack")),
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr.unwrap_or_else(|| strategy.default_lr()),
            forget_count: self.forget_count,
            seed: child_seed(master, "unlearn"),
        }
    }
}

impl Default for UnlearnBlock {
    fn default() -> Self {
        Self {
            strategy: Strategy::Adv,
            forget_count: default_forget_count(),
            epochs: default_unlearn_epochs(),
            batch_size: default_batch_size(),
            lr: None,
            weights: LossWeights::default(),
            attack: AttackBlock::default(),
            dump_adversarial_csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "default_forget_counts")]
    pub forget_counts: Vec<usize>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_sweep_seeds")]
    pub seeds: Vec<u64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            taus: default_taus(),
            forget_counts: default_forget_counts(),
            strategies: default_strategies(),
            seeds: default_sweep_seeds(),
        }
    }
}

/// The top-level experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Synthetic benchmark recipe; used unless `data` is given.
    #[serde(default)]
    pub synth: Option<SynthBlock>,
    /// External dataset; takes precedence over `synth` when present.
    #[serde(default)]
    pub data: Option<DataBlock>,
    #[serde(default)]
    pub split: SplitBlock,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub pretrain: PretrainBlock,
    #[serde(default)]
    pub unlearn: UnlearnBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("cannot parse config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    /// Effective synth block (the default benchmark when neither `synth`
    /// nor `data` is present).
    pub fn synth_block(&self) -> SynthBlock {
        self.synth.clone().unwrap_or_default()
    }
}
