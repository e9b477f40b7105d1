//! Targeted PGD adversarial sample generation.
//!
//! Each forget-set sample gets `per_sample_count` replicas, each with a
//! uniformly drawn wrong target label and its own noise, then `steps`
//! signed-gradient iterations clipped to the l-inf ball of radius `tau`
//! around the source. Replicas use RNG streams derived from
//! `(seed, source_index, replica_index)`, so generation is reproducible and
//! independent of iteration or thread order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::parallel;
use crate::rng::{rng_from, stream_seed};

/// Which way a signed-gradient step moves relative to the loss on the
/// target label. `TowardTarget` descends (the sample is driven to be
/// classified as the target); `AwayFromTarget` ascends, kept for ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackDirection {
    #[default]
    TowardTarget,
    AwayFromTarget,
}

/// When the l-inf projection is applied during the PGD iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Project after every step and once more at the end.
    #[default]
    EveryStep,
    /// Project only the final iterate, kept for ablation.
    FinalOnly,
}

/// PGD attack hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// l-inf clip radius around the source sample.
    pub tau: f64,
    /// Per-step size; `AttackConfig::new` sets `2.5 * tau / steps`.
    pub sigma: f64,
    /// Number of signed-gradient iterations.
    pub steps: usize,
    /// Adversarial replicas per forget-set sample.
    pub per_sample_count: usize,
    pub seed: u64,
    #[serde(default)]
    pub direction: AttackDirection,
    #[serde(default)]
    pub clip_mode: ClipMode,
}

impl AttackConfig {
    /// Standard configuration: the step size spans the ball in `steps`
    /// iterations with headroom (`sigma = 2.5 * tau / steps`).
    pub fn new(tau: f64, steps: usize, per_sample_count: usize, seed: u64) -> Self {
        Self {
            tau,
            sigma: 2.5 * tau / steps.max(1) as f64,
            steps,
            per_sample_count,
            seed,
            direction: AttackDirection::default(),
            clip_mode: ClipMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(Error::Config("tau must be positive".into()));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.per_sample_count == 0 {
            return Err(Error::Config("per_sample_count must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self::new(0.7, 50, 20, 0)
    }
}

/// One adversarial replica of a forget-set sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSample {
    pub features: Vec<f64>,
    pub target_label: usize,
    /// Index into the forget set this replica perturbs.
    pub source_index: usize,
    /// Replica number, 1..=per_sample_count.
    pub replica_index: usize,
}

/// Uniform draw over the `class_count - 1` labels different from `true_label`.
pub fn draw_wrong_label(
    rng: &mut ChaCha8Rng,
    true_label: usize,
    class_count: usize,
) -> Result<usize> {
    if class_count < 2 {
        return Err(Error::NoWrongLabel { class_count });
    }
    if true_label >= class_count {
        return Err(Error::LabelOutOfRange {
            label: true_label,
            class_count,
        });
    }
    let mut t = rng.random_range(0..class_count - 1);
    if t >= true_label {
        t += 1;
    }
    Ok(t)
}

/// Draws `m` targeted labels per forget-set sample, each uniform over the
/// wrong classes; repeats across replicas are allowed.
pub fn assign_targets(
    forget_set: &LabeledDataset,
    m: usize,
    class_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::with_capacity(forget_set.len() * m);
    for (i, s) in forget_set.samples().iter().enumerate() {
        for _ in 0..m {
            out.push((i, draw_wrong_label(rng, s.label, class_count)?));
        }
    }
    Ok(out)
}

/// `x + u` with `u` elementwise uniform in `(-tau, tau)`.
pub fn init_perturbation(x: &[f64], tau: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    x.iter().map(|&v| v + rng.random_range(-tau..tau)).collect()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One signed-gradient step on the cross-entropy toward `target`.
pub fn fgsm_step(
    model: &Classifier,
    x: &[f64],
    target: usize,
    sigma: f64,
    direction: AttackDirection,
) -> Result<Vec<f64>> {
    let grad = model.input_gradient(x, target)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite input gradient in FGSM step".into()));
    }
    let step = match direction {
        AttackDirection::TowardTarget => -sigma,
        AttackDirection::AwayFromTarget => sigma,
    };
    Ok(x.iter()
        .zip(&grad)
        .map(|(&xi, &g)| xi + step * sign(g))
        .collect())
}

fn clip_to_ball(x: &mut [f64], center: &[f64], tau: f64) {
    for (v, &c) in x.iter_mut().zip(center) {
        *v = v.clamp(c - tau, c + tau);
    }
}

/// Full PGD attack on one sample: noise initialization, `steps` FGSM
/// iterations, projection per `clip_mode`, and a final projection.
pub fn pgd_attack(
    model: &Classifier,
    x: &[f64],
    target: usize,
    cfg: &AttackConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut current = init_perturbation(x, cfg.tau, rng);
    for _ in 0..cfg.steps {
        current = fgsm_step(model, &current, target, cfg.sigma, cfg.direction)?;
        if cfg.clip_mode == ClipMode::EveryStep {
            clip_to_ball(&mut current, x, cfg.tau);
        }
    }
    clip_to_ball(&mut current, x, cfg.tau);
    Ok(current)
}

/// Generates the full adversarial set: `per_sample_count` replicas for every
/// forget-set sample. Replicas are independent work items and may run in
/// parallel; output order is `(source_index, replica_index)` lexicographic.
pub fn generate_adversarial_set(
    model: &Classifier,
    forget_set: &LabeledDataset,
    cfg: &AttackConfig,
) -> Result<Vec<AdversarialSample>> {
    cfg.validate()?;
    if forget_set.is_empty() {
        return Err(Error::EmptyInput("forget set"));
    }
    let m = cfg.per_sample_count;
    let class_count = forget_set.class_count();
    let jobs: Vec<(usize, usize)> = (0..forget_set.len())
        .flat_map(|i| (1..=m).map(move |j| (i, j)))
        .collect();
    let results = parallel::map_collect(&jobs, |&(source_index, replica_index)| {
        let source = &forget_set.samples()[source_index];
        let mut rng = rng_from(stream_seed(
            cfg.seed,
            source_index as u64,
            replica_index as u64,
        ));
        let target = draw_wrong_label(&mut rng, source.label, class_count)?;
        let features = pgd_attack(model, &source.features, target, cfg, &mut rng)?;
        Ok(AdversarialSample {
            features,
            target_label: target,
            source_index,
            replica_index,
        })
    });
    results.into_iter().collect()
}
