//! Dataset representation, the synthetic grouped benchmark, group-wise
//! splitting, forget/remain selection, and CSV interchange.
//!
//! Samples carry a `group` identifier (a speaker surrogate): splits assign
//! whole groups to train/val/test so evaluation always happens on unseen
//! groups.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// One labelled feature vector with its group identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    pub group: u32,
}

/// A set of labelled samples with uniform feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    samples: Vec<Sample>,
    class_count: usize,
    feature_dim: usize,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Sample>, class_count: usize, feature_dim: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::ShapeMismatch {
                    what: "sample features",
                    expected: feature_dim,
                    got: s.features.len(),
                });
            }
            if s.label >= class_count {
                return Err(Error::Parse {
                    path: String::new(),
                    row: i,
                    message: format!("label {} >= class_count {}", s.label, class_count),
                });
            }
        }
        Ok(Self {
            samples,
            class_count,
            feature_dim,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Distinct group ids, ascending.
    pub fn group_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.samples.iter().map(|s| s.group).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Borrowed `(features, label)` view used by loss and gradient routines.
    pub fn as_batch(&self) -> Vec<(&[f64], usize)> {
        self.samples
            .iter()
            .map(|s| (s.features.as_slice(), s.label))
            .collect()
    }
}

/// Generation recipe for the synthetic grouped benchmark.
///
/// Class `c`'s samples live around `separation * e_c` (one axis per class),
/// shifted by a per-group offset (the "speaker" effect) and within-class
/// Gaussian noise. The defaults are sized so that the benchmark trains to
/// high UAR in seconds while the standard attack radii in `AttackConfig`
/// remain a meaningful fraction of the class geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub class_count: usize,
    pub group_count: usize,
    pub samples_per_group_per_class: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub within_std: f64,
    pub group_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            class_count: 7,
            group_count: 30,
            samples_per_group_per_class: 4,
            feature_dim: 16,
            separation: 1.1,
            within_std: 0.28,
            group_std: 0.1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Config("class_count must be >= 2".into()));
        }
        if self.group_count < 3 {
            return Err(Error::Config("group_count must be >= 3".into()));
        }
        if self.samples_per_group_per_class == 0 {
            return Err(Error::Config(
                "samples_per_group_per_class must be positive".into(),
            ));
        }
        if self.feature_dim < self.class_count {
            return Err(Error::Config(format!(
                "feature_dim {} < class_count {}: class means need distinct axes",
                self.feature_dim, self.class_count
            )));
        }
        if self.separation <= 0.0 || self.within_std <= 0.0 || self.group_std <= 0.0 {
            return Err(Error::Config(
                "separation, within_std, and group_std must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Generates the synthetic benchmark dataset; deterministic given the seed.
pub fn synth_generate(spec: &SynthSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = rng_from(spec.seed);
    let normal = StandardNormal;
    let d = spec.feature_dim;
    let mut samples =
        Vec::with_capacity(spec.group_count * spec.class_count * spec.samples_per_group_per_class);
    for group in 0..spec.group_count {
        let offset: Vec<f64> = (0..d)
            .map(|_| spec.group_std * <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng))
            .collect();
        for class in 0..spec.class_count {
            for _ in 0..spec.samples_per_group_per_class {
                let mut features: Vec<f64> = (0..d)
                    .map(|j| {
                        offset[j]
                            + spec.within_std
                                * <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng)
                    })
                    .collect();
                features[class] += spec.separation;
                samples.push(Sample {
                    features,
                    label: class,
                    group: group as u32,
                });
            }
        }
    }
    LabeledDataset::new(samples, spec.class_count, d)
}

/// Group-wise split fractions; groups, not samples, are assigned to splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 1.0 / 3.0,
            val_fraction: 1.0 / 3.0,
            test_fraction: 1.0 / 3.0,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for f in [self.train_fraction, self.val_fraction, self.test_fraction] {
            if !(0.0..1.0).contains(&f) || f == 0.0 {
                return Err(Error::Config("split fractions must lie in (0, 1)".into()));
            }
        }
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Partitions a dataset into train/val/test with every group wholly in one
/// split: seeded shuffle of the group ids, then fraction cuts.
pub fn split_by_group(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let mut groups = ds.group_ids();
    if groups.len() < 3 {
        return Err(Error::Split(format!(
            "need at least 3 distinct groups, found {}",
            groups.len()
        )));
    }
    let mut rng = rng_from(spec.seed);
    groups.shuffle(&mut rng);
    let g = groups.len() as f64;
    let cut1 = ((g * spec.train_fraction).round() as usize).min(groups.len());
    let cut2 = ((g * (spec.train_fraction + spec.val_fraction)).round() as usize)
        .clamp(cut1, groups.len());

    let in_set = |ids: &[u32], s: &Sample| ids.contains(&s.group);
    let collect = |ids: &[u32]| -> Result<LabeledDataset> {
        let picked: Vec<Sample> = ds
            .samples
            .iter()
            .filter(|s| in_set(ids, s))
            .cloned()
            .collect();
        if picked.is_empty() {
            return Err(Error::Split(
                "a split received no groups; use less extreme fractions".into(),
            ));
        }
        LabeledDataset::new(picked, ds.class_count, ds.feature_dim)
    };
    Ok((
        collect(&groups[..cut1])?,
        collect(&groups[cut1..cut2])?,
        collect(&groups[cut2..])?,
    ))
}

/// Draws a uniform `n`-subset of the training set as the forget set; the
/// complement is the remain set. The two partition the input exactly.
pub fn select_forget(
    train: &LabeledDataset,
    n: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if n == 0 {
        return Err(Error::Config("forget count must be positive".into()));
    }
    if n >= train.len() {
        return Err(Error::Selection {
            requested: n,
            available: train.len(),
        });
    }
    let mut indices: Vec<usize> = (0..train.len()).collect();
    let mut rng = rng_from(seed);
    indices.shuffle(&mut rng);
    let mut chosen = indices[..n].to_vec();
    chosen.sort_unstable();
    let mut forget = Vec::with_capacity(n);
    let mut remain = Vec::with_capacity(train.len() - n);
    let mut next = 0;
    for (i, s) in train.samples.iter().enumerate() {
        if next < chosen.len() && chosen[next] == i {
            forget.push(s.clone());
            next += 1;
        } else {
            remain.push(s.clone());
        }
    }
    Ok((
        LabeledDataset::new(forget, train.class_count, train.feature_dim)?,
        LabeledDataset::new(remain, train.class_count, train.feature_dim)?,
    ))
}

/// Serializes one float with 17 significant digits, enough for an exact
/// f64 round-trip through text.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the dataset in the interchange CSV format:
/// header `f0,...,f{d-1},label,group`, one sample per row.
pub fn save_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 0..ds.feature_dim {
        let _ = write!(out, "f{j},");
    }
    out.push_str("label,group\n");
    for s in &ds.samples {
        for v in &s.features {
            out.push_str(&fmt_f64(*v));
            out.push(',');
        }
        let _ = writeln!(out, "{},{}", s.label, s.group);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads the interchange CSV format back; `class_count` is inferred as
/// `max(label) + 1` unless a larger count is supplied.
pub fn load_csv(path: &Path, class_count: Option<usize>) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let err = |row: usize, message: String| Error::Parse {
        path: display.clone(),
        row,
        message,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(0, "empty file".to_string()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[cols.len() - 2] != "label" || cols[cols.len() - 1] != "group" {
        return Err(err(0, "header must be f0,...,f{d-1},label,group".into()));
    }
    let d = cols.len() - 2;
    for (j, c) in cols[..d].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(err(0, format!("unexpected feature column name `{c}`")));
        }
    }

    let mut samples = Vec::new();
    let mut max_label = 0usize;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(err(
                lineno,
                format!("expected {} columns, found {}", d + 2, fields.len()),
            ));
        }
        let mut features = Vec::with_capacity(d);
        for (j, raw) in fields[..d].iter().enumerate() {
            let v: f64 = raw
                .parse()
                .map_err(|_| err(lineno, format!("bad float in column f{j}: `{raw}`")))?;
            features.push(v);
        }
        let label: usize = fields[d]
            .parse()
            .map_err(|_| err(lineno, format!("bad label `{}`", fields[d])))?;
        let group: u32 = fields[d + 1]
            .parse()
            .map_err(|_| err(lineno, format!("bad group `{}`", fields[d + 1])))?;
        max_label = max_label.max(label);
        samples.push(Sample {
            features,
            label,
            group,
        });
    }
    if samples.is_empty() {
        return Err(err(1, "no data rows".into()));
    }
    let inferred = max_label + 1;
    let c = match class_count {
        Some(c) if c >= inferred => c,
        Some(c) => {
            return Err(err(
                0,
                format!("label {} out of range for class_count {}", max_label, c),
            ))
        }
        None => inferred,
    };
    LabeledDataset::new(samples, c, d)
}
