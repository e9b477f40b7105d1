//! Evaluation: confusion matrices, unweighted average recall, and the
//! one-tailed two-proportion z-test used to mark significant differences.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{argmax, Classifier};
use crate::parallel;

/// C x C count matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        Self {
            counts: vec![vec![0; class_count]; class_count],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if c == 0 || counts.iter().any(|row| row.len() != c) {
            return Err(Error::Config("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        self.counts[true_class][predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class][predicted]
    }

    pub fn row_sum(&self, true_class: usize) -> u64 {
        self.counts[true_class].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Per-class recall; `None` for classes with no true samples.
    pub fn per_class_recall(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let total: u64 = row.iter().sum();
                (total > 0).then(|| self.counts[c][c] as f64 / total as f64)
            })
            .collect()
    }
}

/// Mean of per-class recalls over classes that have at least one true
/// sample. Errors on an all-zero matrix.
pub fn uar(confusion: &ConfusionMatrix) -> Result<f64> {
    let recalls: Vec<f64> = confusion.per_class_recall().into_iter().flatten().collect();
    if recalls.is_empty() {
        return Err(Error::EmptyEval);
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Evaluation summary for one model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub uar: f64,
    pub confusion: ConfusionMatrix,
    pub per_class_recall: Vec<Option<f64>>,
    pub split_name: String,
    pub n_samples: usize,
}

/// Runs the model over a dataset; predictions are the softmax argmax with
/// ties resolved to the lowest class index.
pub fn evaluate(model: &Classifier, ds: &LabeledDataset, split_name: &str) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("evaluation dataset"));
    }
    let predictions = parallel::map_collect(ds.samples(), |s| {
        model.forward(&s.features).map(|probs| argmax(&probs))
    });
    let mut confusion = ConfusionMatrix::new(ds.class_count());
    for (s, pred) in ds.samples().iter().zip(predictions) {
        confusion.record(s.label, pred?);
    }
    let uar = uar(&confusion)?;
    Ok(EvalReport {
        uar,
        per_class_recall: confusion.per_class_recall(),
        confusion,
        split_name: split_name.to_string(),
        n_samples: ds.len(),
    })
}

/// Outcome of the one-tailed two-proportion z-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p_value: f64,
    /// Set when the pooled variance is zero (both rates 0 or both 1);
    /// the p-value is then 0.5 by convention.
    pub degenerate: bool,
}

/// Pooled two-proportion z-test treating each UAR as a success rate over its
/// sample count; returns `P(Z >= z)` for the alternative "a > b".
pub fn one_tailed_z_test(uar_a: f64, uar_b: f64, n_a: usize, n_b: usize) -> Result<ZTest> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::Config("z-test sample counts must be positive".into()));
    }
    for (name, v) in [("uar_a", uar_a), ("uar_b", uar_b)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    let (na, nb) = (n_a as f64, n_b as f64);
    let pooled = (uar_a * na + uar_b * nb) / (na + nb);
    let variance = pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb);
    if variance == 0.0 {
        return Ok(ZTest {
            z: 0.0,
            p_value: 0.5,
            degenerate: true,
        });
    }
    let z = (uar_a - uar_b) / variance.sqrt();
    Ok(ZTest {
        z,
        p_value: 1.0 - standard_normal_cdf(z),
        degenerate: false,
    })
}

/// Standard normal CDF via the complementary error function.
fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, rational Chebyshev approximation
/// (W. J. Cody, 1969), accurate to about 1e-16 over the full range.
fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.46875 {
        return 1.0 - erf_small(x);
    }
    let value = if ax <= 4.0 { erfc_mid(ax) } else { erfc_large(ax) };
    if x < 0.0 {
        2.0 - value
    } else {
        value
    }
}

/// erf(x) for |x| < 0.5.
fn erf_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.209377589138469472562e3,
        3.774852376853020208137e2,
        1.138641541510501556495e2,
        3.161123743870565596947e0,
        1.857777061846031526730e-1,
    ];
    const B: [f64; 4] = [
        2.844236833439170622273e3,
        1.282616526077372275645e3,
        2.440246379344441733056e2,
        2.360129095234412093499e1,
    ];
    let z = x * x;
    let num = ((((A[4] * z + A[3]) * z + A[2]) * z + A[1]) * z) + A[0];
    let den = ((((z + B[3]) * z + B[2]) * z + B[1]) * z) + B[0];
    x * num / den
}

/// erfc(x) for 0.5 <= x <= 4.
fn erfc_mid(x: f64) -> f64 {
    const C: [f64; 9] = [
        1.23033935479799725272e3,
        2.05107837782607146532e3,
        1.71204761263407058314e3,
        8.81952221241769090411e2,
        2.98635138197400131132e2,
        6.61191906371416294775e1,
        8.88314979438837594118e0,
        5.64188496988670089180e-1,
        2.15311535474403846343e-8,
    ];
    const D: [f64; 8] = [
        1.23033935480374942043e3,
        3.43936767414372163696e3,
        4.36261909014324715820e3,
        3.29079923573345962678e3,
        1.62138957456669018874e3,
        5.37181101862009857509e2,
        1.17693950891312499305e2,
        1.57449261107098347253e1,
    ];
    let mut num = C[8] * x;
    let mut den = x;
    for i in (1..8).rev() {
        num = (num + C[i]) * x;
        den = (den + D[i]) * x;
    }
    let ratio = (num + C[0]) / (den + D[0]);
    (-x * x).exp() * ratio
}

/// erfc(x) for x > 4.
fn erfc_large(x: f64) -> f64 {
    const P: [f64; 6] = [
        3.05326634961232344035e-1,
        3.60344899949804439429e-1,
        1.25781726111229246204e-1,
        1.60837851487422766278e-2,
        6.58749161529837803157e-4,
        1.63153871373020978498e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242072e0,
        1.87295284992346047209e0,
        5.27905102951428412248e-1,
        6.05183413124413191178e-2,
        2.33520497626869185443e-3,
    ];
    const INV_SQRT_PI: f64 = 5.6418958354775628695e-1;
    if x >= 26.5 {
        return 0.0;
    }
    let z = 1.0 / (x * x);
    let mut num = P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + P[i]) * z;
        den = (den + Q[i]) * z;
    }
    let r = z * (num + P[4]) / (den + Q[4]);
    ((-x * x).exp() / x) * (INV_SQRT_PI - r)
}
