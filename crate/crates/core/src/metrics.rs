//! Ordinal evaluation measures computed from a confusion matrix.
//!
//! Classes with no true samples are skipped by the per-class measures
//! (AMAE, MMAE, MS, BA) and listed in [`MetricReport::missing_classes`].

use serde::{Deserialize, Serialize};

use crate::confusion::{build_confusion, ConfusionMatrix, PredictionSet};
use crate::error::{Error, Result};
use crate::space::LabelSpace;

/// Default exponent of the kappa penalty.
pub const QUADRATIC: u32 = 2;

/// `|i - j|^n / (J - 1)^n`.
pub fn kappa_weight(i: usize, j: usize, classes: usize, n: u32) -> f64 {
    (i.abs_diff(j) as f64).powi(n as i32) / ((classes - 1) as f64).powi(n as i32)
}

fn nonempty(o: &ConfusionMatrix) -> Result<f64> {
    let n = o.total();
    if n == 0 {
        Err(Error::Empty("confusion matrix has no samples".into()))
    } else {
        Ok(n as f64)
    }
}

/// Weighted kappa with penalty exponent `n` (2 gives QWK).
#[allow(clippy::needless_range_loop)]
pub fn qwk(o: &ConfusionMatrix, n: u32) -> Result<f64> {
    let total = nonempty(o)?;
    let j = o.classes();
    let rows = o.row_sums();
    let cols = o.col_sums();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for a in 0..j {
        for b in 0..j {
            let w = kappa_weight(a, b, j, n);
            observed += w * o.get(a, b) as f64;
            expected += w * rows[a] as f64 * cols[b] as f64 / total;
        }
    }
    if expected == 0.0 {
        return Err(Error::Undefined(
            "kappa: expected disagreement is zero (degenerate marginals)".into(),
        ));
    }
    Ok(1.0 - observed / expected)
}

pub fn mae(o: &ConfusionMatrix) -> Result<f64> {
    let total = nonempty(o)?;
    let j = o.classes();
    let mut acc = 0.0;
    for a in 0..j {
        for b in 0..j {
            acc += a.abs_diff(b) as f64 * o.get(a, b) as f64;
        }
    }
    Ok(acc / total)
}

/// Per-class MAE; `None` for classes with no true samples.
pub fn per_class_mae(o: &ConfusionMatrix) -> Vec<Option<f64>> {
    let j = o.classes();
    o.rows()
        .iter()
        .enumerate()
        .map(|(a, row)| {
            let n: u64 = row.iter().sum();
            (n > 0).then(|| {
                (0..j)
                    .map(|b| a.abs_diff(b) as f64 * row[b] as f64)
                    .sum::<f64>()
                    / n as f64
            })
        })
        .collect()
}

/// Per-class recall `O_jj / O_j.`; `None` for empty classes.
pub fn per_class_sensitivity(o: &ConfusionMatrix) -> Vec<Option<f64>> {
    o.rows()
        .iter()
        .enumerate()
        .map(|(a, row)| {
            let n: u64 = row.iter().sum();
            (n > 0).then(|| row[a] as f64 / n as f64)
        })
        .collect()
}

fn present(values: Vec<Option<f64>>) -> Result<Vec<f64>> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        Err(Error::Empty("every class is empty".into()))
    } else {
        Ok(v)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn amae(o: &ConfusionMatrix) -> Result<f64> {
    Ok(mean(&present(per_class_mae(o))?))
}

pub fn mmae(o: &ConfusionMatrix) -> Result<f64> {
    Ok(present(per_class_mae(o))?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn min_sensitivity(o: &ConfusionMatrix) -> Result<f64> {
    Ok(present(per_class_sensitivity(o))?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

pub fn balanced_accuracy(o: &ConfusionMatrix) -> Result<f64> {
    Ok(mean(&present(per_class_sensitivity(o))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// `None` when the kappa is undefined for this matrix.
    pub qwk: Option<f64>,
    pub mae: f64,
    pub amae: f64,
    pub mmae: f64,
    pub ms: f64,
    pub ba: f64,
    pub per_class_mae: Vec<Option<f64>>,
    pub missing_classes: Vec<usize>,
}

impl MetricReport {
    pub fn from_confusion(o: &ConfusionMatrix) -> Result<Self> {
        let qwk = match qwk(o, QUADRATIC) {
            Ok(v) => Some(v),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        let per_class = per_class_mae(o);
        let missing_classes = per_class
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.is_none().then_some(i))
            .collect();
        Ok(Self {
            qwk,
            mae: mae(o)?,
            amae: amae(o)?,
            mmae: mmae(o)?,
            ms: min_sensitivity(o)?,
            ba: balanced_accuracy(o)?,
            per_class_mae: per_class,
            missing_classes,
        })
    }

    pub fn from_predictions(preds: &PredictionSet, space: LabelSpace) -> Result<Self> {
        Self::from_confusion(&build_confusion(preds, space)?)
    }

    /// Value of a named metric (`qwk`, `mae`, `amae`, `mmae`, `ms`, `ba`).
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "qwk" => self.qwk,
            "mae" => Some(self.mae),
            "amae" => Some(self.amae),
            "mmae" => Some(self.mmae),
            "ms" => Some(self.ms),
            "ba" => Some(self.ba),
            _ => None,
        }
    }
}

/// Metric names in report order.
pub const METRIC_NAMES: [&str; 6] = ["qwk", "mae", "ms", "ba", "amae", "mmae"];
