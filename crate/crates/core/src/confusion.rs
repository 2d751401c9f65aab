use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::LabelSpace;

/// Index of the largest entry; ties go to the lower grade.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `J x J` counts with the true grade on rows and the predicted grade on
/// columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(space: LabelSpace) -> Self {
        let j = space.classes();
        Self {
            counts: vec![vec![0; j]; j],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let j = counts.len();
        LabelSpace::new(j)?;
        if counts.iter().any(|r| r.len() != j) {
            return Err(Error::ShapeMismatch(
                "confusion matrix must be square".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn from_labels(space: LabelSpace, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} true labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut m = Self::zeros(space);
        for (&t, &p) in truth.iter().zip(predicted) {
            space.check(t)?;
            space.check(p)?;
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// `O_i.`, the number of samples whose true grade is `i`.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// `O_.j`, the number of samples predicted as `j`.
    pub fn col_sums(&self) -> Vec<u64> {
        let j = self.classes();
        (0..j)
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }
}

/// Predicted probabilities and labels for an evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub true_labels: Vec<usize>,
    pub predicted_labels: Vec<usize>,
    pub predicted_probs: Vec<Vec<f64>>,
}

impl PredictionSet {
    /// Builds the set from probability rows, deriving the predicted labels by
    /// argmax.
    pub fn from_probs(true_labels: Vec<usize>, predicted_probs: Vec<Vec<f64>>) -> Result<Self> {
        if true_labels.len() != predicted_probs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels vs {} probability rows",
                true_labels.len(),
                predicted_probs.len()
            )));
        }
        for (i, row) in predicted_probs.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "probability row {i} is not a distribution (sum {s})"
                )));
            }
        }
        let predicted_labels = predicted_probs.iter().map(|r| argmax(r)).collect();
        Ok(Self {
            true_labels,
            predicted_labels,
            predicted_probs,
        })
    }

    pub fn len(&self) -> usize {
        self.true_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_labels.is_empty()
    }
}

pub fn build_confusion(preds: &PredictionSet, space: LabelSpace) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_labels(space, &preds.true_labels, &preds.predicted_labels)
}
