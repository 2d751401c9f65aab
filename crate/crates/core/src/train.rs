//! Mini-batch gradient descent with early stopping.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::model::{Architecture, ClassifierModel, Scratch};
use crate::rng::{rng_for, stream};
use crate::softlabel::{build_target_matrix, SmoothingParams, SoftTargetMatrix};
use crate::space::Strategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub strategy: Strategy,
    pub params: SmoothingParams,
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            batch_size: 32,
            max_epochs: 100,
            patience: 40,
            strategy: Strategy::Nominal,
            params: SmoothingParams::default(),
            seed: 0,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("max_epochs must be >= 1".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::InvalidParameter(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        self.params.validate(self.strategy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_early: bool,
}

/// Trains `model` in place from its current weights and returns the weights
/// of the epoch with the lowest validation loss. Validation samples are
/// scored against the same target matrix as the training samples.
pub fn train(
    model: ClassifierModel,
    data: &SampleSet,
    targets: &SoftTargetMatrix,
    config: &TrainConfig,
    validation: &SampleSet,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() || validation.is_empty() {
        return Err(Error::Empty(
            "training and validation sets must be non-empty".into(),
        ));
    }
    if data.dim() != model.input_dim() || validation.dim() != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} features, data has {} and validation {}",
            model.input_dim(),
            data.dim(),
            validation.dim()
        )));
    }
    if targets.classes() != model.classes() || data.space().classes() != model.classes() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} outputs, targets {} classes, data {} classes",
            model.classes(),
            targets.classes(),
            data.space().classes()
        )));
    }

    let mut model = model;
    let mut rng = rng_for(config.seed, &[stream::SHUFFLE]);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; model.param_count()];
    let mut scratch = Scratch::default();
    let mut history = Vec::with_capacity(config.max_epochs);
    let mut best = (model.clone(), f64::INFINITY, 0usize);
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                epoch_loss += model.accumulate(
                    data.row(i),
                    targets.row(data.labels()[i]),
                    &mut grad,
                    &mut scratch,
                );
            }
            let step = config.learning_rate / batch.len() as f64;
            for (w, g) in model.params_mut().iter_mut().zip(&grad) {
                *w -= step * g;
            }
        }
        let train_loss = epoch_loss / data.len() as f64;
        if !train_loss.is_finite() || !model.is_finite() {
            return Err(Error::Diverged {
                epoch,
                what: "training loss",
            });
        }
        let validation_loss = model.mean_loss(validation, targets);
        if !validation_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                what: "validation loss",
            });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            validation_loss,
        });
        if validation_loss < best.1 {
            best = (model.clone(), validation_loss, epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        model: best.0,
        history,
        best_epoch: best.2,
        best_validation_loss: best.1,
        stopped_early,
    })
}

/// Builds a fresh model for `config`, fits its input standardiser on `data`,
/// builds the target matrix and trains.
pub fn fit(data: &SampleSet, validation: &SampleSet, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let targets = build_target_matrix(data.space(), config.strategy, config.params)?;
    let mut model = ClassifierModel::new(
        config.architecture,
        data.dim(),
        data.space().classes(),
        config.seed,
    )?;
    model.fit_standardizer(data);
    train(model, data, &targets, config, validation)
}
