//! Randomised hyperparameter search with AMAE model selection.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::model::ClassifierModel;
use crate::rng::{derive_seed, rng_for, stream};
use crate::softlabel::SmoothingParams;
use crate::space::Strategy;
use crate::split::stratified_split;
use crate::train::{fit, TrainConfig};

pub const VALIDATION_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub learning_rates: Vec<f64>,
    pub etas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub ps: Vec<f64>,
    pub concentrations: Vec<f64>,
    pub max_configs: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self::reference()
    }
}

impl SearchSpace {
    /// The reference grid: three learning rates for every strategy, plus the
    /// blend weight and the family parameter for the soft ones.
    pub fn reference() -> Self {
        Self {
            learning_rates: vec![1e-4, 1e-3, 1e-2],
            etas: vec![0.8, 1.0],
            alphas: vec![0.01, 0.05, 0.10],
            ps: vec![1.0, 1.5, 2.0],
            concentrations: vec![5.0, 10.0],
            max_configs: 15,
        }
    }

    /// Every (learning rate, smoothing parameters) pair for `strategy`, in
    /// a fixed order.
    pub fn grid(&self, strategy: Strategy) -> Vec<(f64, SmoothingParams)> {
        let etas: &[f64] = if strategy.is_soft() {
            &self.etas
        } else {
            &[1.0]
        };
        let family: Vec<SmoothingParams> = match strategy {
            Strategy::Nominal | Strategy::Binomial => vec![SmoothingParams::default()],
            Strategy::Triangular => self
                .alphas
                .iter()
                .map(|&a| SmoothingParams::default().alpha(a))
                .collect(),
            Strategy::Exponential => self
                .ps
                .iter()
                .map(|&p| SmoothingParams::default().p(p))
                .collect(),
            Strategy::Beta => self
                .concentrations
                .iter()
                .map(|&s| SmoothingParams::default().concentration(s))
                .collect(),
        };
        let mut out = Vec::new();
        for &lr in &self.learning_rates {
            for &eta in etas {
                for f in &family {
                    out.push((lr, SmoothingParams { eta, ..*f }));
                }
            }
        }
        out
    }

    pub fn validate(&self, strategy: Strategy) -> Result<()> {
        if self.max_configs == 0 {
            return Err(Error::InvalidParameter("max_configs must be >= 1".into()));
        }
        let grid = self.grid(strategy);
        if grid.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "search grid for {strategy} is empty"
            )));
        }
        for (lr, params) in &grid {
            if !(*lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad learning rate {lr}")));
            }
            params.validate(strategy)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: TrainConfig,
    pub validation_amae: f64,
    pub validation_mae: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Trial,
    pub trials: Vec<Trial>,
    #[serde(skip)]
    pub model: Option<ClassifierModel>,
}

/// Ordering used for selection: AMAE, then MAE, then learning rate.
fn better(a: &Trial, b: &Trial) -> bool {
    a.validation_amae
        .total_cmp(&b.validation_amae)
        .then(a.validation_mae.total_cmp(&b.validation_mae))
        .then(a.config.learning_rate.total_cmp(&b.config.learning_rate))
        .is_lt()
}

/// Samples up to `max_configs` grid points without replacement, trains each
/// on a stratified 70% of `data` with early stopping on the other 30%, and
/// keeps the one with the lowest validation AMAE. `base` supplies the
/// settings that are not searched (batch size, epochs, architecture).
pub fn random_search(
    space: &SearchSpace,
    data: &SampleSet,
    strategy: Strategy,
    base: &TrainConfig,
    seed: u64,
) -> Result<SearchOutcome> {
    space.validate(strategy)?;
    let (fit_idx, val_idx) = stratified_split(
        data.labels(),
        1.0 - VALIDATION_FRACTION,
        derive_seed(seed, &[stream::VALIDATION]),
    )?;
    let train_part = data.subset(&fit_idx);
    let val_part = data.subset(&val_idx);
    search_on_split(space, &train_part, &val_part, strategy, base, seed)
}

/// As [`random_search`] with an explicit validation set.
pub fn search_on_split(
    space: &SearchSpace,
    train_part: &SampleSet,
    val_part: &SampleSet,
    strategy: Strategy,
    base: &TrainConfig,
    seed: u64,
) -> Result<SearchOutcome> {
    space.validate(strategy)?;
    let grid = space.grid(strategy);
    let take = space.max_configs.min(grid.len());
    let mut picked = sample(&mut rng_for(seed, &[stream::SEARCH]), grid.len(), take).into_vec();
    picked.sort_unstable();

    let results: Vec<(Trial, ClassifierModel)> = picked
        .par_iter()
        .map(|&g| {
            let (learning_rate, params) = grid[g];
            let config = TrainConfig {
                learning_rate,
                strategy,
                params,
                seed: derive_seed(seed, &[stream::TRIAL, g as u64]),
                ..base.clone()
            };
            let outcome = fit(train_part, val_part, &config)?;
            let preds = outcome.model.predict(val_part)?;
            let report = MetricReport::from_predictions(&preds, val_part.space())?;
            Ok((
                Trial {
                    config,
                    validation_amae: report.amae,
                    validation_mae: report.mae,
                    best_epoch: outcome.best_epoch,
                },
                outcome.model,
            ))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, (trial, _)) in results.iter().enumerate() {
        if better(trial, &results[best].0) {
            best = i;
        }
    }
    let model = results[best].1.clone();
    let trials: Vec<Trial> = results.into_iter().map(|(t, _)| t).collect();
    Ok(SearchOutcome {
        best: trials[best].clone(),
        trials,
        model: Some(model),
    })
}
