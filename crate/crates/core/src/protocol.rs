//! The repeated-holdout protocol: per seed, split 70/30, search on the
//! training part, evaluate the selected model on the holdout.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, METRIC_NAMES};
use crate::rng::derive_seed;
use crate::search::{random_search, SearchSpace};
use crate::space::Strategy;
use crate::split::stratified_split;
use crate::train::TrainConfig;

pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub task: String,
    pub seed: u64,
    pub strategy: Strategy,
    pub config: TrainConfig,
    pub validation_amae: f64,
    pub metrics: MetricReport,
    /// Holdout sample indices into the full dataset, ascending.
    pub test_indices: Vec<usize>,
    /// Predicted grade per holdout sample, aligned with `test_indices`.
    pub predicted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub task: String,
    pub strategies: Vec<Strategy>,
    pub n_seeds: usize,
    pub root_seed: u64,
    pub search: SearchSpace,
    pub train: TrainConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            task: "task".into(),
            strategies: Strategy::ALL.to_vec(),
            n_seeds: 20,
            root_seed: 0,
            search: SearchSpace::reference(),
            train: TrainConfig::default(),
        }
    }
}

/// Split seed for run `i`; shared by every strategy so that runs are paired.
pub fn run_seed(root_seed: u64, i: usize) -> u64 {
    root_seed + i as u64
}

/// One run on a fixed split.
#[allow(clippy::too_many_arguments)]
pub fn run_with_split(
    task: &str,
    data: &SampleSet,
    train_idx: &[usize],
    test_idx: &[usize],
    strategy: Strategy,
    search: &SearchSpace,
    base: &TrainConfig,
    seed: u64,
) -> Result<RunResult> {
    let train_set = data.subset(train_idx);
    let test_set = data.subset(test_idx);
    let search_seed = derive_seed(seed, &[strategy as u64 + 1]);
    let outcome = random_search(search, &train_set, strategy, base, search_seed)?;
    let model = outcome
        .model
        .ok_or_else(|| Error::Empty("search returned no model".into()))?;
    let preds = model.predict(&test_set)?;
    let metrics = MetricReport::from_predictions(&preds, data.space())?;
    Ok(RunResult {
        task: task.to_string(),
        seed,
        strategy,
        config: outcome.best.config,
        validation_amae: outcome.best.validation_amae,
        metrics,
        test_indices: test_idx.to_vec(),
        predicted: preds.predicted_labels,
    })
}

/// Runs every (seed, strategy) pair. Results are ordered by seed, then by
/// the order of `config.strategies`.
pub fn run_protocol(data: &SampleSet, config: &ProtocolConfig) -> Result<Vec<RunResult>> {
    run_protocol_with(data, config, |_| Ok(()))
}

/// [`run_protocol`], calling `on_run` as each run finishes. Calls may come
/// from several worker threads in any order; the returned vector is ordered.
pub fn run_protocol_with<F>(
    data: &SampleSet,
    config: &ProtocolConfig,
    on_run: F,
) -> Result<Vec<RunResult>>
where
    F: Fn(&RunResult) -> Result<()> + Sync,
{
    if config.n_seeds == 0 {
        return Err(Error::InvalidParameter("n_seeds must be >= 1".into()));
    }
    if config.strategies.is_empty() {
        return Err(Error::InvalidParameter("no strategies given".into()));
    }
    let jobs: Vec<(u64, Strategy)> = (0..config.n_seeds)
        .flat_map(|i| {
            let seed = run_seed(config.root_seed, i);
            config.strategies.iter().map(move |&s| (seed, s))
        })
        .collect();
    let splits: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = (0..config.n_seeds)
        .map(|i| {
            let seed = run_seed(config.root_seed, i);
            stratified_split(data.labels(), TRAIN_FRACTION, seed).map(|s| (seed, s))
        })
        .collect::<Result<_>>()?;
    jobs.par_iter()
        .map(|&(seed, strategy)| {
            let (train_idx, test_idx) = &splits[&seed];
            run_with_split(
                &config.task,
                data,
                train_idx,
                test_idx,
                strategy,
                &config.search,
                &config.train,
                seed,
            )
            .and_then(|run| on_run(&run).map(|()| run))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// Sample standard deviation (n - 1); zero for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}_{{{:.3}}}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub cells: BTreeMap<String, Option<MeanStd>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub task: String,
    pub metrics: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

/// Mean and standard deviation of every metric per strategy, followed by an
/// `average` row over the strategy means. Strategies appear in first-seen
/// order. Undefined QWK values are left out of the aggregate.
pub fn summarize(task: &str, results: &[RunResult]) -> Summary {
    let mut order: Vec<Strategy> = Vec::new();
    for r in results {
        if !order.contains(&r.strategy) {
            order.push(r.strategy);
        }
    }
    let metrics: Vec<String> = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
    let mut rows: Vec<SummaryRow> = order
        .iter()
        .map(|&s| {
            let runs: Vec<&RunResult> = results.iter().filter(|r| r.strategy == s).collect();
            let cells = metrics
                .iter()
                .map(|m| {
                    let vals: Vec<f64> = runs.iter().filter_map(|r| r.metrics.get(m)).collect();
                    (m.clone(), MeanStd::of(&vals))
                })
                .collect();
            SummaryRow {
                label: s.name().to_string(),
                cells,
            }
        })
        .collect();
    if !rows.is_empty() {
        let cells = metrics
            .iter()
            .map(|m| {
                let means: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| r.cells[m].map(|c| c.mean))
                    .collect();
                (m.clone(), MeanStd::of(&means))
            })
            .collect();
        rows.push(SummaryRow {
            label: "average".into(),
            cells,
        });
    }
    Summary {
        schema_version: crate::SCHEMA_VERSION,
        task: task.to_string(),
        metrics,
        rows,
    }
}

impl Summary {
    /// Plain-text table, one row per strategy.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<12}", self.task);
        for m in &self.metrics {
            out.push_str(&format!(" {:>16}", m.to_uppercase()));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<12}", row.label));
            for m in &self.metrics {
                let cell = row.cells[m].map_or_else(|| "-".to_string(), |c| c.to_string());
                out.push_str(&format!(" {cell:>16}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy");
        for m in &self.metrics {
            out.push_str(&format!(",{m}_mean,{m}_std"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.label);
            for m in &self.metrics {
                match row.cells[m] {
                    Some(c) => out.push_str(&format!(",{},{}", c.mean, c.std)),
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }
}
