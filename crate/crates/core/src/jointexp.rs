//! Two-task experiment on paired synthetic grades: one classifier per
//! scale, trained on shared features; each run's holdout predictions form a
//! predicted contingency table that is compared with the annotated one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_tables, AnalysisReport, TableRun};
use crate::dataset::SampleSet;
use crate::error::Result;
use crate::joint::{ContingencyTable, DEFAULT_KLD_EPSILON};
use crate::protocol::{run_seed, run_with_split, TRAIN_FRACTION};
use crate::rng::derive_seed;
use crate::search::SearchSpace;
use crate::space::{LabelSpace, Strategy};
use crate::split::stratified_split;
use crate::synth::{embed_paired, flip_adjacent, generate_paired, PairedSynthSpec};
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointExperimentConfig {
    pub paired: PairedSynthSpec,
    pub dim: usize,
    pub class_separation: f64,
    pub noise_sd: f64,
    pub adjacent_flip_prob: f64,
    pub strategies: Vec<Strategy>,
    pub n_seeds: usize,
    pub root_seed: u64,
    pub search: SearchSpace,
    pub train: TrainConfig,
    pub kld_epsilon: f64,
}

impl Default for JointExperimentConfig {
    fn default() -> Self {
        Self {
            paired: PairedSynthSpec::default(),
            dim: 8,
            class_separation: 1.0,
            noise_sd: 1.0,
            adjacent_flip_prob: 0.25,
            strategies: vec![Strategy::Nominal, Strategy::Beta, Strategy::Triangular],
            n_seeds: 20,
            root_seed: 0,
            search: SearchSpace::reference(),
            train: TrainConfig::default(),
            kld_epsilon: DEFAULT_KLD_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedData {
    /// Features shared by both tasks, labelled with the annotated row grade.
    pub task_a: SampleSet,
    /// The same features labelled with the annotated column grade.
    pub task_b: SampleSet,
    /// Annotated joint table over all samples.
    pub truth: ContingencyTable,
}

/// Paired grades, their annotation noise and the shared feature vectors.
/// Features follow the latent grades; labels carry adjacent flips.
pub fn paired_data(config: &JointExperimentConfig) -> Result<PairedData> {
    let grades = generate_paired(&config.paired)?;
    let features = embed_paired(
        &grades,
        config.dim,
        config.class_separation,
        config.noise_sd,
        config.paired.seed,
    )?;
    let mut a = grades.a.clone();
    let mut b = grades.b.clone();
    flip_adjacent(
        &mut a,
        grades.classes_a,
        config.adjacent_flip_prob,
        derive_seed(config.paired.seed, &[1]),
    );
    flip_adjacent(
        &mut b,
        grades.classes_b,
        config.adjacent_flip_prob,
        derive_seed(config.paired.seed, &[2]),
    );
    let truth = ContingencyTable::from_pairs("a", "b", grades.classes_a, grades.classes_b, &a, &b)?;
    let task_a = SampleSet::new(
        LabelSpace::new(grades.classes_a)?,
        config.dim,
        features.clone(),
        a,
    )?;
    let task_b = SampleSet::new(LabelSpace::new(grades.classes_b)?, config.dim, features, b)?;
    Ok(PairedData {
        task_a,
        task_b,
        truth,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointExperiment {
    pub truth: ContingencyTable,
    pub runs: Vec<TableRun>,
    pub report: AnalysisReport,
}

/// Per seed: one stratified split on the row grade shared by both tasks and
/// every strategy; per strategy, search and train both classifiers and
/// tabulate their joint holdout predictions.
pub fn run_joint_experiment(config: &JointExperimentConfig) -> Result<JointExperiment> {
    let data = paired_data(config)?;
    let jobs: Vec<(u64, Strategy)> = (0..config.n_seeds)
        .flat_map(|i| {
            let seed = run_seed(config.root_seed, i);
            config.strategies.iter().map(move |&s| (seed, s))
        })
        .collect();
    let runs: Vec<TableRun> = jobs
        .par_iter()
        .map(|&(seed, strategy)| {
            let (train_idx, test_idx) =
                stratified_split(data.task_a.labels(), TRAIN_FRACTION, seed)?;
            let run = |task: &SampleSet, name: &str, sub: u64| {
                run_with_split(
                    name,
                    task,
                    &train_idx,
                    &test_idx,
                    strategy,
                    &config.search,
                    &config.train,
                    derive_seed(seed, &[sub]),
                )
            };
            let ra = run(&data.task_a, "a", 1)?;
            let rb = run(&data.task_b, "b", 2)?;
            let table = ContingencyTable::from_pairs(
                "a",
                "b",
                data.task_a.space().classes(),
                data.task_b.space().classes(),
                &ra.predicted,
                &rb.predicted,
            )?;
            Ok(TableRun {
                strategy: strategy.name().to_string(),
                seed,
                table,
            })
        })
        .collect::<Result<_>>()?;
    let report = analyze_tables(&data.truth, &runs, config.kld_epsilon)?;
    Ok(JointExperiment {
        truth: data.truth,
        runs,
        report,
    })
}
