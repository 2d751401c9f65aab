//! Sweep configuration and the machine-readable outputs of a sweep.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::jointexp::{run_joint_experiment, JointExperiment, JointExperimentConfig};
use crate::protocol::{run_protocol_with, summarize, ProtocolConfig, RunResult, Summary};
use crate::search::SearchSpace;
use crate::space::Strategy;
use crate::synth::{generate, SynthSpec};
use crate::train::TrainConfig;

pub use crate::SCHEMA_VERSION;

/// Where the samples of a single-task sweep come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// A CSV file as written by [`SampleSet::write_csv`].
    Csv {
        path: PathBuf,
        classes: Option<usize>,
    },
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    Single {
        task: String,
        data: DataSource,
        #[serde(default = "all_strategies")]
        strategies: Vec<Strategy>,
        #[serde(default)]
        search: SearchSpace,
        #[serde(default)]
        train: TrainConfig,
    },
    Joint(JointExperimentConfig),
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_seeds() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(flatten)]
    pub kind: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::InvalidParameter("n_seeds must be >= 1".into()));
        }
        let strategies = match &self.kind {
            ExperimentKind::Single { strategies, .. } => strategies,
            ExperimentKind::Joint(j) => &j.strategies,
        };
        if strategies.is_empty() {
            return Err(Error::InvalidParameter(
                "strategies must not be empty".into(),
            ));
        }
        Ok(())
    }
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    #[serde(flatten)]
    pub run: RunResult,
}

pub fn to_jsonl(results: &[RunResult]) -> Result<String> {
    let mut out = String::new();
    for run in results {
        let record = RunRecord {
            schema_version: SCHEMA_VERSION,
            run: run.clone(),
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl(text: &str) -> Result<Vec<RunResult>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let record: RunRecord = serde_json::from_str(l)
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            Ok(record.run)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutput {
    Single {
        results: Vec<RunResult>,
        summary: Summary,
    },
    Joint(Box<JointExperiment>),
}

/// Loads the data for a single-task sweep.
pub fn load_data(source: &DataSource, root_seed: u64) -> Result<SampleSet> {
    match source {
        DataSource::Csv { path, classes } => {
            let file = std::fs::File::open(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let space = classes.map(crate::LabelSpace::new).transpose()?;
            SampleSet::read_csv(std::io::BufReader::new(file), space)
        }
        DataSource::Synth(spec) => generate(&SynthSpec {
            seed: spec.seed ^ root_seed,
            ..spec.clone()
        }),
    }
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    run_sweep_with(config, |_| Ok(()))
}

/// [`run_sweep`], calling `on_run` as each single-task run finishes.
pub fn run_sweep_with<F>(config: &ExperimentConfig, on_run: F) -> Result<SweepOutput>
where
    F: Fn(&RunResult) -> Result<()> + Sync,
{
    config.validate()?;
    match &config.kind {
        ExperimentKind::Single {
            task,
            data,
            strategies,
            search,
            train,
        } => {
            let samples = load_data(data, config.root_seed)?;
            let protocol = ProtocolConfig {
                task: task.clone(),
                strategies: strategies.clone(),
                n_seeds: config.n_seeds,
                root_seed: config.root_seed,
                search: search.clone(),
                train: train.clone(),
            };
            let results = run_protocol_with(&samples, &protocol, on_run)?;
            let summary = summarize(task, &results);
            Ok(SweepOutput::Single { results, summary })
        }
        ExperimentKind::Joint(joint) => {
            let joint = JointExperimentConfig {
                n_seeds: config.n_seeds,
                root_seed: config.root_seed,
                ..joint.clone()
            };
            Ok(SweepOutput::Joint(Box::new(run_joint_experiment(&joint)?)))
        }
    }
}
