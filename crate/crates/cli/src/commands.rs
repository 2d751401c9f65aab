use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use ordsoft::analysis::{analyze_tables, TableRun};
use ordsoft::experiment::{
    from_jsonl, run_sweep_with, to_jsonl, ExperimentConfig, SweepOutput, SCHEMA_VERSION,
};
use ordsoft::joint::ContingencyTable;
use ordsoft::model::ClassifierModel;
use ordsoft::protocol::summarize;
use ordsoft::rng::{derive_seed, stream};
use ordsoft::split::stratified_split;
use ordsoft::synth::{generate, generate_paired, PairedSynthSpec, SynthSpec};
use ordsoft::train::{fit, EpochRecord, TrainConfig};
use ordsoft::{
    build_confusion, build_target_matrix, ConfusionMatrix, LabelSpace, MetricReport, PredictionSet,
    SampleSet, SmoothingParams, Strategy,
};

use crate::io::{emit, open, read_text, to_json, write_atomic};
use crate::{
    AnalyzeArgs, EvaluateArgs, SoftlabelsArgs, SweepArgs, SynthArgs, TrainArgs, UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Parameter problems in flags are usage errors; everything else is a
/// runtime failure.
fn flag_error(e: ordsoft::Error) -> anyhow::Error {
    match e {
        ordsoft::Error::InvalidParameter(_) | ordsoft::Error::Parse(_) => usage(e.to_string()),
        other => other.into(),
    }
}

pub fn softlabels(args: SoftlabelsArgs) -> Result<()> {
    let s = &args.smoothing;
    let stray = [
        ("--alpha", s.alpha.is_some(), Strategy::Triangular),
        ("--p", s.p.is_some(), Strategy::Exponential),
        ("--concentration", s.concentration.is_some(), Strategy::Beta),
    ];
    for (flag, given, owner) in stray {
        if given && args.strategy != owner {
            return Err(usage(format!("{flag} only applies to --strategy {owner}")));
        }
    }
    let space = LabelSpace::new(args.classes).map_err(flag_error)?;
    let params = SmoothingParams {
        eta: s.eta,
        alpha: s.alpha,
        p: s.p,
        concentration: s.concentration,
    };
    let matrix = build_target_matrix(space, args.strategy, params).map_err(flag_error)?;
    let text = if args.plot_data {
        let mut out = String::from("true_grade,grade,probability\n");
        for (k, row) in matrix.rows().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{k},{j},{v}");
            }
        }
        out
    } else {
        matrix.to_csv()
    };
    emit(args.output.as_deref(), &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn synth(args: SynthArgs) -> Result<()> {
    if args.paired {
        let mut spec: PairedSynthSpec = match &args.config {
            Some(p) => read_json(p)?,
            None => PairedSynthSpec::default(),
        };
        if args.dim.is_some()
            || args.separation.is_some()
            || args.noise.is_some()
            || args.flip.is_some()
        {
            return Err(usage(
                "--dim/--separation/--noise/--flip do not apply to --paired",
            ));
        }
        if let Some(c) = args.classes {
            spec.classes_a = c;
            spec.a_weights = None;
        }
        if let Some(s) = args.seed {
            spec.seed = s;
        }
        if let Some(n) = args.n {
            spec.n = n;
        }
        let grades = generate_paired(&spec).map_err(flag_error)?;
        let mut buf = Vec::new();
        grades.write_csv(&mut buf)?;
        write_atomic(&args.output, &buf)?;
        if let Some(t) = &args.table {
            let table = grades.table()?;
            write_atomic(t, table.to_csv().as_bytes())?;
        }
        eprintln!("wrote {} pairs to {}", grades.len(), args.output.display());
        return Ok(());
    }
    if args.table.is_some() || args.n.is_some() {
        return Err(usage("--table and --n need --paired"));
    }
    let mut spec: SynthSpec = match &args.config {
        Some(p) => read_json(p)?,
        None => SynthSpec::benchmark(args.classes.unwrap_or(5), 0),
    };
    if let Some(c) = args.classes {
        if c != spec.classes {
            spec = SynthSpec {
                seed: spec.seed,
                ..SynthSpec::benchmark(c, 0)
            };
        }
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(d) = args.dim {
        spec.dim = d;
    }
    if let Some(s) = args.separation {
        spec.class_separation = s;
    }
    if let Some(s) = args.noise {
        spec.noise_sd = s;
    }
    if let Some(f) = args.flip {
        spec.adjacent_flip_prob = f;
    }
    let data = generate(&spec).map_err(flag_error)?;
    write_atomic(&args.output, data.to_csv_string().as_bytes())?;
    eprintln!("wrote {} samples to {}", data.len(), args.output.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    schema_version: u32,
    config: TrainConfig,
    train_samples: usize,
    validation_samples: usize,
    best_epoch: usize,
    best_validation_loss: f64,
    stopped_early: bool,
    validation_metrics: MetricReport,
    history: Vec<EpochRecord>,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut config: TrainConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = args.strategy {
        if s != config.strategy {
            config.params = SmoothingParams::default();
        }
        config.strategy = s;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.eta {
        config.params.eta = v;
    }
    if args.alpha.is_some() {
        config.params.alpha = args.alpha;
    }
    if args.p.is_some() {
        config.params.p = args.p;
    }
    if args.concentration.is_some() {
        config.params.concentration = args.concentration;
    }
    if let Some(e) = args.epochs {
        config.max_epochs = e;
        config.patience = config.patience.min(e);
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate().map_err(flag_error)?;

    let data = SampleSet::read_csv(open(&args.data)?, None)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let (fit_idx, val_idx) = stratified_split(
        data.labels(),
        1.0 - args.validation_fraction,
        derive_seed(config.seed, &[stream::VALIDATION]),
    )
    .map_err(flag_error)?;
    let (fit_set, val_set) = (data.subset(&fit_idx), data.subset(&val_idx));
    let outcome = fit(&fit_set, &val_set, &config)?;
    let preds = outcome.model.predict(&val_set)?;
    let report = TrainReport {
        schema_version: SCHEMA_VERSION,
        config,
        train_samples: fit_set.len(),
        validation_samples: val_set.len(),
        best_epoch: outcome.best_epoch,
        best_validation_loss: outcome.best_validation_loss,
        stopped_early: outcome.stopped_early,
        validation_metrics: MetricReport::from_predictions(&preds, data.space())?,
        history: outcome.history,
    };
    if let Some(path) = &args.model_out {
        let mut text = outcome.model.to_json()?;
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    emit(args.output.as_deref(), &to_json(&report)?)
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let text = read_text(&args.config)?;
    let mut config = ExperimentConfig::from_json(&text)
        .map_err(|e| usage(format!("{}: {e}", args.config.display())))?;
    if let Some(n) = args.seeds {
        config.n_seeds = n;
    }
    if let Some(s) = args.root_seed {
        config.root_seed = s;
    }
    if args.output_dir.is_some() {
        config.output_dir = args.output_dir.clone();
    }
    config.validate().map_err(flag_error)?;
    let out_dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    let run_dir = out_dir.join("runs");
    let persist = |run: &ordsoft::protocol::RunResult| -> ordsoft::Result<()> {
        let line = to_jsonl(std::slice::from_ref(run))?;
        let name = format!("{}-{}.json", run.strategy, run.seed);
        write_atomic(&run_dir.join(name), line.as_bytes())
            .map_err(|e| ordsoft::Error::Io(format!("{e:#}")))
    };
    match run_sweep_with(&config, persist)? {
        SweepOutput::Single { results, summary } => {
            write_atomic(&out_dir.join("runs.jsonl"), to_jsonl(&results)?.as_bytes())?;
            write_atomic(&out_dir.join("summary.json"), to_json(&summary)?.as_bytes())?;
            write_atomic(&out_dir.join("summary.csv"), summary.to_csv().as_bytes())?;
            print!("{}", summary.to_table());
        }
        SweepOutput::Joint(exp) => {
            write_atomic(&out_dir.join("truth.csv"), exp.truth.to_csv().as_bytes())?;
            for run in &exp.runs {
                let name = format!("{}-{}.csv", run.strategy, run.seed);
                write_atomic(
                    &out_dir.join("tables").join(name),
                    run.table.to_csv().as_bytes(),
                )?;
            }
            write_atomic(
                &out_dir.join("analysis.json"),
                to_json(&exp.report)?.as_bytes(),
            )?;
            print!("{}", analysis_table(&exp.report));
        }
    }
    Ok(())
}

fn analysis_table(report: &ordsoft::analysis::AnalysisReport) -> String {
    let mut out = format!("{:<12} {:>16} {:>16}\n", "strategy", "KLD", "MAE");
    for s in &report.strategies {
        let _ = writeln!(
            out,
            "{:<12} {:>16} {:>16}",
            s.strategy,
            s.kld.to_string(),
            s.table_mae.to_string()
        );
    }
    let _ = writeln!(
        out,
        "kruskal-wallis H = {:.4}, p = {:.3e}",
        report.kruskal_wallis.statistic, report.kruskal_wallis.p_value
    );
    for p in &report.pairwise {
        match &p.result {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "{} vs {}: p = {:.3e} (holm {:.3e})",
                    p.a,
                    p.b,
                    r.p_value,
                    p.p_holm.unwrap_or(f64::NAN)
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{} vs {}: {}",
                    p.a,
                    p.b,
                    p.error.as_deref().unwrap_or("untested")
                );
            }
        }
    }
    out
}

#[derive(Serialize)]
struct EvaluationReport {
    schema_version: u32,
    samples: usize,
    metrics: MetricReport,
    confusion: ConfusionMatrix,
}

fn evaluation(preds: &PredictionSet, space: LabelSpace) -> Result<String> {
    let report = EvaluationReport {
        schema_version: SCHEMA_VERSION,
        samples: preds.len(),
        metrics: MetricReport::from_predictions(preds, space)?,
        confusion: build_confusion(preds, space)?,
    };
    to_json(&report)
}

fn read_predictions(path: &Path) -> Result<(Vec<usize>, Vec<usize>)> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| anyhow!("{}: empty file", path.display()))?;
    if header.trim() != "true,predicted" {
        bail!("{}: expected header 'true,predicted'", path.display());
    }
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (i, line) in lines.enumerate() {
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("{} line {}: expected two columns", path.display(), i + 2))?;
        truth.push(a.trim().parse()?);
        pred.push(b.trim().parse()?);
    }
    Ok((truth, pred))
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let text = if let Some(model_path) = &args.model {
        let data_path = args
            .data
            .as_ref()
            .ok_or_else(|| usage("--model needs --data"))?;
        let model = ClassifierModel::from_json(&read_text(model_path)?)
            .with_context(|| format!("parsing {}", model_path.display()))?;
        let space = LabelSpace::new(model.classes())?;
        let data = SampleSet::read_csv(open(data_path)?, Some(space))?;
        if data.dim() != model.input_dim() {
            bail!(
                "model expects {} features, data has {}",
                model.input_dim(),
                data.dim()
            );
        }
        evaluation(&model.predict(&data)?, space)?
    } else if let Some(path) = &args.predictions {
        let classes = args
            .classes
            .ok_or_else(|| usage("--predictions needs --classes"))?;
        let space = LabelSpace::new(classes).map_err(flag_error)?;
        let (truth, pred) = read_predictions(path)?;
        let cm = ConfusionMatrix::from_labels(space, &truth, &pred)?;
        let report = EvaluationReport {
            schema_version: SCHEMA_VERSION,
            samples: truth.len(),
            metrics: MetricReport::from_confusion(&cm)?,
            confusion: cm,
        };
        to_json(&report)?
    } else if let Some(path) = &args.runs {
        let results = from_jsonl(&read_text(path)?)?;
        let task = results
            .first()
            .map_or("task", |r| r.task.as_str())
            .to_string();
        let summary = summarize(&task, &results);
        eprint!("{}", summary.to_table());
        to_json(&summary)?
    } else {
        return Err(usage(
            "give one of --model/--data, --predictions/--classes or --runs",
        ));
    };
    emit(args.output.as_deref(), &text)
}

/// `<strategy>-<seed>` from a table file name.
fn run_key(path: &Path) -> Result<(String, u64)> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("bad file name {}", path.display()))?;
    let (strategy, seed) = stem.rsplit_once('-').ok_or_else(|| {
        usage(format!(
            "{}: expected <strategy>-<seed>.csv",
            path.display()
        ))
    })?;
    let seed = seed.parse().map_err(|_| {
        usage(format!(
            "{}: seed '{seed}' is not an integer",
            path.display()
        ))
    })?;
    Ok((strategy.to_string(), seed))
}

fn table_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(usage("no predicted tables found"));
    }
    Ok(files)
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let truth = ContingencyTable::read_csv(open(&args.truth)?)
        .with_context(|| format!("reading {}", args.truth.display()))?;
    let mut runs = Vec::new();
    for file in table_files(&args.tables)? {
        let (strategy, seed) = run_key(&file)?;
        let table = ContingencyTable::read_csv(open(&file)?)
            .with_context(|| format!("reading {}", file.display()))?;
        runs.push(TableRun {
            strategy,
            seed,
            table,
        });
    }
    let report = analyze_tables(&truth, &runs, args.epsilon)?;
    eprint!("{}", analysis_table(&report));
    emit(args.output.as_deref(), &to_json(&report)?)
}
