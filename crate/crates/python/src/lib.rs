use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use ordsoft::experiment::{run_sweep, to_jsonl, ExperimentConfig, SweepOutput};
use ordsoft::joint::{self, JointDistribution};
use ordsoft::model::ClassifierModel;
use ordsoft::split;
use ordsoft::stats;
use ordsoft::synth::{self, PairedSynthSpec, SynthSpec};
use ordsoft::train::{fit, TrainConfig};
use ordsoft::{
    build_target_matrix, ConfusionMatrix, Error, LabelSpace, MetricReport, SampleSet,
    SmoothingParams,
};

fn err(e: Error) -> PyErr {
    match e {
        Error::Diverged { .. } | Error::NoConvergence { .. } | Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (_, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &serde_json::to_value(value).map_err(json_err)?)
}

fn space(classes: usize) -> PyResult<LabelSpace> {
    LabelSpace::new(classes).map_err(err)
}

fn strategy(name: &str) -> PyResult<ordsoft::Strategy> {
    name.parse()
        .map_err(|e: Error| PyValueError::new_err(e.to_string()))
}

fn samples(
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: Option<usize>,
) -> PyResult<SampleSet> {
    let classes = match classes {
        Some(c) => c,
        None => labels.iter().max().map_or(0, |m| m + 1),
    };
    SampleSet::from_rows(space(classes)?, &features, labels).map_err(err)
}

/// Soft target matrix, one row per true grade.
#[pyfunction]
#[pyo3(signature = (classes, strategy_name, eta=1.0, alpha=None, p=None, concentration=None))]
fn soft_labels(
    classes: usize,
    strategy_name: &str,
    eta: f64,
    alpha: Option<f64>,
    p: Option<f64>,
    concentration: Option<f64>,
) -> PyResult<Vec<Vec<f64>>> {
    let params = SmoothingParams {
        eta,
        alpha,
        p,
        concentration,
    };
    let m = build_target_matrix(space(classes)?, strategy(strategy_name)?, params).map_err(err)?;
    Ok(m.rows().to_vec())
}

/// Ordinal metrics for paired true and predicted grades.
#[pyfunction]
fn metrics<'py>(
    py: Python<'py>,
    truth: Vec<usize>,
    predicted: Vec<usize>,
    classes: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cm = ConfusionMatrix::from_labels(space(classes)?, &truth, &predicted).map_err(err)?;
    serialize(py, &MetricReport::from_confusion(&cm).map_err(err)?)
}

fn distribution(probs: Vec<Vec<f64>>) -> PyResult<JointDistribution> {
    let total: f64 = probs.iter().flatten().sum();
    if total <= 0.0 {
        return Err(PyValueError::new_err("table has no mass"));
    }
    JointDistribution::from_probs(
        probs
            .iter()
            .map(|r| r.iter().map(|v| v / total).collect())
            .collect(),
    )
    .map_err(err)
}

/// KL divergence between two tables; counts are normalised first.
#[pyfunction]
#[pyo3(signature = (p, q, epsilon=joint::DEFAULT_KLD_EPSILON))]
fn kld(p: Vec<Vec<f64>>, q: Vec<Vec<f64>>, epsilon: f64) -> PyResult<f64> {
    joint::kld(&distribution(p)?, &distribution(q)?, epsilon).map_err(err)
}

/// `P - Q` after normalising both tables.
#[pyfunction]
fn residuals(p: Vec<Vec<f64>>, q: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(joint::residuals(&distribution(p)?, &distribution(q)?)
        .map_err(err)?
        .residuals)
}

#[pyfunction]
fn stratified_split(
    labels: Vec<usize>,
    fraction: f64,
    seed: u64,
) -> PyResult<(Vec<usize>, Vec<usize>)> {
    split::stratified_split(&labels, fraction, seed).map_err(err)
}

#[pyfunction]
fn wilcoxon<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    serialize(py, &stats::wilcoxon_signed_rank(&x, &y).map_err(err)?)
}

#[pyfunction]
fn kruskal_wallis<'py>(py: Python<'py>, groups: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    serialize(py, &stats::kruskal_wallis(&groups).map_err(err)?)
}

/// Synthetic ordinal dataset: `(features, labels)`. `spec` is a JSON object
/// with the fields of the sweep config's `synth` block.
#[pyfunction]
#[pyo3(signature = (classes=5, seed=0, spec=None))]
fn synth_dataset(
    classes: usize,
    seed: u64,
    spec: Option<&str>,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let spec = match spec {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => SynthSpec::benchmark(classes, seed),
    };
    let data = synth::generate(&spec).map_err(err)?;
    let rows = (0..data.len()).map(|i| data.row(i).to_vec()).collect();
    Ok((rows, data.labels().to_vec()))
}

/// Paired grades `(a, b)` from the joint generator.
#[pyfunction]
#[pyo3(signature = (n=968, seed=0))]
fn synth_paired(n: usize, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let spec = PairedSynthSpec {
        n,
        seed,
        ..PairedSynthSpec::default()
    };
    let g = synth::generate_paired(&spec).map_err(err)?;
    Ok((g.a, g.b))
}

#[pyclass(frozen)]
struct Model {
    inner: ClassifierModel,
    #[pyo3(get)]
    best_epoch: usize,
    #[pyo3(get)]
    best_validation_loss: f64,
    #[pyo3(get)]
    stopped_early: bool,
}

#[pymethods]
impl Model {
    fn predict_proba(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let dim = self.inner.input_dim();
        if let Some(row) = features.iter().find(|r| r.len() != dim) {
            return Err(PyValueError::new_err(format!(
                "expected {dim} features, got {}",
                row.len()
            )));
        }
        Ok(features
            .iter()
            .map(|r| self.inner.predict_proba(r))
            .collect())
    }

    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        Ok(self
            .predict_proba(features)?
            .iter()
            .map(|p| ordsoft::confusion::argmax(p))
            .collect())
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Model> {
        Ok(Model {
            inner: ClassifierModel::from_json(text).map_err(err)?,
            best_epoch: 0,
            best_validation_loss: f64::NAN,
            stopped_early: false,
        })
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }
}

/// Trains on `(features, labels)` with early stopping on `validation`.
/// `config` is a JSON training config; missing fields take their defaults.
#[pyfunction]
#[pyo3(signature = (features, labels, val_features, val_labels, config=None, classes=None))]
fn train(
    py: Python<'_>,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    val_features: Vec<Vec<f64>>,
    val_labels: Vec<usize>,
    config: Option<&str>,
    classes: Option<usize>,
) -> PyResult<Model> {
    let config: TrainConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => TrainConfig::default(),
    };
    let classes = classes.or_else(|| labels.iter().chain(&val_labels).max().map(|m| m + 1));
    let data = samples(features, labels, classes)?;
    let validation = samples(val_features, val_labels, classes)?;
    let outcome = py
        .detach(|| fit(&data, &validation, &config))
        .map_err(err)?;
    Ok(Model {
        inner: outcome.model,
        best_epoch: outcome.best_epoch,
        best_validation_loss: outcome.best_validation_loss,
        stopped_early: outcome.stopped_early,
    })
}

/// Runs a sweep from a JSON config. Returns the results as JSON lines plus
/// the summary for single-task sweeps, or the analysis report for joint ones.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, config: &str) -> PyResult<(String, Bound<'py, PyAny>)> {
    let config = ExperimentConfig::from_json(config).map_err(err)?;
    match py.detach(|| run_sweep(&config)).map_err(err)? {
        SweepOutput::Single { results, summary } => {
            Ok((to_jsonl(&results).map_err(err)?, serialize(py, &summary)?))
        }
        SweepOutput::Joint(exp) => Ok((String::new(), serialize(py, &exp.report)?)),
    }
}

#[pymodule]
fn ordsoft_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SCHEMA_VERSION", ordsoft::SCHEMA_VERSION)?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(soft_labels, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(kld, m)?)?;
    m.add_function(wrap_pyfunction!(residuals, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(kruskal_wallis, m)?)?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(synth_paired, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
