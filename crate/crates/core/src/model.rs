//! Small softmax classifiers: a linear model and a one-hidden-layer tanh
//! perceptron. Parameters live in one flat vector so the optimiser and the
//! gradient checks can treat them uniformly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::confusion::PredictionSet;
use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::loss::{soft_ce_unchecked, softmax_in_place};
use crate::rng::{rng_for, stream};
use crate::softlabel::SoftTargetMatrix;

pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Linear,
    Mlp { hidden: usize },
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::Mlp {
            hidden: DEFAULT_HIDDEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    architecture: Architecture,
    input_dim: usize,
    classes: usize,
    shift: Vec<f64>,
    scale: Vec<f64>,
    params: Vec<f64>,
}

/// Reusable per-sample buffers.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    x: Vec<f64>,
    hidden: Vec<f64>,
    out: Vec<f64>,
    grad_hidden: Vec<f64>,
}

impl ClassifierModel {
    /// Seeded initialisation: weights uniform in `±1/sqrt(fan_in)`, zero
    /// biases.
    pub fn new(
        architecture: Architecture,
        input_dim: usize,
        classes: usize,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "model needs input_dim >= 1 and classes >= 2 (got {input_dim}, {classes})"
            )));
        }
        if let Architecture::Mlp { hidden: 0 } = architecture {
            return Err(Error::InvalidParameter("hidden width must be >= 1".into()));
        }
        let mut model = Self {
            architecture,
            input_dim,
            classes,
            shift: vec![0.0; input_dim],
            scale: vec![1.0; input_dim],
            params: Vec::new(),
        };
        let mut rng = rng_for(seed, &[stream::INIT]);
        let mut params = Vec::with_capacity(model.param_count());
        let mut layer = |params: &mut Vec<f64>, fan_in: usize, fan_out: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        };
        match architecture {
            Architecture::Linear => layer(&mut params, input_dim, classes),
            Architecture::Mlp { hidden } => {
                layer(&mut params, input_dim, hidden);
                layer(&mut params, hidden, classes);
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn param_count(&self) -> usize {
        match self.architecture {
            Architecture::Linear => (self.input_dim + 1) * self.classes,
            Architecture::Mlp { hidden } => {
                (self.input_dim + 1) * hidden + (hidden + 1) * self.classes
            }
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Standardises inputs with the per-feature mean and standard deviation
    /// of `data`.
    pub fn fit_standardizer(&mut self, data: &SampleSet) {
        let n = data.len().max(1) as f64;
        let d = self.input_dim;
        let mut mean = vec![0.0; d];
        for i in 0..data.len() {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.len() {
            for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        self.scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        self.shift = mean;
    }

    /// Forward pass into `scratch.out` (probabilities); `scratch.hidden`
    /// keeps the activations for the backward pass.
    pub(crate) fn forward(&self, features: &[f64], scratch: &mut Scratch) {
        let d = self.input_dim;
        let j = self.classes;
        scratch.x.clear();
        scratch.x.extend(
            features
                .iter()
                .zip(&self.shift)
                .zip(&self.scale)
                .map(|((v, m), s)| (v - m) / s),
        );
        scratch.out.clear();
        scratch.out.resize(j, 0.0);
        match self.architecture {
            Architecture::Linear => {
                let (w, b) = self.params.split_at(d * j);
                dense(w, b, &scratch.x, &mut scratch.out);
            }
            Architecture::Mlp { hidden } => {
                let (w1, rest) = self.params.split_at(d * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden * j);
                scratch.hidden.clear();
                scratch.hidden.resize(hidden, 0.0);
                dense(w1, b1, &scratch.x, &mut scratch.hidden);
                scratch.hidden.iter_mut().for_each(|h| *h = h.tanh());
                dense(w2, b2, &scratch.hidden, &mut scratch.out);
            }
        }
        softmax_in_place(&mut scratch.out);
    }

    /// Adds the gradient of the soft cross-entropy for one sample to `grad`
    /// and returns that sample's loss.
    pub(crate) fn accumulate(
        &self,
        features: &[f64],
        target: &[f64],
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> f64 {
        self.forward(features, scratch);
        let loss = soft_ce_unchecked(&scratch.out, target);
        // dL/dlogits = p - t, stored back into out.
        for (o, t) in scratch.out.iter_mut().zip(target) {
            *o -= t;
        }
        let d = self.input_dim;
        let j = self.classes;
        match self.architecture {
            Architecture::Linear => {
                let (gw, gb) = grad.split_at_mut(d * j);
                outer_add(gw, gb, &scratch.out, &scratch.x);
            }
            Architecture::Mlp { hidden } => {
                let (gw1, rest) = grad.split_at_mut(d * hidden);
                let (gb1, rest) = rest.split_at_mut(hidden);
                let (gw2, gb2) = rest.split_at_mut(hidden * j);
                outer_add(gw2, gb2, &scratch.out, &scratch.hidden);
                let w2 = &self.params[(d + 1) * hidden..(d + 1) * hidden + hidden * j];
                scratch.grad_hidden.clear();
                scratch.grad_hidden.resize(hidden, 0.0);
                for (c, g) in scratch.out.iter().enumerate() {
                    let row = &w2[c * hidden..(c + 1) * hidden];
                    for (gh, w) in scratch.grad_hidden.iter_mut().zip(row) {
                        *gh += g * w;
                    }
                }
                for (gh, h) in scratch.grad_hidden.iter_mut().zip(&scratch.hidden) {
                    *gh *= 1.0 - h * h;
                }
                outer_add(gw1, gb1, &scratch.grad_hidden, &scratch.x);
            }
        }
        loss
    }

    pub fn predict_proba(&self, features: &[f64]) -> Vec<f64> {
        let mut scratch = Scratch::default();
        self.forward(features, &mut scratch);
        scratch.out
    }

    /// Mean soft cross-entropy of `data` against its target rows.
    pub fn mean_loss(&self, data: &SampleSet, targets: &SoftTargetMatrix) -> f64 {
        let mut scratch = Scratch::default();
        let mut acc = 0.0;
        for i in 0..data.len() {
            self.forward(data.row(i), &mut scratch);
            acc += soft_ce_unchecked(&scratch.out, targets.row(data.labels()[i]));
        }
        acc / data.len().max(1) as f64
    }

    pub fn predict(&self, data: &SampleSet) -> Result<PredictionSet> {
        let probs = (0..data.len())
            .map(|i| self.predict_proba(data.row(i)))
            .collect();
        PredictionSet::from_probs(data.labels().to_vec(), probs)
    }
}

/// `out = W x + b` with `W` row-major `out.len() x x.len()`.
fn dense(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n).zip(b)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `gW += g x^T`, `gb += g`.
fn outer_add(gw: &mut [f64], gb: &mut [f64], g: &[f64], x: &[f64]) {
    let n = x.len();
    for ((row, gbi), &gi) in gw.chunks_exact_mut(n).zip(gb.iter_mut()).zip(g) {
        *gbi += gi;
        for (w, xv) in row.iter_mut().zip(x) {
            *w += gi * xv;
        }
    }
}

/// On-disk form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub model: ClassifierModel,
}

impl ClassifierModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            schema_version: crate::SCHEMA_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.schema_version != crate::SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema_version {}",
                file.schema_version
            )));
        }
        Ok(file.model)
    }
}
