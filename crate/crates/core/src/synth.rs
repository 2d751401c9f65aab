//! Synthetic ordinal data.
//!
//! [`generate`] places grade `k` at `k * class_separation` along a random
//! latent direction with isotropic Gaussian noise, then moves a fraction of
//! labels to an adjacent grade. [`generate_paired`] draws two associated
//! grades per sample with a concentrated low end and a spread-out high end.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::joint::ContingencyTable;
use crate::rng::{rng_for, stream};
use crate::space::LabelSpace;

/// Fields left out of a serialized spec take their benchmark values for the
/// given number of classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PartialSynthSpec")]
pub struct SynthSpec {
    pub classes: usize,
    pub n_per_class: Vec<usize>,
    pub dim: usize,
    pub class_separation: f64,
    pub noise_sd: f64,
    pub adjacent_flip_prob: f64,
    pub seed: u64,
}

#[derive(Deserialize)]
struct PartialSynthSpec {
    classes: Option<usize>,
    n_per_class: Option<Vec<usize>>,
    dim: Option<usize>,
    class_separation: Option<f64>,
    noise_sd: Option<f64>,
    adjacent_flip_prob: Option<f64>,
    seed: Option<u64>,
}

impl From<PartialSynthSpec> for SynthSpec {
    fn from(p: PartialSynthSpec) -> Self {
        let base = Self::benchmark(p.classes.unwrap_or(5), p.seed.unwrap_or(0));
        Self {
            n_per_class: p.n_per_class.unwrap_or(base.n_per_class),
            dim: p.dim.unwrap_or(base.dim),
            class_separation: p.class_separation.unwrap_or(base.class_separation),
            noise_sd: p.noise_sd.unwrap_or(base.noise_sd),
            adjacent_flip_prob: p.adjacent_flip_prob.unwrap_or(base.adjacent_flip_prob),
            ..base
        }
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::benchmark(5, 0)
    }
}

/// Class sizes of the five- and four-grade benchmark tasks.
pub const BENCHMARK_COUNTS_5: [usize; 5] = [146, 310, 207, 195, 112];
pub const BENCHMARK_COUNTS_4: [usize; 4] = [816, 372, 480, 502];

impl SynthSpec {
    /// The benchmark task with `classes` grades (4 or 5; other values fall
    /// back to 100 samples per grade).
    pub fn benchmark(classes: usize, seed: u64) -> Self {
        let n_per_class = match classes {
            5 => BENCHMARK_COUNTS_5.to_vec(),
            4 => BENCHMARK_COUNTS_4.to_vec(),
            _ => vec![100; classes],
        };
        Self {
            classes,
            n_per_class,
            dim: 8,
            class_separation: 1.0,
            noise_sd: 1.0,
            adjacent_flip_prob: 0.25,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        LabelSpace::new(self.classes)?;
        if self.n_per_class.len() != self.classes {
            return Err(Error::InvalidParameter(format!(
                "n_per_class has {} entries for {} classes",
                self.n_per_class.len(),
                self.classes
            )));
        }
        if let Some((class, &count)) = self.n_per_class.iter().enumerate().find(|(_, &n)| n < 2) {
            return Err(Error::ClassTooSmall {
                class,
                count,
                needed: 2,
            });
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::InvalidParameter(
                "class_separation must be positive".into(),
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(
                "noise_sd must be non-negative".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.adjacent_flip_prob) {
            return Err(Error::InvalidParameter(format!(
                "adjacent_flip_prob must lie in [0, 0.5), got {}",
                self.adjacent_flip_prob
            )));
        }
        Ok(())
    }
}

/// Uniform random unit vector.
fn unit_direction<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Moves `label` to a uniformly chosen neighbouring grade.
fn adjacent<R: Rng>(label: usize, classes: usize, rng: &mut R) -> usize {
    match label {
        0 => 1,
        l if l + 1 == classes => l - 1,
        l if rng.random_bool(0.5) => l - 1,
        l => l + 1,
    }
}

/// Flips each label to an adjacent grade with probability `prob`.
pub fn flip_adjacent(labels: &mut [usize], classes: usize, prob: f64, seed: u64) {
    let mut rng = rng_for(seed, &[stream::FLIP]);
    for l in labels.iter_mut() {
        if rng.random_bool(prob) {
            *l = adjacent(*l, classes, &mut rng);
        }
    }
}

/// Samples grouped by true class; labels in the result are the noisy ones.
pub fn generate(spec: &SynthSpec) -> Result<SampleSet> {
    spec.validate()?;
    let space = LabelSpace::new(spec.classes)?;
    let mut rng = rng_for(spec.seed, &[stream::SYNTH]);
    let direction = unit_direction(spec.dim, &mut rng);
    let total: usize = spec.n_per_class.iter().sum();
    let mut features = Vec::with_capacity(total * spec.dim);
    let mut labels = Vec::with_capacity(total);
    for (k, &n) in spec.n_per_class.iter().enumerate() {
        let centre = k as f64 * spec.class_separation;
        for _ in 0..n {
            features.extend(direction.iter().map(|u| {
                let z: f64 = rng.sample(StandardNormal);
                centre * u + spec.noise_sd * z
            }));
            labels.push(k);
        }
    }
    flip_adjacent(
        &mut labels,
        spec.classes,
        spec.adjacent_flip_prob,
        spec.seed,
    );
    SampleSet::new(space, spec.dim, features, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairedSynthSpec {
    pub classes_a: usize,
    pub classes_b: usize,
    pub n: usize,
    pub low_grade_concentration: f64,
    pub high_grade_spread: f64,
    /// Marginal weights of grade A; uniform when absent.
    pub a_weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for PairedSynthSpec {
    fn default() -> Self {
        Self {
            classes_a: 5,
            classes_b: 4,
            n: 968,
            low_grade_concentration: 0.8,
            high_grade_spread: 0.9,
            a_weights: Some(BENCHMARK_COUNTS_5.iter().map(|&c| c as f64).collect()),
            seed: 0,
        }
    }
}

impl PairedSynthSpec {
    pub fn validate(&self) -> Result<()> {
        LabelSpace::new(self.classes_a)?;
        LabelSpace::new(self.classes_b)?;
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        for (name, v) in [
            ("low_grade_concentration", self.low_grade_concentration),
            ("high_grade_spread", self.high_grade_spread),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        if let Some(w) = &self.a_weights {
            if w.len() != self.classes_a
                || w.iter().any(|x| !(x.is_finite() && *x >= 0.0))
                || w.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::InvalidParameter(format!(
                    "a_weights must be {} non-negative weights with a positive sum",
                    self.classes_a
                )));
            }
        }
        Ok(())
    }

    /// Distribution of grade B given grade A: a linear blend between a low
    /// row concentrated on B = 0 and a high row close to uniform.
    pub fn conditional(&self, a: usize) -> Vec<f64> {
        let jb = self.classes_b;
        let uniform = 1.0 / jb as f64;
        let c = self.low_grade_concentration;
        let h = self.high_grade_spread;
        let tau = a as f64 / (self.classes_a - 1) as f64;
        (0..jb)
            .map(|b| {
                let low = c * f64::from(u8::from(b == 0)) + (1.0 - c) * uniform;
                let high = h * uniform + (1.0 - h) * f64::from(u8::from(b == jb - 1));
                (1.0 - tau) * low + tau * high
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedGrades {
    pub classes_a: usize,
    pub classes_b: usize,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl PairedGrades {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn table(&self) -> Result<ContingencyTable> {
        ContingencyTable::from_pairs("a", "b", self.classes_a, self.classes_b, &self.a, &self.b)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "a,b")?;
        for (a, b) in self.a.iter().zip(&self.b) {
            writeln!(out, "{a},{b}")?;
        }
        Ok(())
    }
}

pub fn generate_paired(spec: &PairedSynthSpec) -> Result<PairedGrades> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, &[stream::SYNTH]);
    let weights = spec
        .a_weights
        .clone()
        .unwrap_or_else(|| vec![1.0; spec.classes_a]);
    let a_dist =
        WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let b_dists = (0..spec.classes_a)
        .map(|a| WeightedIndex::new(spec.conditional(a)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut a = Vec::with_capacity(spec.n);
    let mut b = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let ga = a_dist.sample(&mut rng);
        a.push(ga);
        b.push(b_dists[ga].sample(&mut rng));
    }
    Ok(PairedGrades {
        classes_a: spec.classes_a,
        classes_b: spec.classes_b,
        a,
        b,
    })
}

/// Feature vectors for paired grades: each grade moves the sample along its
/// own random direction, plus isotropic noise. Both tasks are read from the
/// same features.
pub fn embed_paired(
    grades: &PairedGrades,
    dim: usize,
    class_separation: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be >= 1".into()));
    }
    let mut rng = rng_for(seed, &[stream::SYNTH, 1]);
    let dir_a = unit_direction(dim, &mut rng);
    let dir_b = unit_direction(dim, &mut rng);
    let mut features = Vec::with_capacity(grades.len() * dim);
    for (&a, &b) in grades.a.iter().zip(&grades.b) {
        let (ca, cb) = (a as f64 * class_separation, b as f64 * class_separation);
        for (ua, ub) in dir_a.iter().zip(&dir_b) {
            let z: f64 = rng.sample(StandardNormal);
            features.push(ca * ua + cb * ub + noise_sd * z);
        }
    }
    Ok(features)
}
