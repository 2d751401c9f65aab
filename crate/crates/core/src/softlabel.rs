//! Unimodal soft targets.
//!
//! Every builder returns row `k` of a target matrix: the distribution over
//! grades used as supervision for a sample whose annotated grade is `k`.
//! [`build_target_matrix`] blends each unimodal row with the one-hot label,
//! `(1 - eta) * onehot(k) + eta * row`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{LabelSpace, Strategy};
use crate::specfun::{binomial, RealInterval};

/// Tolerance on the sum of a probability vector handed to the blend.
pub const INPUT_SUM_TOL: f64 = 1e-6;

/// Strategy parameters. Only the field that belongs to the chosen strategy
/// is read; `eta` applies to every soft strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<f64>,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            eta: 1.0,
            alpha: None,
            p: None,
            concentration: None,
        }
    }
}

impl SmoothingParams {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta,
            ..Self::default()
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn concentration(mut self, s: f64) -> Self {
        self.concentration = Some(s);
        self
    }

    pub fn validate(&self, strategy: Strategy) -> Result<()> {
        check_eta(self.eta)?;
        match strategy {
            Strategy::Nominal | Strategy::Binomial => Ok(()),
            Strategy::Triangular => check_alpha(self.required(self.alpha, "alpha")?),
            Strategy::Exponential => check_positive("p", self.required(self.p, "p")?),
            Strategy::Beta => check_positive(
                "concentration",
                self.required(self.concentration, "concentration")?,
            ),
        }
    }

    fn required(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| Error::InvalidParameter(format!("missing parameter '{name}'")))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "eta = {eta} outside [0, 1]"
        )))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha = {alpha} outside (0, 0.5)"
        )))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {v} must be positive"
        )))
    }
}

fn check_grade(classes: usize, k: usize) -> Result<()> {
    LabelSpace::new(classes)?.check(k)
}

pub fn one_hot(classes: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[k] = 1.0;
    v
}

/// Discrete triangular mass: `alpha` on each existing neighbour, the rest on
/// `k`.
pub fn triangular_row(classes: usize, k: usize, alpha: f64) -> Result<Vec<f64>> {
    check_grade(classes, k)?;
    check_alpha(alpha)?;
    let mut row = vec![0.0; classes];
    let mut centre = 1.0;
    if k > 0 {
        row[k - 1] = alpha;
        centre -= alpha;
    }
    if k + 1 < classes {
        row[k + 1] = alpha;
        centre -= alpha;
    }
    row[k] = centre;
    Ok(row)
}

/// Binomial(J-1, t) mass with `t = k / (J-1)`.
pub fn binomial_row(classes: usize, k: usize) -> Result<Vec<f64>> {
    check_grade(classes, k)?;
    let n = classes - 1;
    if k == 0 || k == n {
        return Ok(one_hot(classes, k));
    }
    let t = k as f64 / n as f64;
    (0..classes)
        .map(|j| {
            Ok(binomial(n as u64, j as u64)? * t.powi(j as i32) * (1.0 - t).powi((n - j) as i32))
        })
        .collect()
}

/// Softmax of `-|j - k|^p`.
pub fn exponential_row(classes: usize, k: usize, p: f64) -> Result<Vec<f64>> {
    check_grade(classes, k)?;
    check_positive("p", p)?;
    let raw: Vec<f64> = (0..classes)
        .map(|j| (-(j.abs_diff(k) as f64).powf(p)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / z).collect())
}

/// Beta shape parameters for grade `k`: mode at the segment midpoint
/// `(2k + 1) / 2J`, concentration `s`.
pub fn beta_shape(classes: usize, k: usize, concentration: f64) -> (f64, f64) {
    let mode = (2 * k + 1) as f64 / (2 * classes) as f64;
    (
        1.0 + concentration * mode,
        1.0 + concentration * (1.0 - mode),
    )
}

/// Beta density integrated over the `J` equal segments of the unit interval.
pub fn beta_row(classes: usize, k: usize, concentration: f64) -> Result<Vec<f64>> {
    check_grade(classes, k)?;
    check_positive("concentration", concentration)?;
    let (a, b) = beta_shape(classes, k, concentration);
    let j = classes as f64;
    (0..classes)
        .map(|seg| {
            RealInterval::new(seg as f64 / j, (seg + 1) as f64 / j)?
                .beta_mass(a, b)
                .map(|m| m.max(0.0))
        })
        .collect()
}

/// Nominal label smoothing: one-hot blended with the uniform distribution.
pub fn nominal_smooth_row(classes: usize, k: usize, lambda: f64) -> Result<Vec<f64>> {
    check_grade(classes, k)?;
    check_eta(lambda)?;
    let u = lambda / classes as f64;
    Ok((0..classes)
        .map(|j| if j == k { 1.0 - lambda + u } else { u })
        .collect())
}

/// `(1 - eta) * onehot(k) + eta * soft`.
pub fn blend_ordinal_row(k: usize, soft: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_eta(eta)?;
    check_grade(soft.len(), k)?;
    let s: f64 = soft.iter().sum();
    if (s - 1.0).abs() > INPUT_SUM_TOL || soft.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "soft row is not a probability vector (sum {s})"
        )));
    }
    Ok(soft
        .iter()
        .enumerate()
        .map(|(j, &v)| (1.0 - eta) * if j == k { 1.0 } else { 0.0 } + eta * v)
        .collect())
}

fn strategy_row(
    strategy: Strategy,
    classes: usize,
    k: usize,
    params: &SmoothingParams,
) -> Result<Vec<f64>> {
    match strategy {
        Strategy::Nominal => Ok(one_hot(classes, k)),
        Strategy::Binomial => binomial_row(classes, k),
        Strategy::Triangular => triangular_row(classes, k, params.alpha.unwrap_or_default()),
        Strategy::Exponential => exponential_row(classes, k, params.p.unwrap_or_default()),
        Strategy::Beta => beta_row(classes, k, params.concentration.unwrap_or_default()),
    }
}

/// Row-stochastic `J x J` supervision matrix; row `k` is the target for
/// samples of grade `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTargetMatrix {
    rows: Vec<Vec<f64>>,
    strategy: Strategy,
    params: SmoothingParams,
}

impl SoftTargetMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn classes(&self) -> usize {
        self.rows.len()
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn params(&self) -> &SmoothingParams {
        &self.params
    }

    /// One-hot targets.
    pub fn identity(space: LabelSpace) -> Self {
        let j = space.classes();
        Self {
            rows: (0..j).map(|k| one_hot(j, k)).collect(),
            strategy: Strategy::Nominal,
            params: SmoothingParams::with_eta(0.0),
        }
    }

    /// CSV with one row per true grade, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Checks the row-stochastic, unimodal and mode-at-diagonal properties.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        for (k, row) in self.rows.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol || row.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidParameter(format!("row {k} sums to {s}")));
            }
            if !is_unimodal_at(row, k) {
                return Err(Error::InvalidParameter(format!(
                    "row {k} is not unimodal at {k}"
                )));
            }
            if crate::confusion::argmax(row) != k {
                return Err(Error::InvalidParameter(format!(
                    "row {k} has its mode elsewhere"
                )));
            }
        }
        Ok(())
    }
}

/// Mass never increases when stepping away from `k` on either side.
pub fn is_unimodal_at(row: &[f64], k: usize) -> bool {
    (k + 1..row.len()).all(|j| row[j] <= row[j - 1]) && (0..k).all(|j| row[j] <= row[j + 1])
}

pub fn build_target_matrix(
    space: LabelSpace,
    strategy: Strategy,
    params: SmoothingParams,
) -> Result<SoftTargetMatrix> {
    if strategy == Strategy::Nominal {
        return Ok(SoftTargetMatrix::identity(space));
    }
    params.validate(strategy)?;
    let j = space.classes();
    let rows = (0..j)
        .map(|k| blend_ordinal_row(k, &strategy_row(strategy, j, k, &params)?, params.eta))
        .collect::<Result<Vec<_>>>()?;
    Ok(SoftTargetMatrix {
        rows,
        strategy,
        params,
    })
}

/// Nominal label smoothing towards the uniform distribution. Not unimodal in
/// the ordinal sense; kept for ablations.
pub fn nominal_smoothed_matrix(space: LabelSpace, lambda: f64) -> Result<SoftTargetMatrix> {
    let j = space.classes();
    let rows = (0..j)
        .map(|k| nominal_smooth_row(j, k, lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(SoftTargetMatrix {
        rows,
        strategy: Strategy::Nominal,
        params: SmoothingParams::with_eta(lambda),
    })
}
