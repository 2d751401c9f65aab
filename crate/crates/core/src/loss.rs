//! Softmax output layer and soft-target cross-entropy.

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    for v in values.iter_mut() {
        *v /= z;
    }
}

fn check_target(target: &[f64]) -> Result<()> {
    let s: f64 = target.iter().sum();
    if (s - 1.0).abs() > 1e-6 || target.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "target is not a probability vector (sum {s})"
        )));
    }
    Ok(())
}

/// `-sum_j target[j] * ln(max(probs[j], 1e-12))`.
pub fn soft_ce(probs: &[f64], target: &[f64]) -> Result<f64> {
    if probs.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities vs {} targets",
            probs.len(),
            target.len()
        )));
    }
    check_target(target)?;
    Ok(soft_ce_unchecked(probs, target))
}

pub(crate) fn soft_ce_unchecked(probs: &[f64], target: &[f64]) -> f64 {
    probs
        .iter()
        .zip(target)
        .filter(|(_, &t)| t > 0.0)
        .map(|(&p, &t)| -t * floored_ln(p))
        .sum()
}

// Unlike f64::max, keeps NaN so divergence stays visible.
fn floored_ln(p: f64) -> f64 {
    if p < PROB_FLOOR {
        PROB_FLOOR.ln()
    } else {
        p.ln()
    }
}

/// Shannon entropy in nats.
pub fn entropy(dist: &[f64]) -> f64 {
    dist.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Gradient of `soft_ce(softmax(logits), target)` with respect to the logits:
/// `softmax(logits) - target`.
pub fn soft_ce_grad(logits: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if logits.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} logits vs {} targets",
            logits.len(),
            target.len()
        )));
    }
    check_target(target)?;
    let mut g = softmax(logits);
    for (gi, t) in g.iter_mut().zip(target) {
        *gi -= t;
    }
    Ok(g)
}

/// Mean soft cross-entropy over a batch of (probability, target) rows.
pub fn mean_soft_ce<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in pairs {
        sum += soft_ce(p, t)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("batch".into()));
    }
    Ok(sum / n as f64)
}
