//! Stratified holdout splitting.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};

/// Per-class train counts: floors of `n_j * fraction`, with the units still
/// missing from `round(N * fraction)` handed to the largest remainders. Ties
/// go to the larger class, then the higher grade.
pub fn stratified_counts(class_counts: &[usize], fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    for (class, &count) in class_counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count,
                needed: 2,
            });
        }
    }
    let total: usize = class_counts.iter().sum();
    let target = (total as f64 * fraction).round() as usize;
    let exact: Vec<f64> = class_counts.iter().map(|&n| n as f64 * fraction).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..class_counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra)
            .then(class_counts[b].cmp(&class_counts[a]))
            .then(b.cmp(&a))
    });
    let assigned: usize = counts.iter().sum();
    for &c in order.iter().take(target.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    // Keep at least one sample of every class on each side.
    for (c, n) in counts.iter_mut().enumerate() {
        *n = (*n).clamp(1, class_counts[c] - 1);
    }
    Ok(counts)
}

/// Splits sample indices into (train, holdout), preserving class
/// proportions. Both lists are sorted.
pub fn stratified_split(
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if labels.is_empty() {
        return Err(Error::Empty("cannot split an empty label list".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let present: Vec<usize> = (0..classes).filter(|&c| !members[c].is_empty()).collect();
    let sizes: Vec<usize> = present.iter().map(|&c| members[c].len()).collect();
    let counts = stratified_counts(&sizes, fraction).map_err(|e| match e {
        Error::ClassTooSmall {
            class,
            count,
            needed,
        } => Error::ClassTooSmall {
            class: present[class],
            count,
            needed,
        },
        other => other,
    })?;
    let mut rng = rng_for(seed, &[stream::SPLIT]);
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for (&c, &n_train) in present.iter().zip(&counts) {
        let mut idx = members[c].clone();
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..n_train]);
        holdout.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((train, holdout))
}
