//! Rank-based tests and a balanced two-way ANOVA.
//!
//! Kruskal-Wallis p-values use the chi-squared approximation. The Wilcoxon
//! signed-rank test is exact (full null distribution over sign flips,
//! midranks included) up to [`WILCOXON_EXACT_MAX_N`] non-zero differences
//! and falls back to the tie-corrected normal approximation above that.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{chi2_sf, f_sf, normal_cdf};

pub const WILCOXON_EXACT_MAX_N: usize = 25;
pub const WILCOXON_MIN_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    KruskalWallis,
    WilcoxonExact,
    WilcoxonNormal,
    AnovaF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    /// Sample sizes: group sizes for Kruskal-Wallis, `[pairs, non-zero
    /// differences]` for Wilcoxon, `[effect df, residual df]` for ANOVA.
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Midranks (1-based) and the sizes of tied groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum()
}

/// Kruskal-Wallis H test with tie correction.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidParameter(
            "Kruskal-Wallis needs at least 2 groups".into(),
        ));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::Empty(
            "a Kruskal-Wallis group has no observations".into(),
        ));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite observation".into()));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let (ranks, ties) = midranks(&pooled);
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let correction = 1.0 - tie_term(&ties) / (n * n * n - n);
    let df = (groups.len() - 1) as f64;
    if correction <= 0.0 {
        return Ok(TestResult {
            method: TestMethod::KruskalWallis,
            statistic: 0.0,
            p_value: 1.0,
            n: sizes,
            warning: Some("all observations are identical".into()),
        });
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for &len in &sizes {
        let r: f64 = ranks[offset..offset + len].iter().sum();
        sum += r * r / len as f64;
        offset += len;
    }
    let h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    Ok(TestResult {
        method: TestMethod::KruskalWallis,
        statistic: h,
        p_value: chi2_sf(h, df)?.clamp(0.0, 1.0),
        n: sizes,
        warning: None,
    })
}

/// Two-sided Wilcoxon signed-rank test on paired samples. The statistic is
/// `W+`, the rank sum of the positive differences `x - y`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "paired samples of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter("non-finite difference".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult {
            method: TestMethod::WilcoxonExact,
            statistic: 0.0,
            p_value: 1.0,
            n: vec![x.len(), 0],
            warning: Some("all paired differences are zero".into()),
        });
    }
    if n < WILCOXON_MIN_N {
        return Err(Error::InvalidParameter(format!(
            "Wilcoxon needs at least {WILCOXON_MIN_N} non-zero differences, got {n}"
        )));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let (method, p) = if n <= WILCOXON_EXACT_MAX_N {
        (
            TestMethod::WilcoxonExact,
            exact_signed_rank_p(&ranks, w_plus),
        )
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
        let dev = w_plus - mean;
        let z = if dev == 0.0 {
            0.0
        } else {
            (dev - 0.5 * dev.signum()) / var.sqrt()
        };
        (TestMethod::WilcoxonNormal, 2.0 * normal_cdf(-z.abs()))
    };
    Ok(TestResult {
        method,
        statistic: w_plus,
        p_value: p.clamp(0.0, 1.0),
        n: vec![x.len(), n],
        warning: None,
    })
}

/// Exact two-sided p-value for `W+` given the (mid)ranks of the non-zero
/// differences. Ranks are doubled so midranks become integers.
fn exact_signed_rank_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    // counts[s] = number of sign patterns whose doubled W+ equals s.
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let total: f64 = counts.iter().sum();
    let w = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w].iter().sum();
    let upper: f64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

/// Holm step-down adjustment; output is in input order.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let v = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(v);
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub source: String,
    pub ss: f64,
    pub df: usize,
    /// `None` when the residual variance is zero.
    pub f: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    /// First factor, second factor, interaction, residual.
    pub rows: Vec<AnovaRow>,
    pub ss_total: f64,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl AnovaTable {
    pub fn degrees_of_freedom(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.df).collect()
    }

    pub fn effect(&self, source: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.source == source)
    }

    /// The three F tests as [`TestResult`]s.
    pub fn test_results(&self) -> Vec<TestResult> {
        let resid_df = self.rows[3].df;
        self.rows[..3]
            .iter()
            .filter_map(|r| {
                Some(TestResult {
                    method: TestMethod::AnovaF,
                    statistic: r.f?,
                    p_value: r.p_value?,
                    n: vec![r.df, resid_df],
                    warning: None,
                })
            })
            .collect()
    }
}

/// Balanced two-way ANOVA with interaction. Factor levels can be any
/// ordered labels; every (a, b) cell must hold the same number of values.
pub fn two_way_anova<A: Ord + Clone, B: Ord + Clone>(
    values: &[f64],
    factor_a: &[A],
    factor_b: &[B],
) -> Result<AnovaTable> {
    if values.len() != factor_a.len() || values.len() != factor_b.len() {
        return Err(Error::ShapeMismatch(
            "values and factor labels differ in length".into(),
        ));
    }
    let levels_a: BTreeMap<A, usize> = level_index(factor_a);
    let levels_b: BTreeMap<B, usize> = level_index(factor_b);
    let (na, nb) = (levels_a.len(), levels_b.len());
    if na < 2 || nb < 2 {
        return Err(Error::InvalidParameter(
            "each factor needs at least 2 levels".into(),
        ));
    }
    let mut cells = vec![vec![Vec::new(); nb]; na];
    for ((v, a), b) in values.iter().zip(factor_a).zip(factor_b) {
        cells[levels_a[a]][levels_b[b]].push(*v);
    }
    let r = cells[0][0].len();
    if cells.iter().flatten().any(|c| c.len() != r) || r == 0 {
        return Err(Error::UnbalancedDesign(
            "every factor combination must have the same number of observations".into(),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let grand = mean(values);
    let cell_mean: Vec<Vec<f64>> = cells
        .iter()
        .map(|row| row.iter().map(|c| mean(c)).collect())
        .collect();
    let a_mean: Vec<f64> = cell_mean.iter().map(|row| mean(row)).collect();
    let b_mean: Vec<f64> = (0..nb)
        .map(|j| cell_mean.iter().map(|row| row[j]).sum::<f64>() / na as f64)
        .collect();
    let rf = r as f64;
    let ss_a = nb as f64 * rf * a_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = na as f64 * rf * b_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut ss_res = 0.0;
    for i in 0..na {
        for j in 0..nb {
            ss_ab += rf * (cell_mean[i][j] - a_mean[i] - b_mean[j] + grand).powi(2);
            ss_res += cells[i][j]
                .iter()
                .map(|v| (v - cell_mean[i][j]).powi(2))
                .sum::<f64>();
        }
    }
    let ss_total: f64 = values.iter().map(|v| (v - grand).powi(2)).sum();
    let df_a = na - 1;
    let df_b = nb - 1;
    let df_ab = df_a * df_b;
    let df_res = na * nb * (r - 1);

    let zero_variance = df_res == 0 || ss_res <= f64::EPSILON * ss_total.max(f64::MIN_POSITIVE);
    let ms_res = if df_res > 0 {
        ss_res / df_res as f64
    } else {
        f64::NAN
    };
    let effect = |source: &str, ss: f64, df: usize| -> Result<AnovaRow> {
        let (f, p) = if zero_variance {
            (None, None)
        } else {
            let f = (ss / df as f64) / ms_res;
            (Some(f), Some(f_sf(f, df as f64, df_res as f64)?))
        };
        Ok(AnovaRow {
            source: source.to_string(),
            ss,
            df,
            f,
            p_value: p,
        })
    };
    let rows = vec![
        effect("a", ss_a, df_a)?,
        effect("b", ss_b, df_b)?,
        effect("a:b", ss_ab, df_ab)?,
        AnovaRow {
            source: "residual".into(),
            ss: ss_res,
            df: df_res,
            f: None,
            p_value: None,
        },
    ];
    Ok(AnovaTable {
        rows,
        ss_total,
        replicates: r,
        warning: zero_variance
            .then(|| "zero residual variance: F statistics are undefined".to_string()),
    })
}

fn level_index<T: Ord + Clone>(labels: &[T]) -> BTreeMap<T, usize> {
    let mut map: BTreeMap<T, usize> = labels.iter().map(|l| (l.clone(), 0)).collect();
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}
