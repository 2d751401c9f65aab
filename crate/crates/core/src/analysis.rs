//! Comparison of predicted contingency tables against a ground-truth table:
//! per-run divergence and MAE, mean residuals per strategy, and the
//! Kruskal-Wallis / pairwise Wilcoxon battery over strategies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{
    kld, normalise, residuals, table_mae, ContingencyTable, JointDistribution, ResidualMatrix,
};
use crate::protocol::MeanStd;
use crate::stats::{holm_adjust, kruskal_wallis, wilcoxon_signed_rank, TestResult};

#[derive(Debug, Clone, PartialEq)]
pub struct TableRun {
    pub strategy: String,
    pub seed: u64,
    pub table: ContingencyTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub strategy: String,
    pub seed: u64,
    pub kld: f64,
    pub table_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub runs: usize,
    pub kld: MeanStd,
    pub table_mae: MeanStd,
    /// Ground truth minus the mean predicted distribution.
    pub residuals: ResidualMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    /// Seeds present for both strategies.
    pub pairs: usize,
    pub mean_difference: f64,
    pub result: Option<TestResult>,
    pub p_holm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub epsilon: f64,
    pub ground_truth: JointDistribution,
    pub runs: Vec<RunScore>,
    pub strategies: Vec<StrategySummary>,
    pub kruskal_wallis: TestResult,
    pub pairwise: Vec<PairwiseTest>,
}

impl AnalysisReport {
    pub fn strategy(&self, name: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == name)
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&PairwiseTest> {
        self.pairwise
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

/// Scores every run and tests KLD differences between strategies. Runs are
/// paired across strategies by seed. Strategies keep first-seen order.
pub fn analyze_tables(
    truth: &ContingencyTable,
    runs: &[TableRun],
    epsilon: f64,
) -> Result<AnalysisReport> {
    let p = normalise(truth)?;
    let mut order: Vec<String> = Vec::new();
    let mut by_strategy: BTreeMap<String, Vec<(u64, f64, f64, JointDistribution)>> =
        BTreeMap::new();
    let mut scores = Vec::with_capacity(runs.len());
    for run in runs {
        if run.table.shape() != truth.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{} seed {}: table is {:?}, ground truth is {:?}",
                run.strategy,
                run.seed,
                run.table.shape(),
                truth.shape()
            )));
        }
        let q = normalise(&run.table)?;
        let d = kld(&p, &q, epsilon)?;
        let m = table_mae(&p, &q)?;
        scores.push(RunScore {
            strategy: run.strategy.clone(),
            seed: run.seed,
            kld: d,
            table_mae: m,
        });
        if !order.contains(&run.strategy) {
            order.push(run.strategy.clone());
        }
        let entry = by_strategy.entry(run.strategy.clone()).or_default();
        if entry.iter().any(|e| e.0 == run.seed) {
            return Err(Error::InvalidParameter(format!(
                "duplicate run {} seed {}",
                run.strategy, run.seed
            )));
        }
        entry.push((run.seed, d, m, q));
    }
    if order.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 strategies to compare, got {}",
            order.len()
        )));
    }

    let mut strategies = Vec::new();
    for name in &order {
        let entries = &by_strategy[name];
        let kl: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let mae: Vec<f64> = entries.iter().map(|e| e.2).collect();
        let qs: Vec<JointDistribution> = entries.iter().map(|e| e.3.clone()).collect();
        let mean_q = JointDistribution::mean(&qs)?;
        strategies.push(StrategySummary {
            strategy: name.clone(),
            runs: entries.len(),
            kld: MeanStd::of(&kl).expect("non-empty"),
            table_mae: MeanStd::of(&mae).expect("non-empty"),
            residuals: residuals(&p, &mean_q)?,
        });
    }

    let groups: Vec<Vec<f64>> = order
        .iter()
        .map(|n| by_strategy[n].iter().map(|e| e.1).collect())
        .collect();
    let kruskal_wallis = kruskal_wallis(&groups)?;

    let mut pairwise = Vec::new();
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            let kb: BTreeMap<u64, f64> = by_strategy[b].iter().map(|e| (e.0, e.1)).collect();
            let mut seeds: Vec<u64> = by_strategy[a]
                .iter()
                .map(|e| e.0)
                .filter(|s| kb.contains_key(s))
                .collect();
            seeds.sort_unstable();
            let ka: BTreeMap<u64, f64> = by_strategy[a].iter().map(|e| (e.0, e.1)).collect();
            let x: Vec<f64> = seeds.iter().map(|s| ka[s]).collect();
            let y: Vec<f64> = seeds.iter().map(|s| kb[s]).collect();
            let mean_difference = if seeds.is_empty() {
                0.0
            } else {
                x.iter().zip(&y).map(|(u, v)| u - v).sum::<f64>() / seeds.len() as f64
            };
            let (result, error) = match wilcoxon_signed_rank(&x, &y) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            pairwise.push(PairwiseTest {
                a: a.clone(),
                b: b.clone(),
                pairs: seeds.len(),
                mean_difference,
                result,
                p_holm: None,
                error,
            });
        }
    }
    let tested: Vec<usize> = (0..pairwise.len())
        .filter(|&i| pairwise[i].result.is_some())
        .collect();
    let raw: Vec<f64> = tested
        .iter()
        .map(|&i| pairwise[i].result.as_ref().map_or(1.0, |r| r.p_value))
        .collect();
    for (&i, adj) in tested.iter().zip(holm_adjust(&raw)) {
        pairwise[i].p_holm = Some(adj);
    }

    Ok(AnalysisReport {
        schema_version: crate::SCHEMA_VERSION,
        epsilon,
        ground_truth: p,
        runs: scores,
        strategies,
        kruskal_wallis,
        pairwise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::DEFAULT_KLD_EPSILON;
    use crate::stats::TestMethod;

    fn truth() -> ContingencyTable {
        ContingencyTable::new("kl", "cppd", vec![vec![40, 5], vec![10, 25], vec![5, 15]]).unwrap()
    }

    fn perturbed(shift: u64, seed: u64) -> ContingencyTable {
        let mut c = truth().counts().to_vec();
        c[0][0] += shift + seed % 3;
        c[2][1] += seed % 2;
        ContingencyTable::new("kl", "cppd", c).unwrap()
    }

    #[test]
    fn identical_tables_are_degenerate() {
        let runs: Vec<TableRun> = ["a", "b"]
            .iter()
            .flat_map(|s| {
                (0..20).map(move |seed| TableRun {
                    strategy: s.to_string(),
                    seed,
                    table: truth(),
                })
            })
            .collect();
        let r = analyze_tables(&truth(), &runs, DEFAULT_KLD_EPSILON).unwrap();
        assert!(r.runs.iter().all(|s| s.kld < 1e-9 && s.table_mae == 0.0));
        assert!(r.strategies.iter().all(|s| s.residuals.max_abs() < 1e-15));
        let pair = &r.pairwise[0];
        let res = pair.result.as_ref().unwrap();
        assert_eq!(res.p_value, 1.0);
        assert!(res.warning.is_some());
    }

    #[test]
    fn disjoint_groups_reach_minimum_exact_p() {
        let mut runs = Vec::new();
        for seed in 0..20 {
            runs.push(TableRun {
                strategy: "close".into(),
                seed,
                table: perturbed(0, seed),
            });
            runs.push(TableRun {
                strategy: "far".into(),
                seed,
                table: perturbed(60, seed),
            });
        }
        let r = analyze_tables(&truth(), &runs, DEFAULT_KLD_EPSILON).unwrap();
        let t = r.pair("close", "far").unwrap().result.clone().unwrap();
        assert_eq!(t.method, TestMethod::WilcoxonExact);
        assert_eq!(t.p_value, 2.0 / 2f64.powi(20));
        assert!(r.strategy("close").unwrap().kld.mean < r.strategy("far").unwrap().kld.mean);
    }

    #[test]
    fn three_groups_have_global_and_pairwise_tests() {
        let mut runs = Vec::new();
        for (k, name) in ["x", "y", "z"].iter().enumerate() {
            for seed in 0..8 {
                runs.push(TableRun {
                    strategy: name.to_string(),
                    seed,
                    table: perturbed(10 * k as u64, seed),
                });
            }
        }
        let r = analyze_tables(&truth(), &runs, DEFAULT_KLD_EPSILON).unwrap();
        assert_eq!(r.kruskal_wallis.method, TestMethod::KruskalWallis);
        assert_eq!(r.kruskal_wallis.n, vec![8, 8, 8]);
        assert_eq!(r.pairwise.len(), 3);
        for p in &r.pairwise {
            assert!(p.p_holm.unwrap() >= p.result.as_ref().unwrap().p_value);
        }
    }

    #[test]
    fn errors() {
        let one = vec![TableRun {
            strategy: "a".into(),
            seed: 0,
            table: truth(),
        }];
        assert!(analyze_tables(&truth(), &one, DEFAULT_KLD_EPSILON).is_err());
        let bad = vec![
            one[0].clone(),
            TableRun {
                strategy: "b".into(),
                seed: 0,
                table: ContingencyTable::zeros("kl", "cppd", 2, 2).unwrap(),
            },
        ];
        assert!(matches!(
            analyze_tables(&truth(), &bad, DEFAULT_KLD_EPSILON),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
