//! Joint distribution of two grading scales: contingency tables, KL
//! divergence, residual matrices and cell-wise MAE.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default additive smoothing on the predicted distribution.
pub const DEFAULT_KLD_EPSILON: f64 = 1e-6;

/// Joint counts of two gradings; rows index the first scale (e.g. KL),
/// columns the second (e.g. CPPD).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_axis: String,
    pub col_axis: String,
    counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(row_axis: &str, col_axis: &str, counts: Vec<Vec<u64>>) -> Result<Self> {
        let rows = counts.len();
        let cols = counts.first().map_or(0, Vec::len);
        if rows < 2 || cols < 2 {
            return Err(Error::ShapeMismatch(format!(
                "contingency table must be at least 2 x 2, got {rows} x {cols}"
            )));
        }
        if counts.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged contingency table".into()));
        }
        Ok(Self {
            row_axis: row_axis.to_string(),
            col_axis: col_axis.to_string(),
            counts,
        })
    }

    pub fn zeros(row_axis: &str, col_axis: &str, rows: usize, cols: usize) -> Result<Self> {
        Self::new(row_axis, col_axis, vec![vec![0; cols]; rows])
    }

    /// Places `counts` in the top-left corner of a zero `rows x cols` table.
    pub fn padded(
        row_axis: &str,
        col_axis: &str,
        counts: &[Vec<u64>],
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let mut t = Self::zeros(row_axis, col_axis, rows, cols)?;
        for (i, r) in counts.iter().enumerate() {
            for (j, &c) in r.iter().enumerate() {
                if i >= rows || j >= cols {
                    return Err(Error::ShapeMismatch("padding target is too small".into()));
                }
                t.counts[i][j] = c;
            }
        }
        Ok(t)
    }

    /// Tallies paired grades.
    pub fn from_pairs(
        row_axis: &str,
        col_axis: &str,
        rows: usize,
        cols: usize,
        a: &[usize],
        b: &[usize],
    ) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} row grades vs {} column grades",
                a.len(),
                b.len()
            )));
        }
        let mut t = Self::zeros(row_axis, col_axis, rows, cols)?;
        for (&i, &j) in a.iter().zip(b) {
            if i >= rows {
                return Err(Error::LabelOutOfRange {
                    label: i,
                    classes: rows,
                });
            }
            if j >= cols {
                return Err(Error::LabelOutOfRange {
                    label: j,
                    classes: cols,
                });
            }
            t.counts[i][j] += 1;
        }
        Ok(t)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.counts.len(), self.counts[0].len())
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// CSV with header `<rows>/<cols>,0,1,...` and one line per row grade.
    pub fn to_csv(&self) -> String {
        let (_, cols) = self.shape();
        let mut out = format!("{}/{}", self.row_axis, self.col_axis);
        for j in 0..cols {
            let _ = write!(out, ",{j}");
        }
        out.push('\n');
        for (i, r) in self.counts.iter().enumerate() {
            let _ = write!(out, "{i}");
            for c in r {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))??;
        let head: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if head.len() < 3 {
            return Err(Error::Parse(format!("bad header '{header}'")));
        }
        let (row_axis, col_axis) = head[0].split_once('/').unwrap_or((head[0], "cols"));
        for (j, h) in head[1..].iter().enumerate() {
            if h.parse::<usize>().ok() != Some(j) {
                return Err(Error::Parse(format!(
                    "column {} header should be {j}",
                    j + 1
                )));
            }
        }
        let cols = head.len() - 1;
        let mut counts = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols + 1 {
                return Err(Error::Parse(format!("row '{line}' has the wrong width")));
            }
            if fields[0].parse::<usize>().ok() != Some(counts.len()) {
                return Err(Error::Parse(format!(
                    "row grade '{}' out of order",
                    fields[0]
                )));
            }
            let row = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<u64>()
                        .map_err(|_| Error::Parse(format!("bad count '{f}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
        }
        Self::new(row_axis, col_axis, counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    probs: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn from_probs(probs: Vec<Vec<f64>>) -> Result<Self> {
        let cols = probs.first().map_or(0, Vec::len);
        if cols == 0 || probs.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch(
                "joint distribution must be a non-empty grid".into(),
            ));
        }
        let s: f64 = probs.iter().flatten().sum();
        if (s - 1.0).abs() > 1e-9 || probs.iter().flatten().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "joint probabilities sum to {s}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i][j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.probs.len(), self.probs[0].len())
    }

    pub fn cells(&self) -> usize {
        let (r, c) = self.shape();
        r * c
    }

    /// Cell-wise mean of several distributions of the same shape.
    pub fn mean(dists: &[JointDistribution]) -> Result<Self> {
        let first = dists
            .first()
            .ok_or_else(|| Error::Empty("no distributions to average".into()))?;
        let (r, c) = first.shape();
        let mut acc = vec![vec![0.0; c]; r];
        for d in dists {
            same_shape(first, d)?;
            for (a, row) in acc.iter_mut().zip(&d.probs) {
                for (x, y) in a.iter_mut().zip(row) {
                    *x += y;
                }
            }
        }
        let n = dists.len() as f64;
        for row in &mut acc {
            for x in row {
                *x /= n;
            }
        }
        Ok(Self { probs: acc })
    }
}

fn same_shape(p: &JointDistribution, q: &JointDistribution) -> Result<()> {
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            p.shape(),
            q.shape()
        )));
    }
    Ok(())
}

pub fn normalise(table: &ContingencyTable) -> Result<JointDistribution> {
    let total = table.total();
    if total == 0 {
        return Err(Error::Empty("contingency table has no counts".into()));
    }
    let probs = table
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64 / total as f64).collect())
        .collect();
    Ok(JointDistribution { probs })
}

/// `sum P ln(P / Q')` with `Q' = (Q + eps) / (1 + eps * cells)`.
///
/// Returns `f64::INFINITY` when some cell has `P > 0` and `Q' = 0`, which can
/// only happen with `eps = 0`.
pub fn kld(p: &JointDistribution, q: &JointDistribution, epsilon: f64) -> Result<f64> {
    same_shape(p, q)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon}")));
    }
    let norm = 1.0 + epsilon * p.cells() as f64;
    let mut acc = 0.0;
    for (pr, qr) in p.probs.iter().zip(&q.probs) {
        for (&pi, &qi) in pr.iter().zip(qr) {
            if pi == 0.0 {
                continue;
            }
            let qs = (qi + epsilon) / norm;
            if qs == 0.0 {
                return Ok(f64::INFINITY);
            }
            acc += pi * (pi / qs).ln();
        }
    }
    // Rounding can leave -1e-17 when P == Q'.
    Ok(acc.max(0.0))
}

/// `R = P - Q`. Positive cells are grade pairs the model under-predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMatrix {
    pub residuals: Vec<Vec<f64>>,
}

impl ResidualMatrix {
    pub fn sum(&self) -> f64 {
        self.residuals.iter().flatten().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.residuals
            .iter()
            .flatten()
            .fold(0.0, |m, r| f64::max(m, r.abs()))
    }
}

pub fn residuals(p: &JointDistribution, q: &JointDistribution) -> Result<ResidualMatrix> {
    same_shape(p, q)?;
    Ok(ResidualMatrix {
        residuals: p
            .probs
            .iter()
            .zip(&q.probs)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect(),
    })
}

/// Mean absolute cell difference between two distributions.
pub fn table_mae(p: &JointDistribution, q: &JointDistribution) -> Result<f64> {
    let r = residuals(p, q)?;
    Ok(r.residuals.iter().flatten().map(|v| v.abs()).sum::<f64>() / p.cells() as f64)
}

/// Mean absolute cell difference between two count tables.
pub fn table_mae_counts(a: &ContingencyTable, b: &ContingencyTable) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (r, c) = a.shape();
    let sum: u64 = a
        .counts
        .iter()
        .flatten()
        .zip(b.counts.iter().flatten())
        .map(|(x, y)| x.abs_diff(*y))
        .sum();
    Ok(sum as f64 / (r * c) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(rows: Vec<Vec<f64>>) -> JointDistribution {
        JointDistribution::from_probs(rows).unwrap()
    }

    fn random_dist(rng: &mut ChaCha8Rng, r: usize, c: usize) -> JointDistribution {
        let raw: Vec<Vec<f64>> = (0..r)
            .map(|_| (0..c).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let z: f64 = raw.iter().flatten().sum();
        JointDistribution {
            probs: raw
                .into_iter()
                .map(|row| row.into_iter().map(|v| v / z).collect())
                .collect(),
        }
    }

    #[test]
    fn normalise_examples() {
        // 968 jointly graded images; KL0/CPPD0 = 111, KL1/CPPD0 = 201.
        let mut counts = vec![vec![0u64; 4]; 5];
        counts[0][0] = 111;
        counts[1][0] = 201;
        counts[4][3] = 968 - 111 - 201;
        let t = ContingencyTable::new("kl", "cppd", counts).unwrap();
        let p = normalise(&t).unwrap();
        assert_eq!(p.get(0, 0), 111.0 / 968.0);
        assert_eq!(p.get(1, 0), 201.0 / 968.0);

        let t = ContingencyTable::padded("a", "b", &[vec![5]], 2, 2).unwrap();
        assert_eq!(
            normalise(&t).unwrap().probs(),
            &[vec![1.0, 0.0], vec![0.0, 0.0]]
        );

        let t = ContingencyTable::new("a", "b", vec![vec![3; 3]; 2]).unwrap();
        assert!(normalise(&t)
            .unwrap()
            .probs()
            .iter()
            .flatten()
            .all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));

        let empty = ContingencyTable::zeros("a", "b", 2, 2).unwrap();
        assert!(matches!(normalise(&empty), Err(Error::Empty(_))));
    }

    #[test]
    fn kld_examples() {
        let p = dist(vec![vec![0.5, 0.5]]);
        assert_eq!(kld(&p, &p, 0.0).unwrap(), 0.0);
        let q = dist(vec![vec![0.25, 0.75]]);
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kld(&p, &q, 0.0).unwrap() - want).abs() < 1e-15);
        assert!((kld(&p, &q, 0.0).unwrap() - 0.14384).abs() < 1e-5);

        let hole = dist(vec![vec![1.0, 0.0]]);
        assert_eq!(kld(&p, &hole, 0.0).unwrap(), f64::INFINITY);
        assert!(kld(&p, &hole, DEFAULT_KLD_EPSILON).unwrap().is_finite());
        assert!(kld(&p, &hole, -1.0).is_err());
    }

    #[test]
    fn kld_nonnegative_on_smoothed_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r = rng.random_range(2..=5);
            let c = rng.random_range(2..=5);
            let p = random_dist(&mut rng, r, c);
            let q = random_dist(&mut rng, r, c);
            assert!(kld(&p, &q, DEFAULT_KLD_EPSILON).unwrap() >= 0.0);
            assert!(kld(&p, &p, 0.0).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn residual_and_mae_examples() {
        let p = dist(vec![vec![0.5, 0.5]]);
        let q = dist(vec![vec![0.25, 0.75]]);
        assert!(residuals(&p, &p)
            .unwrap()
            .residuals
            .iter()
            .flatten()
            .all(|&v| v == 0.0));
        let r = residuals(&p, &q).unwrap();
        assert_eq!(r.residuals[0], vec![0.25, -0.25]);
        assert_eq!(table_mae(&p, &p).unwrap(), 0.0);
        assert_eq!(table_mae(&p, &q).unwrap(), 0.25);
        let wide = dist(vec![vec![0.5, 0.5, 0.0]]);
        assert!(residuals(&p, &wide).is_err());
    }

    #[test]
    fn count_mae() {
        let a = ContingencyTable::new("a", "b", vec![vec![4, 0], vec![1, 3]]).unwrap();
        let b = ContingencyTable::new("a", "b", vec![vec![2, 2], vec![1, 3]]).unwrap();
        assert_eq!(table_mae_counts(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn table_csv() {
        let t = ContingencyTable::from_pairs("kl", "cppd", 3, 2, &[0, 0, 2], &[0, 1, 1]).unwrap();
        let csv = t.to_csv();
        assert_eq!(csv, "kl/cppd,0,1\n0,1,1\n1,0,0\n2,0,1\n");
        assert_eq!(ContingencyTable::read_csv(csv.as_bytes()).unwrap(), t);
        assert!(ContingencyTable::read_csv("x/y,0,2\n0,1,1\n1,1,1\n".as_bytes()).is_err());
        assert!(ContingencyTable::from_pairs("a", "b", 2, 2, &[2], &[0]).is_err());
    }

    proptest! {
        #[test]
        fn residual_antisymmetry(seed in any::<u64>(), r in 2usize..6, c in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_dist(&mut rng, r, c);
            let q = random_dist(&mut rng, r, c);
            let pq = residuals(&p, &q).unwrap();
            let qp = residuals(&q, &p).unwrap();
            for (a, b) in pq.residuals.iter().flatten().zip(qp.residuals.iter().flatten()) {
                prop_assert_eq!(*a, -*b);
            }
            prop_assert!(pq.sum().abs() < 1e-9);
            prop_assert!(table_mae(&p, &q).unwrap() <= pq.max_abs());
        }
    }
}
