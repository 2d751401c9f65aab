//! Flat-feature ordinal datasets and their CSV form.
//!
//! The CSV layout is a header `f0,f1,...,f{d-1},label` followed by one row
//! per sample. Floats are written with Rust's shortest round-trip formatting,
//! so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::space::LabelSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    space: LabelSpace,
    dim: usize,
    // Row-major N x d.
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl SampleSet {
    pub fn new(
        space: LabelSpace,
        dim: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "feature dimension must be >= 1".into(),
            ));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature values for {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature in sample {}",
                bad / dim
            )));
        }
        for &l in &labels {
            space.check(l)?;
        }
        Ok(Self {
            space,
            dim,
            features,
            labels,
        })
    }

    pub fn from_rows(space: LabelSpace, rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(1);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        Self::new(space, dim, rows.concat(), labels)
    }

    pub fn space(&self) -> LabelSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.space.classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> SampleSet {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        SampleSet {
            space: self.space,
            dim: self.dim,
            features,
            labels,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for j in 0..self.dim {
            let _ = write!(line, "f{j},");
        }
        line.push_str("label\n");
        out.write_all(line.as_bytes())?;
        for i in 0..self.len() {
            line.clear();
            for v in self.row(i) {
                let _ = write!(line, "{v},");
            }
            let _ = writeln!(line, "{}", self.labels[i]);
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        // Writing to a Vec cannot fail.
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii csv")
    }

    /// Reads the CSV form. When `space` is `None` the grade count is inferred
    /// as `max(label) + 1`.
    pub fn read_csv<R: BufRead>(input: R, space: Option<LabelSpace>) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))??;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if cols.last() != Some(&"label") || cols.len() < 2 {
            return Err(Error::Parse(format!("bad header '{header}'")));
        }
        for (j, c) in cols[..cols.len() - 1].iter().enumerate() {
            if *c != format!("f{j}") {
                return Err(Error::Parse(format!("expected column f{j}, found '{c}'")));
            }
        }
        let dim = cols.len() - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    dim + 1
                )));
            }
            for f in &fields[..dim] {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number '{f}'", lineno + 2)))?;
                features.push(v);
            }
            let l: usize = fields[dim]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad label", lineno + 2)))?;
            labels.push(l);
        }
        let space = match space {
            Some(s) => s,
            None => LabelSpace::new(labels.iter().copied().max().map_or(2, |m| (m + 1).max(2)))?,
        };
        SampleSet::new(space, dim, features, labels)
    }
}
