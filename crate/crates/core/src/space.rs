use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered set of `J >= 2` grades, indexed `0..J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct LabelSpace {
    classes: usize,
}

impl LabelSpace {
    pub fn new(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "a label space needs at least 2 grades, got {classes}"
            )));
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn grades(&self) -> std::ops::Range<usize> {
        0..self.classes
    }

    pub fn check(&self, label: usize) -> Result<()> {
        if label < self.classes {
            Ok(())
        } else {
            Err(Error::LabelOutOfRange {
                label,
                classes: self.classes,
            })
        }
    }
}

impl TryFrom<usize> for LabelSpace {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        Self::new(value)
    }
}

impl From<LabelSpace> for usize {
    fn from(value: LabelSpace) -> usize {
        value.classes
    }
}

/// Labelling strategy. `Nominal` is the one-hot baseline; the other four are
/// unimodal soft-label families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Nominal,
    Binomial,
    Beta,
    Triangular,
    Exponential,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Nominal,
        Strategy::Binomial,
        Strategy::Beta,
        Strategy::Triangular,
        Strategy::Exponential,
    ];

    pub fn is_soft(&self) -> bool {
        !matches!(self, Strategy::Nominal)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Nominal => "nominal",
            Strategy::Binomial => "binomial",
            Strategy::Beta => "beta",
            Strategy::Triangular => "triangular",
            Strategy::Exponential => "exponential",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|st| st.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown strategy '{s}'")))
    }
}
