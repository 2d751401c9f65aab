//! Ordinal classification with unimodal soft labels.
//!
//! The crate covers the whole desk-scale pipeline: soft target construction
//! ([`softlabel`]), the soft cross-entropy ([`loss`]), a small classifier and
//! its training protocol ([`model`], [`train`], [`search`], [`protocol`]),
//! ordinal metrics ([`metrics`]), joint-distribution analysis of two grading
//! scales ([`joint`]) and the nonparametric test battery ([`stats`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod confusion;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod joint;
pub mod jointexp;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod rng;
pub mod search;
pub mod softlabel;
pub mod space;
pub mod specfun;
pub mod split;
pub mod stats;
pub mod synth;
pub mod train;

/// Version stamped on every JSON document the crate emits.
pub const SCHEMA_VERSION: u32 = 1;

pub use confusion::{build_confusion, ConfusionMatrix, PredictionSet};
pub use dataset::SampleSet;
pub use error::{Error, Result};
pub use metrics::MetricReport;
pub use softlabel::{build_target_matrix, SmoothingParams, SoftTargetMatrix};
pub use space::{LabelSpace, Strategy};
