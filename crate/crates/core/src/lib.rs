//! Building blocks for evaluating EEG representation models across
//! parameter, sample and channel budgets.
//!
//! The pipeline runs raw EDF recordings through [`preprocess`] into labeled
//! epochs, restricts channels with [`montage`], draws folds and
//! budget-limited training subsets with [`sampling`], fits linear probes on
//! frozen embeddings with [`probe`], scores predictions with [`metrics`],
//! and turns per-fold scores into chance-corrected ratios with
//! [`efficiency`].

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod edf;
pub mod efficiency;
pub mod metrics;
pub mod montage;
pub mod preprocess;
pub mod probe;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use edf::{parse_edf, write_edf, Annotation, EdfError, EdfFile, EdfHeader, Recording, SignalSpec};
pub use efficiency::{CellResult, EfficiencyKind, EfficiencyReport, Setting};
pub use metrics::{ConfusionMatrix, Metric, MetricReport};
pub use preprocess::{Epoch, EpochSet, PipelineSpec};
pub use probe::{EmbeddingSet, ProbeConfig, ProbeModel};
pub use sampling::{BudgetSpec, CvScheme, FoldSpec};
