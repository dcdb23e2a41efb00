//! Datasets: MNIST IDX files, numeric CSV tables, synthetic functions and
//! series, plus the preparation steps used by the experiments.

mod csv_table;
mod idx;
mod prep;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Tensor;

pub use csv_table::{load_csv_regression, ColumnRef};
pub use idx::{
    load_mnist_idx, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use prep::{split, standardize, standardize_global, standardize_targets, window_time_series, STD_FLOOR};
pub use synth::{random_walk, synth_function, SynthFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated IDX data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: `{cell}` is not a number")]
    NonNumeric {
        line: usize,
        column: usize,
        cell: String,
    },
    #[error("target column {0} not found")]
    MissingTargetColumn(String),
    #[error("unknown synthetic function `{0}`")]
    UnknownFunction(String),
    #[error("series of length {len} is too short for lookback {lookback}")]
    SeriesTooShort { len: usize, lookback: usize },
    #[error("split leaves an empty side ({train} train / {test} test)")]
    EmptySplit { train: usize, test: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Targets are class indices for classification and a `[n, 1]` tensor for
/// regression.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes { labels: Vec<usize>, classes: usize },
    Values(Tensor),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Self::Classes { labels, .. } => labels.len(),
            Self::Values(t) => t.shape().first().copied().unwrap_or(0),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gather(&self, idx: &[usize]) -> Self {
        match self {
            Self::Classes { labels, classes } => Self::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
            Self::Values(t) => Self::Values(t.gather_rows(idx)),
        }
    }
}

/// Per-feature affine transform `(x - mean) / std`. A single entry applies
/// to every feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Maps standardized values back to original units (single-feature case
    /// uses index 0 for every value).
    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i % d] + self.mean[i % d])
            .collect()
    }
}

/// Features are `[n, d]`, or `[n, T, d]` for sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub targets: Targets,
    /// Feature standardization applied, if any.
    pub normalization: Option<Normalization>,
    /// Target standardization applied, if any.
    pub target_normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(features: Tensor, targets: Targets) -> Result<Self> {
        let n = features.shape().first().copied().unwrap_or(0);
        if n != targets.len() {
            return Err(DataError::InvalidArgument(format!(
                "{n} feature rows but {} targets",
                targets.len()
            )));
        }
        Ok(Self {
            features,
            targets,
            normalization: None,
            target_normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of the last feature axis.
    pub fn feature_dim(&self) -> usize {
        *self.features.shape().last().unwrap_or(&0)
    }

    /// Rows `idx`, in order; normalization records are carried over.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.gather_rows(idx),
            targets: self.targets.gather(idx),
            normalization: self.normalization.clone(),
            target_normalization: self.target_normalization.clone(),
        }
    }

    /// The first `n` rows (or all of them).
    pub fn take(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Values(_) => None,
        }
    }

    pub fn values(&self) -> Option<&Tensor> {
        match &self.targets {
            Targets::Values(t) => Some(t),
            Targets::Classes { .. } => None,
        }
    }
}
