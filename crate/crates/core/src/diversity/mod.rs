//! Diversity of NL datasets measured on sentence embeddings.
//!
//! Cross-distribution metrics compare a candidate set with a reference set
//! (Fréchet distance, k-NN precision/recall); within-distribution metrics
//! describe one set (remote-clique, Chamfer, MST dispersion, span,
//! sparseness, grid entropy). All distances are Euclidean.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod cross;
mod embed;
mod pca;
mod report;
mod within;

pub use cross::{frechet_distance, knn_precision_recall, CrossMetrics, FD_EPSILON};
pub use embed::{EmbeddingProvider, HashEmbedder, PrecomputedEmbeddings};
pub use pca::principal_components;
pub use report::{evaluate, DatasetSource, EvalOptions, MeanStd, MetricReport, ReportRow, METRIC_NAMES};
pub use within::{within_metrics, WithinMetrics};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiversityError {
    #[error("vector has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("vectors must have at least one dimension")]
    ZeroDimension,
    #[error("vector {0} has zero norm and cannot be normalized")]
    ZeroVector(usize),
    #[error("dataset {0:?} has no texts")]
    EmptySet(String),
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSet {
    dim: usize,
    vectors: Vec<Vec<f64>>,
    normalized: bool,
}

impl VectorSet {
    pub fn new(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self, DiversityError> {
        if dim == 0 {
            return Err(DiversityError::ZeroDimension);
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(DiversityError::DimensionMismatch { expected: dim, found: v.len() });
        }
        Ok(VectorSet { dim, vectors, normalized: false })
    }

    /// Infers the dimension from the first vector.
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self, DiversityError> {
        let dim = vectors.first().map_or(0, Vec::len);
        Self::new(dim, vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Scales every vector to unit Euclidean norm.
    pub fn normalized(mut self) -> Result<Self, DiversityError> {
        for (i, v) in self.vectors.iter_mut().enumerate() {
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if norm == 0.0 || !norm.is_finite() {
                return Err(DiversityError::ZeroVector(i));
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        self.normalized = true;
        Ok(self)
    }

    fn require(&self, needed: usize) -> Result<(), DiversityError> {
        if self.vectors.len() < needed {
            Err(DiversityError::TooFewPoints { needed, found: self.vectors.len() })
        } else {
            Ok(())
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Row-major n×n pairwise distance matrix.
pub(crate) fn distance_matrix(v: &[Vec<f64>]) -> Vec<f64> {
    let n = v.len();
    let mut d = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let x = euclidean(&v[i], &v[j]);
            d[i * n + j] = x;
            d[j * n + i] = x;
        }
    }
    d
}
