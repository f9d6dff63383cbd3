//! Embedding vectors and cosine scoring.
//!
//! Components are stored as `f32`; every dot product accumulates in `f64`.

use alloc::vec::Vec;

use crate::Error;

/// Tolerance on `‖v‖₂ = 1` for vectors that claim to be normalized.
pub const UNIT_NORM_TOL: f64 = 1e-5;

pub const DEFAULT_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, Error> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEmbedding);
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOL
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

pub fn norm(v: &[f32]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Returns `v / ‖v‖₂`.
pub fn l2_normalize(v: &EmbeddingVector) -> Result<EmbeddingVector, Error> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateEmbedding);
    }
    let values = v
        .values
        .iter()
        .map(|&x| (f64::from(x) / n) as f32)
        .collect();
    Ok(EmbeddingVector { values })
}

/// Inner product of two normalized vectors.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, Error> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(dot(&a.values, &b.values))
}

/// `1 - cos(a, b)`, in `[0, 2]` for normalized inputs.
pub fn semantic_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, Error> {
    cosine_similarity(a, b).map(|s| 1.0 - s)
}

/// Scores every row of a row-major `rows × dim` matrix against `query`.
pub fn score_rows(matrix: &[f32], dim: usize, query: &[f32]) -> Result<Vec<f64>, Error> {
    if query.len() != dim {
        return Err(Error::DimMismatch {
            expected: dim,
            found: query.len(),
        });
    }
    if dim == 0 || !matrix.len().is_multiple_of(dim) {
        return Err(Error::RowCountMismatch {
            expected: matrix.len() / dim.max(1),
            found: matrix.len(),
        });
    }
    Ok(matrix
        .chunks_exact(dim)
        .map(|row| dot(row, query))
        .collect())
}
