//! Dense value types: vectors and row-major matrices over `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real vector with at least one entry, all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealVector {
    values: Vec<f64>,
}

impl RealVector {
    /// Builds a vector, rejecting empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("RealVector must have at least one entry"));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("RealVector entry {idx}")));
        }
        Ok(RealVector { values })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        RealVector::new(vec![0.0; dim.max(0)])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &RealVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::dim("RealVector::dot", self.dim(), other.dim()));
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Cosine similarity, clamped to [-1, 1]. Zero vectors yield 0.
    pub fn cosine(&self, other: &RealVector) -> Result<f64> {
        let dot = self.dot(other)?;
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok((dot / denom).clamp(-1.0, 1.0))
    }
}

/// A dense row-major matrix, all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::arg("RealMatrix dimensions must be positive"));
        }
        if values.len() != rows * cols {
            return Err(Error::dim("RealMatrix entry count", rows * cols, values.len()));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("RealMatrix entry {idx}")));
        }
        Ok(RealMatrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        RealMatrix::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        RealMatrix::new(n, n, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_rejects_empty_and_non_finite() {
        assert!(RealVector::new(vec![]).is_err());
        assert!(RealVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(RealVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn matrix_shape_validation() {
        assert!(RealMatrix::new(2, 3, vec![0.0; 6]).is_ok());
        assert!(RealMatrix::new(2, 3, vec![0.0; 5]).is_err());
        assert!(RealMatrix::new(0, 3, vec![]).is_err());
    }

    #[test]
    fn cosine_of_identical_vectors_is_one() {
        let v = RealVector::new(vec![0.3, -1.2, 0.7]).unwrap();
        let c = v.cosine(&v).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_handles_zero_vector() {
        let z = RealVector::zeros(3).unwrap();
        let v = RealVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(z.cosine(&v).unwrap(), 0.0);
    }
}
