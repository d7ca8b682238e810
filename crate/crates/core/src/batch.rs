use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered collection of samples, each a vector of length `dim`.
///
/// Scalar batches are the `dim == 1` case. Storage is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    dim: usize,
    data: Vec<f64>,
}

impl SampleBatch {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("batch dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Argument(format!(
                "data length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_scalars(values: Vec<f64>) -> Self {
        Self { dim: 1, data: values }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// `m` copies of `row`.
    pub fn repeat(row: &[f64], m: usize) -> Self {
        let mut data = Vec::with_capacity(row.len() * m);
        for _ in 0..m {
            data.extend_from_slice(row);
        }
        Self { dim: row.len().max(1), data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Scalar view; only valid for `dim == 1`.
    pub fn scalars(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.dim });
        }
        Ok(&self.data)
    }

    /// Values of coordinate `j` across all samples.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Every sample translated by `shift` (which must have length `dim`).
    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim, "shift dimension");
        let data = self
            .rows()
            .flat_map(|r| r.iter().zip(shift).map(|(a, b)| a + b))
            .collect();
        Self { dim: self.dim, data }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// Coordinate-wise mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v;
            }
        }
        let n = self.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_data() {
        assert!(SampleBatch::new(3, vec![1.0; 7]).is_err());
        assert!(SampleBatch::new(0, vec![]).is_err());
        assert!(SampleBatch::from_rows(2, &[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn column_and_mean() {
        let b = SampleBatch::from_rows(2, &[vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.column(1), vec![2.0, 6.0]);
        assert_eq!(b.mean(), vec![2.0, 4.0]);
        assert_eq!(b.translated(&[1.0, -1.0]).row(1), &[4.0, 5.0]);
    }
}
