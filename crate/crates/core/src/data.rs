//! Row-major observation storage.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// An `n x p` matrix of observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    values: Vec<f64>,
    n: usize,
    p: usize,
}

impl ObservationSet {
    /// Builds a set from row-major values.
    pub fn new(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len(),
            });
        }
        Ok(Self { values, n, p })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::EmptyData)?;
        let mut values = Vec::with_capacity(rows.len() * p);
        for row in rows {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(values, rows.len(), p)
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Dimension of each observation.
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn row_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Copies the listed rows into a new set.
    pub fn subset(&self, indices: &[usize]) -> ObservationSet {
        let mut values = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        ObservationSet {
            values,
            n: indices.len(),
            p: self.p,
        }
    }

    /// Applies `x -> A x + b` to every row.
    pub fn affine_map(
        &self,
        a: &nalgebra::DMatrix<f64>,
        b: &DVector<f64>,
    ) -> Result<ObservationSet> {
        if a.ncols() != self.p || b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: a.ncols(),
            });
        }
        let q = a.nrows();
        let mut values = Vec::with_capacity(self.n * q);
        for row in self.rows() {
            let y = a * DVector::from_column_slice(row) + b;
            values.extend(y.iter());
        }
        ObservationSet::new(values, self.n, q)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        self.n += 1;
        Ok(())
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.p);
        for row in self.rows() {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m / self.n.max(1) as f64
    }

    /// Covariance with divisor `n` (the normal maximum-likelihood form).
    pub fn covariance_mle(&self) -> nalgebra::DMatrix<f64> {
        let mean = self.mean();
        let mut s = nalgebra::DMatrix::zeros(self.p, self.p);
        for row in self.rows() {
            let d = DVector::from_column_slice(row) - &mean;
            s.ger(1.0, &d, &d, 1.0);
        }
        s / self.n.max(1) as f64
    }
}
