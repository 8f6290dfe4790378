use crate::error::{Error, Result};

/// Row-major `draws × n` matrix of per-draw, per-row values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DrawMatrix {
    n_cols: usize,
    values: Vec<f64>,
}

impl DrawMatrix {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_cols,
            values: Vec::new(),
        }
    }

    pub fn with_capacity(n_cols: usize, n_draws: usize) -> Self {
        Self {
            n_cols,
            values: Vec::with_capacity(n_cols * n_draws),
        }
    }

    pub fn from_vec(n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_cols == 0 && !values.is_empty() || n_cols > 0 && values.len() % n_cols != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_cols,
                got: values.len(),
            });
        }
        Ok(Self { n_cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::with_capacity(n_cols, rows.len());
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        if self.n_cols == 0 {
            0
        } else {
            self.values.len() / self.n_cols
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_cols..(k + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.n_cols + i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Values of row `i` across draws.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    /// Posterior mean of every column.
    pub fn column_means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for r in self.rows() {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        let k = self.n_draws() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        out
    }

    /// Elementwise combination of two matrices of the same shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.n_cols != other.n_cols || self.values.len() != other.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(Self {
            n_cols: self.n_cols,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Appends the draws of `other`, which must have the same width.
    pub fn extend(&mut self, other: &Self) -> Result<()> {
        if self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: other.n_cols,
            });
        }
        self.values.extend_from_slice(&other.values);
        Ok(())
    }
}
