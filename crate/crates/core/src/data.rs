//! Covariate matrices and the validated mediation data set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of an input variable. Categorical covariates are one-hot encoded
/// before they reach a model, so models only ever see numeric columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Binary,
    Categorical,
}

/// Column-major numeric covariate matrix.
///
/// Each column also carries its sorted distinct values and the rank of every
/// cell within them, which the tree sampler uses to enumerate cutpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Covariates {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    uniques: Vec<Vec<f64>>,
    ranks: Vec<Vec<u32>>,
}

fn rank_column(col: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let mut uniq = col.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let ranks = col
        .iter()
        .map(|v| uniq.binary_search_by(|u| u.total_cmp(v)).expect("value present") as u32)
        .collect();
    (uniq, ranks)
}

impl Covariates {
    pub fn from_columns(columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if columns.len() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: names.len(),
            });
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for col in &columns {
            if col.len() != n_rows {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    got: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("covariates must be finite".into()));
            }
        }
        let (uniques, ranks) = columns.iter().map(|c| rank_column(c)).unzip();
        Ok(Self {
            n_rows,
            columns,
            names,
            uniques,
            ranks,
        })
    }

    /// Builds a matrix from rows, naming columns `x1, x2, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        let mut out = Self::from_columns(columns, names)?;
        out.n_rows = rows.len();
        Ok(out)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Sorted distinct values of column `j`.
    pub fn uniques(&self, j: usize) -> &[f64] {
        &self.uniques[j]
    }

    /// Rank of every cell of column `j` within [`Covariates::uniques`].
    pub fn ranks(&self, j: usize) -> &[u32] {
        &self.ranks[j]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Returns a copy with extra columns appended on the right.
    pub fn with_appended(&self, extra: &[(&str, &[f64])]) -> Result<Self> {
        let mut columns = self.columns.clone();
        let mut names = self.names.clone();
        for (name, col) in extra {
            if col.len() != self.n_rows {
                return Err(Error::DimensionMismatch {
                    expected: self.n_rows,
                    got: col.len(),
                });
            }
            columns.push(col.to_vec());
            names.push((*name).to_string());
        }
        let mut out = Self::from_columns(columns, names)?;
        out.n_rows = self.n_rows;
        Ok(out)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| idx.iter().map(|&i| c[i]).collect())
            .collect();
        let mut out = Self::from_columns(columns, self.names.clone()).expect("selected rows stay rectangular");
        out.n_rows = idx.len();
        out
    }
}

/// Column roles and declared kinds, kept alongside the data for reporting.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub outcome: String,
    pub treatment: String,
    pub mediator: String,
    /// Source covariate names and kinds before one-hot encoding.
    pub covariates: Vec<(String, VariableKind)>,
}

/// Outcome, binary treatment, mediator and covariates for one study sample.
#[derive(Clone, Debug, PartialEq)]
pub struct MediationData {
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub m: Vec<f64>,
    pub x: Covariates,
    pub meta: ColumnMeta,
}

impl MediationData {
    /// Validates lengths, finiteness, binary treatment and non-empty arms.
    pub fn new(y: Vec<f64>, a: Vec<f64>, m: Vec<f64>, x: Covariates) -> Result<Self> {
        let data = Self {
            y,
            a,
            m,
            x,
            meta: ColumnMeta {
                outcome: "y".into(),
                treatment: "a".into(),
                mediator: "m".into(),
                covariates: Vec::new(),
            },
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_meta(mut self, meta: ColumnMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        for len in [self.a.len(), self.m.len(), self.x.n_rows()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if n == 0 {
            return Err(Error::InvalidData("no observations".into()));
        }
        if self.y.iter().chain(&self.m).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("outcome and mediator must be finite".into()));
        }
        if let Some(i) = self.a.iter().position(|&a| a != 0.0 && a != 1.0) {
            return Err(Error::InvalidData(format!(
                "treatment must be 0 or 1 (row {} has {})",
                i + 1,
                self.a[i]
            )));
        }
        let (treated, control) = self.arm_sizes();
        if treated == 0 || control == 0 {
            return Err(Error::Positivity { treated, control });
        }
        Ok(())
    }

    /// (treated, control) counts.
    pub fn arm_sizes(&self) -> (usize, usize) {
        let treated = self.a.iter().filter(|&&a| a == 1.0).count();
        (treated, self.a.len() - treated)
    }

    pub fn mediator_is_binary(&self) -> bool {
        self.m.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn outcome_is_binary(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}
