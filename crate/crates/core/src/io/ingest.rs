//! Delimited-text ingestion with location-aware validation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{ColumnMeta, Covariates, MediationData, VariableKind};
use crate::error::{Error, Result};

/// Where the data lives and what each column means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub path: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub outcome: String,
    pub treatment: String,
    pub mediator: String,
    /// Covariate columns in model order; empty means every other column.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Declared kinds; undeclared columns are continuous.
    #[serde(default)]
    pub kinds: BTreeMap<String, VariableKind>,
}

fn default_delimiter() -> char {
    ','
}

impl DataSpec {
    pub fn new(path: impl Into<PathBuf>, outcome: &str, treatment: &str, mediator: &str) -> Self {
        Self {
            path: path.into(),
            delimiter: ',',
            outcome: outcome.into(),
            treatment: treatment.into(),
            mediator: mediator.into(),
            covariates: Vec::new(),
            kinds: BTreeMap::new(),
        }
    }

    pub fn kind_of(&self, column: &str) -> VariableKind {
        self.kinds.get(column).copied().unwrap_or(VariableKind::Continuous)
    }
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::Config(format!("delimiter must be a single ASCII character, got {c:?}")))
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL" | ".")
}

/// Header and string cells of a delimited file.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path, delimiter: char) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter_byte(delimiter)?)
            .has_headers(true)
            .from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::InvalidData(format!("{}: missing header row", path.display())));
        }
        let mut seen = HashSet::new();
        for h in &header {
            if !seen.insert(h.as_str()) {
                return Err(Error::DataAt {
                    path: path.into(),
                    row: 0,
                    column: h.clone(),
                    message: "duplicate header".into(),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(Self {
            path: path.into(),
            header,
            rows,
        })
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidData(format!("{}: no column named '{name}'", self.path.display()))
        })
    }

    fn err(&self, row: usize, col: usize, message: impl Into<String>) -> Error {
        Error::DataAt {
            path: self.path.clone(),
            row: row + 1,
            column: self.header[col].clone(),
            message: message.into(),
        }
    }

    fn cell(&self, row: usize, col: usize) -> Result<&str> {
        let c = self.rows[row].get(col).map(String::as_str).unwrap_or("");
        if is_missing(c) {
            return Err(self.err(row, col, "missing value"));
        }
        Ok(c)
    }

    fn numeric(&self, col: usize) -> Result<Vec<f64>> {
        (0..self.rows.len())
            .map(|i| {
                let c = self.cell(i, col)?;
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(i, col, format!("cannot parse '{c}' as a number")))
            })
            .collect()
    }

    fn binary(&self, col: usize) -> Result<Vec<f64>> {
        let v = self.numeric(col)?;
        if let Some(i) = v.iter().position(|&x| x != 0.0 && x != 1.0) {
            return Err(self.err(i, col, format!("expected 0 or 1, found {}", v[i])));
        }
        Ok(v)
    }
}

/// Reads a delimited file into validated mediation data. Categorical
/// covariates become one indicator column per level, named `name=level`,
/// with levels in lexicographic order.
pub fn ingest(spec: &DataSpec) -> Result<MediationData> {
    let t = Table::read(&spec.path, spec.delimiter)?;
    let roles = [&spec.outcome, &spec.treatment, &spec.mediator];
    let role_set: BTreeSet<&String> = roles.iter().copied().collect();
    if role_set.len() != 3 {
        return Err(Error::Config("outcome, treatment and mediator must be distinct columns".into()));
    }
    let covariates: Vec<String> = if spec.covariates.is_empty() {
        t.header.iter().filter(|h| !role_set.contains(h)).cloned().collect()
    } else {
        spec.covariates.clone()
    };
    if let Some(c) = covariates.iter().find(|c| role_set.contains(c)) {
        return Err(Error::Config(format!("column '{c}' is used both as a covariate and as a role")));
    }
    let mut unique = HashSet::new();
    if let Some(c) = covariates.iter().find(|c| !unique.insert(c.as_str())) {
        return Err(Error::Config(format!("covariate '{c}' is listed twice")));
    }

    let y = match spec.kind_of(&spec.outcome) {
        VariableKind::Binary => t.binary(t.index(&spec.outcome)?)?,
        VariableKind::Continuous => t.numeric(t.index(&spec.outcome)?)?,
        VariableKind::Categorical => return Err(Error::Config("the outcome cannot be categorical".into())),
    };
    let a = t.binary(t.index(&spec.treatment)?)?;
    let m = match spec.kind_of(&spec.mediator) {
        VariableKind::Binary => t.binary(t.index(&spec.mediator)?)?,
        VariableKind::Continuous => t.numeric(t.index(&spec.mediator)?)?,
        VariableKind::Categorical => return Err(Error::Config("the mediator cannot be categorical".into())),
    };

    let mut columns = Vec::new();
    let mut names = Vec::new();
    let mut meta_cov = Vec::new();
    for name in &covariates {
        let j = t.index(name)?;
        let kind = spec.kind_of(name);
        meta_cov.push((name.clone(), kind));
        match kind {
            VariableKind::Continuous => columns.push(t.numeric(j)?),
            VariableKind::Binary => columns.push(t.binary(j)?),
            VariableKind::Categorical => {
                let cells = (0..t.rows.len()).map(|i| t.cell(i, j)).collect::<Result<Vec<_>>>()?;
                let levels: BTreeSet<&str> = cells.iter().copied().collect();
                for level in levels {
                    columns.push(cells.iter().map(|&c| f64::from(u8::from(c == level))).collect());
                    names.push(format!("{name}={level}"));
                }
                continue;
            }
        }
        names.push(name.clone());
    }
    let n = t.rows.len();
    let x = if columns.is_empty() {
        Covariates::from_rows(&vec![Vec::new(); n])?
    } else {
        Covariates::from_columns(columns, names)?
    };
    let meta = ColumnMeta {
        outcome: spec.outcome.clone(),
        treatment: spec.treatment.clone(),
        mediator: spec.mediator.clone(),
        covariates: meta_cov,
    };
    Ok(MediationData::new(y, a, m, x)?.with_meta(meta))
}

/// Numeric covariate file. With `names`, columns are taken in that order
/// and must all be present; otherwise every column is used.
pub fn read_covariates(path: &Path, delimiter: char, names: Option<&[String]>) -> Result<Covariates> {
    let t = Table::read(path, delimiter)?;
    let wanted: Vec<String> = match names {
        Some(n) => n.to_vec(),
        None => t.header.clone(),
    };
    let mut columns = Vec::with_capacity(wanted.len());
    for name in &wanted {
        columns.push(t.numeric(t.index(name)?)?);
    }
    if columns.is_empty() {
        return Covariates::from_rows(&vec![Vec::new(); t.rows.len()]);
    }
    Covariates::from_columns(columns, wanted)
}

/// Writes a covariate matrix with its column names as the header.
pub fn write_covariates<W: std::io::Write>(x: &Covariates, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(x.names())?;
    for i in 0..x.n_rows() {
        wr.write_record((0..x.n_cols()).map(|j| x.get(i, j).to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes the encoded data (outcome, treatment, mediator, then the numeric
/// covariate columns) so that it can be ingested again.
pub fn export_csv<W: std::io::Write>(data: &MediationData, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec![data.meta.outcome.clone(), data.meta.treatment.clone(), data.meta.mediator.clone()];
    header.extend(data.x.names().iter().cloned());
    wr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![data.y[i].to_string(), data.a[i].to_string(), data.m[i].to_string()];
        rec.extend((0..data.x.n_cols()).map(|j| data.x.get(i, j).to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
