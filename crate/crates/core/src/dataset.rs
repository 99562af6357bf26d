//! Time-series ingestion, standardization and correlation matrices.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix, MAX_DIM};

const VARIANCE_FLOOR: f64 = 1e-12;
const STANDARDIZED_TOL: f64 = 1e-9;

/// A named T×N observation matrix stored column-wise: one column per
/// variable, one entry per timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    standardized: bool,
}

impl TimeSeriesDataset {
    /// Builds an unstandardized dataset, validating shape, names and values.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidDataset(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if names.len() < 2 {
            return Err(Error::InvalidDataset("need at least 2 variables".into()));
        }
        let len = columns[0].len();
        if len < 3 {
            return Err(Error::InvalidDataset("need at least 3 timestamps".into()));
        }
        let mut seen = HashSet::with_capacity(names.len());
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        for (c, col) in columns.iter().enumerate() {
            if col.len() != len {
                return Err(Error::InvalidDataset(format!(
                    "column {:?} has {} values, expected {len}",
                    names[c],
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: row + 1,
                    column: c + 1,
                    value: col[row].to_string(),
                });
            }
        }
        Ok(Self {
            names,
            columns,
            standardized: false,
        })
    }

    /// Number of timestamps (T).
    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of variables (N).
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps only the given columns, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let names = indices.iter().map(|&i| self.names[i].clone()).collect();
        let columns = indices.iter().map(|&i| self.columns[i].clone()).collect();
        let mut out = Self::from_columns(names, columns)?;
        out.standardized = self.standardized;
        Ok(out)
    }

    /// Returns a copy with every column at zero mean and unit sample
    /// variance, optionally after subtracting a least-squares linear trend.
    pub fn standardize(&self, detrend: bool) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .zip(&self.names)
            .map(|(col, name)| {
                let residual = if detrend {
                    remove_linear_trend(col)
                } else {
                    col.clone()
                };
                zscore(&residual).ok_or_else(|| Error::NearConstant(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names: self.names.clone(),
            columns,
            standardized: true,
        })
    }

    /// Pearson correlation matrix of a standardized dataset.
    pub fn correlation_matrix(&self) -> Result<CorrelationMatrix> {
        if !self.standardized {
            return Err(Error::NotStandardized);
        }
        let n = self.width();
        let scale = 1.0 / (self.len() as f64 - 1.0);
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                ((i + 1)..n)
                    .map(|j| (dot(&self.columns[i], &self.columns[j]) * scale).clamp(-1.0, 1.0))
                    .collect()
            })
            .collect();
        let mut m = SymMatrix::identity(n);
        for (i, row) in upper.iter().enumerate() {
            for (offset, &r) in row.iter().enumerate() {
                let j = i + 1 + offset;
                m.set(i, j, r);
                m.set(j, i, r);
            }
        }
        Ok(CorrelationMatrix { m })
    }

    /// Correlation matrix restricted to `indices` (standardized data only).
    pub fn correlation_submatrix(&self, indices: &[usize]) -> Result<SymMatrix> {
        if !self.standardized {
            return Err(Error::NotStandardized);
        }
        let cols: Vec<&[f64]> = indices.iter().map(|&i| self.column(i)).collect();
        Ok(correlation_of_standardized(&cols))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |e: csv::Error| Error::Csv {
            path: "<output>".into(),
            source: e,
        };
        w.write_record(&self.names).map_err(wrap)?;
        for t in 0..self.len() {
            w.write_record(self.columns.iter().map(|c| c[t].to_string()))
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<output>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Reads a CSV file: header of unique names, one row per timestamp.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, path)
}

pub fn read_csv<R: Read>(reader: R, label: &Path) -> Result<TimeSeriesDataset> {
    let wrap = |source: csv::Error| Error::Csv {
        path: label.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(wrap)?
        .iter()
        .map(str::to_owned)
        .collect();
    let width = names.len();
    let mut seen = HashSet::with_capacity(width);
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName(name.clone()));
        }
    }
    let mut columns = vec![Vec::new(); width];
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(wrap)?;
        let row = r + 1;
        if record.len() != width {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: width,
            });
        }
        for (c, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => columns[c].push(v),
                _ => {
                    return Err(Error::NonFinite {
                        row,
                        column: c + 1,
                        value: field.to_owned(),
                    })
                }
            }
        }
    }
    TimeSeriesDataset::from_columns(names, columns)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Correlation matrix of already standardized columns (equal length).
pub fn correlation_of_standardized(cols: &[&[f64]]) -> SymMatrix {
    let k = cols.len();
    let scale = 1.0 / (cols[0].len() as f64 - 1.0);
    let mut m = SymMatrix::identity(k);
    for i in 0..k {
        for j in (i + 1)..k {
            let r = (dot(cols[i], cols[j]) * scale).clamp(-1.0, 1.0);
            m.set(i, j, r);
            m.set(j, i, r);
        }
    }
    m
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn remove_linear_trend(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = mean(xs);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, x) in xs.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (x - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    xs.iter()
        .enumerate()
        .map(|(t, x)| x - x_mean - slope * (t as f64 - t_mean))
        .collect()
}

fn zscore(xs: &[f64]) -> Option<Vec<f64>> {
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let var = dot(&centered, &centered) / (xs.len() as f64 - 1.0);
    if var.is_nan() || var <= VARIANCE_FLOOR {
        return None;
    }
    let sd = var.sqrt();
    Some(centered.into_iter().map(|x| x / sd).collect())
}

/// Symmetric unit-diagonal PSD matrix of pairwise correlations.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    m: SymMatrix,
}

impl CorrelationMatrix {
    /// Validates diagonal, symmetry and range. Positive semi-definiteness is
    /// checked for matrices small enough for the dense solver; larger ones
    /// are expected to come from [`TimeSeriesDataset::correlation_matrix`].
    pub fn new(m: SymMatrix) -> Result<Self> {
        let k = m.dim();
        if k == 0 {
            return Err(Error::InvalidMatrix("empty correlation matrix".into()));
        }
        for i in 0..k {
            if m.get(i, i) != 1.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..k {
                let v = m.get(i, j);
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i},{j}) = {v} outside [-1,1]"
                    )));
                }
            }
        }
        let asym = m.max_asymmetry();
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        if k <= MAX_DIM {
            let lambda = linalg::min_eigenvalue(&m)?;
            if lambda < -STANDARDIZED_TOL {
                return Err(Error::InvalidMatrix(format!(
                    "not positive semi-definite (smallest eigenvalue {lambda:e})"
                )));
            }
        }
        Ok(Self { m })
    }

    pub fn equicorrelated(k: usize, r: f64) -> Result<Self> {
        Self::new(SymMatrix::equicorrelated(k, r))
    }

    pub fn identity(k: usize) -> Self {
        Self {
            m: SymMatrix::identity(k),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m.get(i, j)
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.m
    }

    pub fn submatrix(&self, indices: &[usize]) -> SymMatrix {
        self.m.principal(indices)
    }

    /// Principal submatrix after multiplying member `a` by `signs[a]`:
    /// entry (a,b) becomes `signs[a] * signs[b] * A[members[a], members[b]]`.
    pub fn sign_adjusted(&self, members: &[usize], signs: &[i8]) -> SymMatrix {
        SymMatrix::from_fn(members.len(), |a, b| {
            f64::from(signs[a] * signs[b]) * self.get(members[a], members[b])
        })
    }
}
