//! File formats.
//!
//! - Space: JSON, see [`crate::space::SpaceDescription`].
//! - Config: JSON object mapping dimension id to a number or a string.
//! - Kernel spec: JSON, see [`crate::kernel::KernelSpec`].
//! - Dataset: CSV with a header naming every dimension (any order) and an
//!   optional final `y` column. An empty cell leaves a dimension unassigned.
//! - Matrix: CSV, row-major, every entry with 17 significant digits.
//! - Manifest: JSON [`RunManifest`] embedded in (or written next to) every
//!   artifact.

use std::fmt::Write as _;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{Domain, ParamSpace, RawConfig, RawValue, SpaceError, ValidConfig};

pub const TARGET_COLUMN: &str = "y";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("header: {0}")]
    Header(String),
    #[error("invalid rows: {}", format_rows(.0))]
    InvalidRows(Vec<(usize, SpaceError)>),
    #[error("row {row}: target `{cell}` is not a number")]
    BadTarget { row: usize, cell: String },
    #[error("matrix: {0}")]
    Matrix(String),
}

fn format_rows(rows: &[(usize, SpaceError)]) -> String {
    rows.iter()
        .map(|(r, e)| format!("row {r}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Configurations read from a dataset file, with targets when a `y` column
/// is present. Row numbers in errors are 1-based data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub configs: Vec<ValidConfig>,
    pub targets: Option<Vec<f64>>,
}

pub fn read_dataset<R: Read>(space: &ParamSpace, reader: R) -> Result<DatasetFile, IoError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    let has_target = header.last().map(String::as_str) == Some(TARGET_COLUMN);
    let dim_columns = &header[..header.len() - has_target as usize];

    let mut seen = vec![false; space.len()];
    let mut columns = Vec::with_capacity(dim_columns.len());
    for name in dim_columns {
        let i = space
            .index_of(name)
            .map_err(|_| IoError::Header(format!("unknown column `{name}`")))?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(IoError::Header(format!("duplicate column `{name}`")));
        }
        columns.push(i);
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(IoError::Header(format!(
            "missing column for dimension `{}`",
            space.dimension(i).id
        )));
    }

    let mut configs = Vec::new();
    let mut targets = Vec::new();
    let mut bad = Vec::new();
    for (k, record) in csv.records().enumerate() {
        let row = k + 1;
        let record = record?;
        let mut raw = RawConfig::new();
        let mut cell_error = None;
        for (col, &i) in columns.iter().enumerate() {
            let cell = record.get(col).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let dim = space.dimension(i);
            let value = match dim.domain {
                Domain::Real(_) => match cell.parse::<f64>() {
                    Ok(x) => RawValue::Number(x),
                    Err(_) => {
                        cell_error.get_or_insert(SpaceError::TypeMismatch {
                            id: dim.id.clone(),
                            expected: "real",
                        });
                        continue;
                    }
                },
                Domain::Categorical(_) => RawValue::Symbol(cell.to_string()),
            };
            raw.insert(dim.id.clone(), value);
        }
        if has_target {
            let cell = record.get(columns.len()).unwrap_or("").trim();
            match cell.parse::<f64>() {
                Ok(y) if y.is_finite() => targets.push(y),
                _ => {
                    return Err(IoError::BadTarget {
                        row,
                        cell: cell.to_string(),
                    })
                }
            }
        }
        match cell_error.map_or_else(|| space.validate_config(&raw), Err) {
            Ok(c) => configs.push(c),
            Err(e) => bad.push((row, e)),
        }
    }
    if !bad.is_empty() {
        return Err(IoError::InvalidRows(bad));
    }
    Ok(DatasetFile {
        configs,
        targets: has_target.then_some(targets),
    })
}

/// Writes configs in canonical column order. Reals use the shortest
/// representation that parses back to the same value.
pub fn write_dataset<W: Write>(
    space: &ParamSpace,
    configs: &[ValidConfig],
    targets: Option<&[f64]>,
    writer: W,
) -> Result<(), IoError> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = space.dimensions().iter().map(|d| d.id.as_str()).collect();
    if targets.is_some() {
        header.push(TARGET_COLUMN);
    }
    csv.write_record(&header)?;
    for (row, c) in configs.iter().enumerate() {
        let raw = space.to_raw(c);
        let mut record: Vec<String> = space
            .dimensions()
            .iter()
            .map(|d| raw.get(&d.id).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        if let Some(t) = targets {
            record.push(t[row].to_string());
        }
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

/// Row-major CSV with 17 significant digits per entry.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", m[(r, c)]).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>, IoError> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(r, line)| {
            line.split(',')
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|_| IoError::Matrix(format!("row {}: bad entry `{cell}`", r + 1)))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let n = rows.len();
    if n == 0 {
        return Err(IoError::Matrix("empty matrix".into()));
    }
    let cols = rows[0].len();
    if let Some(r) = rows.iter().position(|row| row.len() != cols) {
        return Err(IoError::Matrix(format!("row {} has {} entries, expected {cols}", r + 1, rows[r].len())));
    }
    Ok(DMatrix::from_fn(n, cols, |r, c| rows[r][c]))
}

/// Provenance attached to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spec_digest: Option<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, version: &str) -> Self {
        Self {
            tool: "archk".into(),
            version: version.into(),
            subcommand: subcommand.into(),
            inputs: Vec::new(),
            seed: None,
            spec_digest: None,
        }
    }

    pub fn input(mut self, path: impl Into<String>) -> Self {
        self.inputs.push(path.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn spec_digest(mut self, digest: impl Into<String>) -> Self {
        self.spec_digest = Some(digest.into());
        self
    }
}
