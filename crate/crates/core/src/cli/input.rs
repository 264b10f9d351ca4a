//! CSV ingestion, output sinks and run manifests.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::estimators::DataMatrix;

/// Parsed input table with the header (or generated names) and a content hash.
pub struct Table {
    pub names: Option<Vec<String>>,
    pub values: DMatrix<f64>,
    pub sha256: String,
    pub path: PathBuf,
}

pub fn read_table(path: &Path, has_header: bool) -> Result<Table, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let names = if has_header {
        let header = reader.headers().map_err(|e| csv_error(path, e))?;
        Some(header.iter().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::Usage(format!(
                            "{}: line {line}, column {}: '{field}' is not a finite number",
                            path.display(),
                            j + 1
                        ))
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{}: no data rows", path.display())));
    }
    let p = rows[0].len();
    let values = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    Ok(Table {
        names,
        values,
        sha256,
        path: path.to_owned(),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    match line {
        Some(l) => CliError::Usage(format!("{}: line {l}: {e}", path.display())),
        None => CliError::Usage(format!("{}: {e}", path.display())),
    }
}

impl Table {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// Resolves a column given by header name or 0-based index.
    pub fn column_index(&self, key: &str) -> Result<usize, CliError> {
        if let Some(names) = &self.names {
            if let Some(pos) = names.iter().position(|n| n == key) {
                return Ok(pos);
            }
        }
        match key.parse::<usize>() {
            Ok(i) if i < self.p() => Ok(i),
            _ => Err(CliError::Usage(format!(
                "--covariates: unknown column '{key}'"
            ))),
        }
    }

    pub fn data(&self, cols: &[usize]) -> Result<DataMatrix, CliError> {
        let values = DMatrix::from_fn(self.n(), cols.len(), |i, k| self.values[(i, cols[k])]);
        let x = DataMatrix::new(values).map_err(|e| CliError::hub("ingest", e))?;
        match &self.names {
            Some(names) => x
                .with_names(cols.iter().map(|&c| names[c].clone()).collect())
                .map_err(|e| CliError::hub("ingest", e)),
            None => Ok(x),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFingerprint {
    pub path: String,
    pub n: usize,
    pub p: usize,
    pub sha256: String,
}

impl InputFingerprint {
    pub fn of(t: &Table) -> Self {
        Self {
            path: t.path.display().to_string(),
            n: t.n(),
            p: t.p(),
            sha256: t.sha256.clone(),
        }
    }
}

/// Provenance attached to every result.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub params: serde_json::Value,
    pub input: Option<InputFingerprint>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(
        command: &[String],
        params: serde_json::Value,
        input: Option<InputFingerprint>,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_vec(),
            params,
            input,
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }
}

/// Writes to `path`, or standard output when absent.
pub fn with_output<F>(path: Option<&Path>, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => {
            let file = fs::File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = io::BufWriter::new(file);
            f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    with_output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}
