use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::Dataset;
use crate::error::{EdaError, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| EdaError::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> EdaError {
    EdaError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a headerless numeric CSV, one sample per row, into `d × N` layout.
pub fn load_features(path: &Path) -> Result<DMatrix<f64>> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, i + 1, format!("non-numeric token `{}`", tok.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let dim = rows.first().map(Vec::len).unwrap_or(0);
    if dim == 0 {
        return Err(parse_err(path, 1, "no feature rows"));
    }
    Ok(DMatrix::from_fn(dim, rows.len(), |i, j| rows[j][i]))
}

/// One base-10 integer per line.
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, i + 1, format!("invalid label `{}`", l.trim())))
        })
        .collect()
}

pub fn load_csv(features_path: &Path, labels_path: Option<&Path>) -> Result<Dataset> {
    let features = load_features(features_path)?;
    let labels = match labels_path {
        Some(p) => {
            let labels = load_labels(p)?;
            if labels.len() != features.ncols() {
                return Err(EdaError::Shape(format!(
                    "{} has {} rows but {} has {} labels",
                    features_path.display(),
                    features.ncols(),
                    p.display(),
                    labels.len()
                )));
            }
            Some(labels)
        }
        None => None,
    };
    Dataset::new(features, labels)
}

/// Writes a `d × N` matrix as N rows of d comma-separated values.
///
/// Values use the shortest representation that parses back to the same f64.
pub fn write_features(path: &Path, features: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for col in features.column_iter() {
        let line: Vec<String> = col.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_all(path, out.as_bytes())
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    write_all(path, out.as_bytes())
}

pub(crate) fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| EdaError::io(path, e))?;
    f.write_all(bytes).map_err(|e| EdaError::io(path, e))
}
