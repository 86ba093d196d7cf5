//! CSV ingestion and output. Inputs are comma-separated with a header row and
//! plain names; every float is written with 17 significant digits so that
//! re-parsing reproduces it exactly.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use metabvs::linmodel::Dataset;
use metabvs::priors::MetaCovariates;
use nalgebra::DMatrix;

use crate::error::CliError;
use crate::settings::valid_name;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header and numeric body of a CSV file whose first column may be textual.
struct Table {
    header: Vec<String>,
    first: Vec<String>,
    values: Vec<Vec<f64>>,
}

fn read_table(path: &Path, text_first: bool) -> Result<Table, CliError> {
    let shown = path.display().to_string();
    let malformed = |message: String| CliError::Malformed {
        path: shown.clone(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| malformed(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if let Some(bad) = header.iter().find(|h| !valid_name(h)) {
        return Err(malformed(format!("column name '{bad}' must match [A-Za-z0-9_]+")));
    }
    let mut first = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let line = i + 2;
        let mut fields = record.iter();
        if text_first {
            first.push(fields.next().unwrap_or("").to_string());
        }
        let row = fields
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(malformed(format!("line {line}: '{f}' is not a finite number"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        values.push(row);
    }
    Ok(Table { header, first, values })
}

/// Reads `y, x1..xp`; returns the covariate names and the raw data.
pub fn read_data(path: &Path) -> Result<(Vec<String>, Dataset), CliError> {
    let t = read_table(path, false)?;
    if t.header.first().map(String::as_str) != Some("y") {
        return Err(CliError::Malformed {
            path: path.display().to_string(),
            message: "first column must be named y".into(),
        });
    }
    let names = t.header[1..].to_vec();
    if names.is_empty() || t.values.is_empty() {
        return Err(CliError::Dimension(format!(
            "{} has {} rows and {} covariates; need at least one of each",
            path.display(),
            t.values.len(),
            names.len()
        )));
    }
    let y = t.values.iter().map(|r| r[0]).collect();
    let rows: Vec<Vec<f64>> = t.values.iter().map(|r| r[1..].to_vec()).collect();
    Ok((names, Dataset::from_rows(y, &rows)?))
}

/// Reads `covariate, z1..zq`, reorders rows to match `names` and appends the
/// intercept. Without a file every covariate shares an intercept-only prior.
pub fn read_meta(path: Option<&Path>, names: &[String]) -> Result<(Vec<String>, MetaCovariates), CliError> {
    let Some(path) = path else {
        return Ok((vec!["intercept".into()], MetaCovariates::intercept_only(names.len())));
    };
    let t = read_table(path, true)?;
    if t.header.first().map(String::as_str) != Some("covariate") {
        return Err(CliError::Malformed {
            path: path.display().to_string(),
            message: "first column must be named covariate".into(),
        });
    }
    if t.values.len() != names.len() {
        return Err(CliError::Dimension(format!(
            "{} has {} rows but the data have {} covariates",
            path.display(),
            t.values.len(),
            names.len()
        )));
    }
    let position: HashMap<&str, usize> = t.first.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if position.len() != t.first.len() {
        return Err(CliError::Dimension(format!("{} lists a covariate twice", path.display())));
    }
    let order = names
        .iter()
        .map(|n| {
            position.get(n.as_str()).copied().ok_or_else(|| {
                CliError::Dimension(format!("covariate '{n}' is missing from {}", path.display()))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let q = t.header.len() - 1;
    let mut term_names = vec!["intercept".to_string()];
    term_names.extend(t.header[1..].iter().cloned());
    if q == 0 {
        return Ok((term_names, MetaCovariates::intercept_only(names.len())));
    }
    let raw = DMatrix::from_fn(names.len(), q, |i, k| t.values[order[i]][k]);
    for (k, col) in raw.column_iter().enumerate() {
        if col.iter().all(|&v| v == col[0]) {
            return Err(CliError::Dimension(format!(
                "meta-covariate {} is constant; the intercept is added automatically",
                t.header[k + 1]
            )));
        }
    }
    Ok((term_names, MetaCovariates::with_intercept(&raw)))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let err = |e: &dyn std::fmt::Display| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(&e))?;
    w.write_record(header).map_err(|e| err(&e))?;
    for row in rows {
        w.write_record(row).map_err(|e| err(&e))?;
    }
    w.flush().map_err(|e| err(&e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
