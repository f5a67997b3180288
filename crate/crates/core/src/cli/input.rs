//! Delimited-text ingestion for `analyze`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lasso::DesignMatrix;

#[derive(Debug)]
pub struct Dataset {
    pub x: DesignMatrix,
    pub y: DVector<f64>,
    pub response: String,
    /// SHA-256 of the raw file bytes.
    pub digest: String,
}

fn sniff_delimiter(bytes: &[u8]) -> u8 {
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or(&[]);
    if first.contains(&b'\t') {
        b'\t'
    } else {
        b','
    }
}

pub fn digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Read a comma- or tab-delimited table with a header row. Every column other
/// than the response and the excluded ones becomes a predictor.
pub fn read_dataset(path: &Path, response: &str, exclude: &[String]) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_dataset(&bytes, response, exclude)
}

pub fn parse_dataset(bytes: &[u8], response: &str, exclude: &[String]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(bytes))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Input(format!("bad header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    for name in std::iter::once(response).chain(exclude.iter().map(String::as_str)) {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::Input(format!("column {name:?} not found in header")));
        }
    }
    let resp_col = headers.iter().position(|h| h == response).unwrap_or(0);
    let predictors: Vec<usize> = (0..headers.len())
        .filter(|&c| c != resp_col && !exclude.contains(&headers[c]))
        .collect();
    if predictors.is_empty() {
        return Err(Error::Input("no predictor columns left".into()));
    }

    let mut y = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("row {}: {e}", i + 2)))?;
        if rec.len() != headers.len() {
            return Err(Error::Dimension(format!(
                "row {} has {} fields, header has {}",
                i + 2,
                rec.len(),
                headers.len()
            )));
        }
        let cell = |c: usize| -> Result<f64> {
            let raw = &rec[c];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Input(format!(
                    "column {:?}, row {}: {raw:?} is not a finite number",
                    headers[c],
                    i + 2
                ))),
            }
        };
        y.push(cell(resp_col)?);
        for &c in &predictors {
            rows.push(cell(c)?);
        }
    }
    let n = y.len();
    let p = predictors.len();
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 data rows, found {n}")));
    }
    let names: Vec<String> = predictors.iter().map(|&c| headers[c].clone()).collect();
    let x = DesignMatrix::new(DMatrix::from_row_slice(n, p, &rows), Some(names))?;
    Ok(Dataset {
        x,
        y: DVector::from_vec(y),
        response: response.to_string(),
        digest: digest(bytes),
    })
}
