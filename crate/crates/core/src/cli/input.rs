//! CSV ingestion with declared column roles.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::data::{Dataset, DatasetBuilder};

use super::CliError;

/// Which CSV columns play which role.
#[derive(Debug, Clone)]
pub struct InputSchema {
    pub biomarker: String,
    pub covariates: Vec<String>,
    pub verified: String,
    pub disease: String,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::Input(format!("column '{name}' not found in header")))
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na")
}

fn parse_flag(cell: &str, what: &str, line: usize) -> Result<bool, CliError> {
    match cell.trim() {
        "1" | "1.0" => Ok(true),
        "0" | "0.0" => Ok(false),
        other => Err(CliError::Input(format!(
            "row {line}: {what} must be 0 or 1, got '{other}'"
        ))),
    }
}

fn parse_real(cell: &str, what: &str, line: usize) -> Result<f64, CliError> {
    let v: f64 = cell.trim().parse().map_err(|_| {
        CliError::Input(format!("row {line}: cannot parse {what} value '{}'", cell.trim()))
    })?;
    if !v.is_finite() {
        return Err(CliError::Input(format!("row {line}: non-finite {what} value '{}'", cell.trim())));
    }
    Ok(v)
}

/// Reads a dataset. Row numbers in errors are file line numbers (header = 1).
pub fn read_dataset<R: Read>(reader: R, schema: &InputSchema) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::Input("empty input: header row required".into()));
    }
    let xi = column(&headers, &schema.biomarker)?;
    let vi: Vec<usize> = schema
        .covariates
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<_, _>>()?;
    let ri = column(&headers, &schema.verified)?;
    let yi = column(&headers, &schema.disease)?;

    let mut builder = DatasetBuilder::new(vi.len());
    let mut v = vec![0.0; vi.len()];
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| CliError::Input(format!("row {line}: {e}")))?;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let x = parse_real(cell(xi), &schema.biomarker, line)?;
        for (slot, (&j, name)) in v.iter_mut().zip(vi.iter().zip(&schema.covariates)) {
            *slot = parse_real(cell(j), name, line)?;
        }
        let r = parse_flag(cell(ri), &schema.verified, line)?;
        let y = if is_missing(cell(yi)) {
            None
        } else {
            Some(parse_flag(cell(yi), &schema.disease, line)?)
        };
        match (r, y) {
            (false, Some(_)) => {
                return Err(CliError::Input(format!(
                    "row {line}: disease status present on an unverified row"
                )))
            }
            (true, None) => {
                return Err(CliError::Input(format!(
                    "row {line}: verified row has no disease status"
                )))
            }
            _ => {}
        }
        builder
            .push(x, &v, r, y)
            .map_err(|e| CliError::Input(format!("row {line}: {e}")))?;
    }
    builder
        .finish()
        .map_err(|_| CliError::Input("input has a header but no data rows".into()))
}

pub fn read_dataset_file(path: &Path, schema: &InputSchema) -> Result<Dataset, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    read_dataset(file, schema)
}
