use crate::CliError;
use sparsevine::genomics::SnpMatrix;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

/// A numeric CSV table stored by column.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers.iter().position(|h| h == name).map(|j| self.columns[j].as_slice())
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: row {} column {}: '{cell}' is not a number",
                    path.display(),
                    i + 1,
                    headers[j]
                ))
            })?;
            columns[j].push(v);
        }
    }
    Ok(Table { headers, columns })
}

pub fn write_table<W: Write>(out: W, headers: &[String], columns: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(headers).map_err(|e| CliError::Output(e.to_string()))?;
    let n = columns.first().map_or(0, Vec::len);
    for i in 0..n {
        w.write_record(columns.iter().map(|c| c[i].to_string()))
            .map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

/// Reads an SVM1 binary matrix, or a CSV of 0/2 values with an optional `id` column.
pub fn read_snps(path: &Path) -> Result<SnpMatrix, CliError> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(b"SVM1") {
        return Ok(SnpMatrix::read_svm1(bytes.as_slice())?);
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let headers: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let id_col = headers.iter().position(|h| h.eq_ignore_ascii_case("id"));
    let col_ids: Vec<String> = headers.iter().enumerate().filter(|(j, _)| Some(*j) != id_col).map(|(_, h)| h.clone()).collect();
    let mut columns = vec![Vec::new(); col_ids.len()];
    let mut row_ids = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        row_ids.push(id_col.map_or_else(|| (i + 1).to_string(), |j| rec[j].to_string()));
        let mut k = 0;
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == id_col {
                continue;
            }
            let v: u8 = cell.parse().map_err(|_| {
                CliError::Input(format!(
                    "SNP value '{cell}' at row {} column {} is not 0 or 2",
                    row_ids[i], col_ids[k]
                ))
            })?;
            columns[k].push(v);
            k += 1;
        }
    }
    Ok(SnpMatrix::with_ids(columns, col_ids, row_ids)?)
}
