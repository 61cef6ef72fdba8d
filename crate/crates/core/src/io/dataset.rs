//! Dataset CSV: one header row, then numeric rows.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::data::{SampleMatrix, SensitivityDataset};
use crate::error::{Error, Result};

/// A header row and the numeric body of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub values: Array2<f64>,
}

impl Table {
    pub fn select(&self, cols: &[usize]) -> Result<SampleMatrix> {
        let names = cols.iter().map(|&c| self.headers[c].clone()).collect();
        SampleMatrix::new(self.values.select(ndarray::Axis(1), cols), names)
    }
}

/// Comma-separated column names and 1-based ranges such as `1-3` or `5`.
/// A token that is also a header name refers to that column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSelector {
    tokens: Vec<String>,
}

impl ColumnSelector {
    pub fn parse(spec: &str) -> Result<Self> {
        let tokens: Vec<String> = spec.split(',').map(|t| t.trim().to_string()).collect();
        if tokens.iter().any(String::is_empty) {
            return Err(Error::InvalidConfig(format!("empty entry in column selector `{spec}`")));
        }
        Ok(ColumnSelector { tokens })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        ColumnSelector { tokens: names.iter().map(|n| n.as_ref().to_string()).collect() }
    }

    /// Zero-based column positions, in selector order.
    pub fn resolve(&self, headers: &[String]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for token in &self.tokens {
            if let Some(pos) = headers.iter().position(|h| h == token) {
                out.push(pos);
                continue;
            }
            let range = match token.split_once('-') {
                Some((a, b)) => a.trim().parse::<usize>().ok().zip(b.trim().parse::<usize>().ok()),
                None => token.parse::<usize>().ok().map(|a| (a, a)),
            };
            match range {
                Some((a, b)) if a >= 1 && a <= b && b <= headers.len() => out.extend(a - 1..b),
                _ => return Err(Error::MissingColumn(token.clone())),
            }
        }
        let mut seen = vec![false; headers.len()];
        for &c in &out {
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::InvalidConfig(format!("column `{}` selected twice", headers[c])));
            }
        }
        Ok(out)
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    let numeric = !cell.is_empty()
        && cell.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    if !numeric {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a whole numeric CSV. Rows in errors are file line numbers, so the
/// first data row is row 2.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        for (j, cell) in record.iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| Error::NonNumeric { row: line, column: headers[j].clone() })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    let values = Array2::from_shape_vec((rows, headers.len()), data).expect("csv enforces equal record lengths");
    Ok(Table { headers, values })
}

/// Reads a dataset. Without an input selector every column not selected as
/// an output is an input.
pub fn read_dataset_csv(
    path: &Path,
    inputs: Option<&ColumnSelector>,
    outputs: &ColumnSelector,
) -> Result<SensitivityDataset> {
    let table = read_table(path)?;
    let y_cols = outputs.resolve(&table.headers)?;
    let x_cols = match inputs {
        Some(sel) => sel.resolve(&table.headers)?,
        None => (0..table.headers.len()).filter(|c| !y_cols.contains(c)).collect(),
    };
    if let Some(c) = x_cols.iter().find(|c| y_cols.contains(c)) {
        return Err(Error::InvalidConfig(format!("column `{}` is both an input and an output", table.headers[*c])));
    }
    if x_cols.is_empty() || y_cols.is_empty() {
        return Err(Error::InvalidConfig("input and output selections must be non-empty".into()));
    }
    SensitivityDataset::new(table.select(&x_cols)?, table.select(&y_cols)?)
}

/// Writes inputs then outputs under one header. Values use the shortest
/// representation that parses back to the same bits.
pub fn write_dataset_csv(path: &Path, ds: &SensitivityDataset) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let names: Vec<&str> = ds.x().names().iter().chain(ds.y().names()).map(String::as_str).collect();
    writer.write_record(&names)?;
    let mut line = Vec::with_capacity(names.len());
    for i in 0..ds.len() {
        line.clear();
        line.extend(ds.x().row(i).iter().chain(ds.y().row(i).iter()).map(|v| v.to_string()));
        writer.write_record(&line)?;
    }
    out.write_all(&writer.into_inner().map_err(|e| e.into_error())?)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows_one_input_two_outputs() {
        let f = file("a,b,c\n1,2,3\n4,5,6\n7,8,10\n");
        let ds = read_dataset_csv(f.path(), Some(&ColumnSelector::parse("a").unwrap()), &ColumnSelector::parse("b,c").unwrap())
            .unwrap();
        assert_eq!((ds.len(), ds.input_dim(), ds.output_dim()), (3, 1, 2));
        assert_eq!(ds.y().values()[[2, 1]], 10.0);
        assert_eq!(ds.y().names(), ["b", "c"]);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let f = file("a,b,c\n1,abc,3\n4,5,6\n");
        let err = read_dataset_csv(f.path(), None, &ColumnSelector::parse("c").unwrap()).unwrap_err();
        assert_eq!(err.to_string(), "non-numeric at row 2, column b");
        let f = file("a,b\n1,2\n3,nan\n");
        assert!(matches!(read_table(f.path()), Err(Error::NonNumeric { row: 3, .. })));
        let f = file("a,b\n1,2\n3,\n");
        assert!(matches!(read_table(f.path()), Err(Error::NonNumeric { .. })));
    }

    #[test]
    fn crlf_matches_lf() {
        let lf = read_table(file("x,y\n1.5,2\n-3e-2,4\n").path()).unwrap();
        let crlf = read_table(file("x,y\r\n1.5,2\r\n-3e-2,4\r\n").path()).unwrap();
        assert_eq!(lf, crlf);
    }

    #[test]
    fn empty_and_header_only_files() {
        assert!(matches!(read_table(file("").path()), Err(Error::EmptyFile(_))));
        assert!(matches!(read_table(file("a,b\n").path()), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matches!(read_table(file("a,b\n1,2\n3\n").path()), Err(Error::Csv(_))));
    }

    #[test]
    fn selectors() {
        let headers: Vec<String> = ["X1", "X2", "X3", "2", "Y"].iter().map(|s| s.to_string()).collect();
        let r = |s: &str| ColumnSelector::parse(s).unwrap().resolve(&headers);
        assert_eq!(r("1-3").unwrap(), vec![0, 1, 2]);
        assert_eq!(r("Y,1").unwrap(), vec![4, 0]);
        // The header named "2" wins over the second column.
        assert_eq!(r("2").unwrap(), vec![3]);
        assert!(matches!(r("Z"), Err(Error::MissingColumn(_))));
        assert!(matches!(r("0-2"), Err(Error::MissingColumn(_))));
        assert!(matches!(r("4-9"), Err(Error::MissingColumn(_))));
        assert!(matches!(r("X1,1"), Err(Error::InvalidConfig(_))));
        assert!(ColumnSelector::parse("a,,b").is_err());
    }

    #[test]
    fn overlapping_selections_are_rejected() {
        let f = file("a,b,c\n1,2,3\n4,5,6\n");
        let err = read_dataset_csv(f.path(), Some(&ColumnSelector::parse("a,b").unwrap()), &ColumnSelector::parse("b").unwrap());
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
        let f = file("a,b\n1,2\n4,5\n");
        let err = read_dataset_csv(f.path(), None, &ColumnSelector::parse("a,b").unwrap());
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn write_then_read_is_exact() {
        let ds = crate::models::gen_linear_gaussian(50, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset_csv(&path, &ds).unwrap();
        let back = read_dataset_csv(&path, None, &ColumnSelector::parse("Y1,Y2").unwrap()).unwrap();
        assert_eq!(back, ds);
    }
}
