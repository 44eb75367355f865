//! CSV input and output.
//!
//! A file holds a rectangular numeric grid with an optional header row and
//! an optional label column. Both are detected from the cells themselves: a
//! first record with any non-numeric cell past the first column is a header,
//! and a non-numeric first cell in a data row marks a label column.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, Matrix};

/// How rows of the file map onto the N x T matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsvLayout {
    /// One variable (ROI) per row, one sample per column.
    #[default]
    RowsAreVariables,
    /// One sample per row; the grid is transposed on load.
    RowsAreSamples,
}

fn is_numeric(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Parse CSV text. `path` is only used in error messages.
pub fn parse_csv(text: &str, path: &Path, layout: CsvLayout) -> Result<DataMatrix> {
    let empty = || Error::EmptyFile { path: path.to_path_buf() };
    if text.trim().is_empty() {
        return Err(empty());
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        records.push((line, rec));
    }
    let mut iter = records.into_iter().peekable();
    if let Some((_, first)) = iter.peek() {
        if first.iter().skip(1).any(|c| !is_numeric(c)) {
            iter.next();
        }
    }
    let data: Vec<_> = iter.collect();
    let Some((_, first)) = data.first() else { return Err(empty()) };
    let labelled = !is_numeric(&first[0]);
    let width = first.len();
    let skip = usize::from(labelled);

    let mut labels = Vec::new();
    let mut rows = Vec::with_capacity(data.len());
    for (line, rec) in &data {
        if rec.len() != width {
            return Err(Error::RaggedRows { line: *line, expected: width, found: rec.len() });
        }
        if labelled {
            labels.push(rec[0].trim().to_string());
        }
        let row = rec
            .iter()
            .enumerate()
            .skip(skip)
            .map(|(j, c)| {
                c.trim().parse::<f64>().map_err(|_| Error::NonNumericCell {
                    line: *line,
                    column: j + 1,
                    cell: c.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let values = Matrix::from_rows(&rows)?;
    match layout {
        CsvLayout::RowsAreVariables => DataMatrix::with_labels(values, labelled.then_some(labels)),
        // labels name samples here, which the matrix does not carry
        CsvLayout::RowsAreSamples => DataMatrix::new(values.transpose()),
    }
}

pub fn read_csv(path: &Path, layout: CsvLayout) -> Result<DataMatrix> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, path, layout)
}

/// Render one row per variable, labels first when present. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn csv_string(m: &DataMatrix) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..m.n_vars() {
        let mut rec: Vec<String> = Vec::with_capacity(m.n_samples() + 1);
        if let Some(labels) = m.row_labels() {
            rec.push(labels[i].clone());
        }
        rec.extend(m.row(i).iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(m: &DataMatrix, path: &Path) -> Result<()> {
    fs::write(path, csv_string(m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<DataMatrix> {
        parse_csv(text, Path::new("t.csv"), CsvLayout::RowsAreVariables)
    }

    #[test]
    fn plain_grid() {
        let m = parse("1,2,3\n4,5,6.5e1\n").unwrap();
        assert_eq!((m.n_vars(), m.n_samples()), (2, 3));
        assert_eq!(m.row(1), &[4.0, 5.0, 65.0]);
        assert!(m.row_labels().is_none());
    }

    #[test]
    fn header_and_labels() {
        let m = parse("roi,t0,t1,t2\na,1,2,3\nb,4,5,6\n").unwrap();
        assert_eq!(m.row_labels().unwrap(), ["a", "b"]);
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0]);
        let m = parse("t0,t1\n1,2\n3,4\n").unwrap();
        assert_eq!(m.n_vars(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse("1,2,3\n4,5\n"), Err(Error::RaggedRows { line: 2, expected: 3, found: 2 })));
        match parse("1,2\n3,x\n") {
            Err(Error::NonNumericCell { line, column, cell }) => {
                assert_eq!((line, column, cell.as_str()), (2, 2, "x"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse(""), Err(Error::EmptyFile { .. })));
        assert!(matches!(parse("a,b,c\n"), Err(Error::EmptyFile { .. })));
    }

    #[test]
    fn transposed_layout() {
        let m = parse_csv("1,2\n3,4\n5,6\n", Path::new("t"), CsvLayout::RowsAreSamples).unwrap();
        assert_eq!((m.n_vars(), m.n_samples()), (2, 3));
        assert_eq!(m.row(0), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn round_trip() {
        let m = parse("r1,0.1,-2.5e-9,3\nr2,1e300,4,0.30000000000000004\n").unwrap();
        let back = parse(&csv_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
