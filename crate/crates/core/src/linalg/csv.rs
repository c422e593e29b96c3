//! Plain CSV matrices: one row per line, `,` separator, `.` decimal point,
//! no header. Values are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::matrix::DenseMatrix;
use super::LinalgError;

pub fn write_csv<W: Write>(m: &DenseMatrix, mut out: W) -> Result<(), LinalgError> {
    let mut line = String::new();
    for r in 0..m.rows() {
        line.clear();
        for (c, v) in m.row(r).iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:?}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<DenseMatrix, LinalgError> {
    let reader = BufReader::new(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| LinalgError::Csv {
                    line: i + 1,
                    message: format!("cannot parse {tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(LinalgError::Csv {
                    line: i + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

pub fn write_csv_file(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<(), LinalgError> {
    write_csv(m, BufWriter::new(File::create(path)?))
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<DenseMatrix, LinalgError> {
    read_csv(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in proptest::collection::vec(-1e300f64..1e300, 12)) {
            let m = DenseMatrix::from_vec(3, 4, values).unwrap();
            let mut buf = Vec::new();
            write_csv(&m, &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = read_csv("1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LinalgError::Csv { line: 2, .. }));
    }
}
