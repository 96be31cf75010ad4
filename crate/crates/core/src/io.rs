//! Numeric matrices as comma-separated text.
//!
//! A first row with any non-numeric field is taken as a header. Every data
//! row must have the same width; line and column numbers in errors are
//! 1-based.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub header: Option<Vec<String>>,
    pub cloud: PointCloud,
}

fn parse_error(line: u64, column: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        column,
        msg: msg.into(),
    }
}

fn is_header(record: &csv::StringRecord) -> bool {
    record.iter().any(|f| f.parse::<f64>().is_err())
}

pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut width = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, 1, e.to_string())
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if i == 0 && is_header(&record) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(parse_error(
                line,
                record.len().min(w) + 1,
                format!("expected {w} fields, found {}", record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(line, j + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(line, j + 1, format!("`{field}` is not finite")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let d = width.unwrap_or(0);
    if rows == 0 {
        return Err(Error::EmptyCloud { n: 0, d });
    }
    Ok(Matrix {
        header,
        cloud: PointCloud::new(data, rows, d)?,
    })
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

/// `x1, …, xd` unless a header is given. Values use the shortest form that
/// reads back to the same `f64`, with an exponent for extreme magnitudes.
pub fn matrix_to_csv(cloud: &PointCloud, header: Option<&[String]>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    match header {
        Some(h) => {
            if h.len() != cloud.d() {
                return Err(Error::DimensionMismatch {
                    x: h.len(),
                    y: cloud.d(),
                });
            }
            w.write_record(h).map_err(io)?;
        }
        None => w.write_record((1..=cloud.d()).map(|j| format!("x{j}"))).map_err(io)?,
    }
    for row in cloud.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_matrix_csv(path: &Path, cloud: &PointCloud, header: Option<&[String]>) -> Result<()> {
    std::fs::write(path, matrix_to_csv(cloud, header)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_detected() {
        let m = parse_matrix_csv("a,b\n1,2\n3,4.5\n").unwrap();
        assert_eq!(m.header, Some(vec!["a".to_string(), "b".to_string()]));
        assert_eq!(m.cloud.n(), 2);
        assert_eq!(m.cloud.row(1), &[3.0, 4.5]);
        let m = parse_matrix_csv("1, 2\n-3e2,4\n").unwrap();
        assert_eq!(m.header, None);
        assert_eq!(m.cloud.row(1), &[-300.0, 4.0]);
    }

    #[test]
    fn errors_carry_location() {
        match parse_matrix_csv("x,y\n1,2\n3,oops\n") {
            Err(Error::Parse { line: 3, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_matrix_csv("1,2\n3\n") {
            Err(Error::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_matrix_csv("1,2\n3,NaN\n") {
            Err(Error::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_matrix_csv("a,b\n"), Err(Error::EmptyCloud { .. })));
        assert!(matches!(parse_matrix_csv(""), Err(Error::EmptyCloud { .. })));
    }

    #[test]
    fn only_the_first_row_can_be_a_header() {
        assert!(matches!(
            parse_matrix_csv("1,2\na,b\n"),
            Err(Error::Parse { line: 2, column: 1, .. })
        ));
    }

    #[test]
    fn default_header_and_explicit_header() {
        let c = PointCloud::from_rows(&[[0.1, 2.0], [1e-300, -0.5]]).unwrap();
        assert_eq!(matrix_to_csv(&c, None).unwrap(), "x1,x2\n0.1,2.0\n1e-300,-0.5\n");
        let h = vec!["p".to_string(), "q".to_string()];
        assert!(matrix_to_csv(&c, Some(&h)).unwrap().starts_with("p,q\n"));
        assert!(matrix_to_csv(&c, Some(&h[..1])).is_err());
    }

    proptest! {
        #[test]
        fn written_matrices_read_back_exactly(
            rows in prop::collection::vec(prop::collection::vec(-1e12f64..1e12, 3), 1..20)
        ) {
            let c = PointCloud::from_rows(&rows).unwrap();
            let back = parse_matrix_csv(&matrix_to_csv(&c, None).unwrap()).unwrap();
            prop_assert_eq!(back.cloud, c);
            prop_assert_eq!(back.header.map(|h| h.len()), Some(3));
        }
    }
}
