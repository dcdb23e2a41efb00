use std::path::Path;
use std::str::FromStr;

use super::{DataError, Dataset, Result, Targets};
use crate::engine::Tensor;

/// Target column, by zero-based index or by header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(s.to_string()),
        })
    }
}

impl std::fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Index(i) => write!(f, "{i}"),
            Self::Name(n) => f.write_str(n),
        }
    }
}

/// Reads a rectangular numeric CSV. The first row is treated as a header
/// when any of its cells fails to parse as a number. Row order is kept.
pub fn load_csv_regression(path: &Path, target: &ColumnRef) -> Result<Dataset> {
    let io_err = |e: &dyn std::fmt::Display| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(&e))?;

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_err(&e))?;
        let line = i + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if header.is_none() && rows.is_empty() && parsed.iter().any(Option::is_none) {
            width = record.len();
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        if width == 0 {
            width = record.len();
        }
        if record.len() != width {
            return Err(DataError::Ragged {
                line,
                expected: width,
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(width);
        for (column, (cell, value)) in record.iter().zip(parsed).enumerate() {
            match value.filter(|v| v.is_finite()) {
                Some(v) => row.push(v),
                None => {
                    return Err(DataError::NonNumeric {
                        line,
                        column,
                        cell: cell.to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }

    let target_idx = match target {
        ColumnRef::Index(i) if *i < width => *i,
        ColumnRef::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| DataError::MissingTargetColumn(name.clone()))?,
        other => return Err(DataError::MissingTargetColumn(other.to_string())),
    };
    if rows.is_empty() {
        return Err(DataError::InvalidArgument(format!("{}: no data rows", path.display())));
    }

    let n = rows.len();
    let d = width - 1;
    let mut features = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    for row in rows {
        for (j, v) in row.into_iter().enumerate() {
            if j == target_idx {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let features = Tensor::new(vec![n, d], features).expect("rectangular rows");
    let targets = Tensor::new(vec![n, 1], targets).expect("one target per row");
    Dataset::new(features, Targets::Values(targets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_rows() {
        let f = file("1,2,3\n4,5,6\n");
        let ds = load_csv_regression(f.path(), &ColumnRef::Index(2)).unwrap();
        assert_eq!(ds.features, Tensor::from_rows(&[vec![1.0, 2.0], vec![4.0, 5.0]]).unwrap());
        assert_eq!(ds.values().unwrap().data(), &[3.0, 6.0]);
    }

    #[test]
    fn header_is_skipped_and_named_target_works() {
        let f = file("a,b,c\n1,2,3\n4,5,6\n");
        let ds = load_csv_regression(f.path(), &ColumnRef::Index(2)).unwrap();
        assert_eq!(ds.len(), 2);
        let ds = load_csv_regression(f.path(), &"a".parse().unwrap()).unwrap();
        assert_eq!(ds.values().unwrap().data(), &[1.0, 4.0]);
        assert_eq!(ds.features.data(), &[2.0, 3.0, 5.0, 6.0]);
    }

    #[test]
    fn errors() {
        let f = file("1,2,3\n4,5\n");
        assert!(matches!(
            load_csv_regression(f.path(), &ColumnRef::Index(0)),
            Err(DataError::Ragged { line: 2, .. })
        ));
        let f = file("1,2,3\n4,x,6\n");
        assert!(matches!(
            load_csv_regression(f.path(), &ColumnRef::Index(0)),
            Err(DataError::NonNumeric { line: 2, column: 1, .. })
        ));
        let f = file("1,2,3\n");
        assert!(matches!(
            load_csv_regression(f.path(), &ColumnRef::Index(3)),
            Err(DataError::MissingTargetColumn(_))
        ));
        assert!(matches!(
            load_csv_regression(f.path(), &ColumnRef::Name("y".into())),
            Err(DataError::MissingTargetColumn(_))
        ));
        assert!(matches!(
            load_csv_regression(Path::new("/nonexistent/x.csv"), &ColumnRef::Index(0)),
            Err(DataError::Io { .. })
        ));
    }
}
