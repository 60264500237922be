//! CSV point files.
//!
//! Two layouts share one reader:
//!
//! * point file: header `dim0,dim1,...,dim{N-1}`, one point per row;
//! * ledger file: header `index,dim0,...`, where `index` is the 1-based
//!   emission order of each point.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! file back yields bit-identical values. A file whose first line is numeric is
//! read as a headerless point file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PointFileError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{path}: file is empty")]
    Empty { path: PathBuf },
    #[error("{path}: bad header {header:?} (expected `dim0,dim1,...` optionally preceded by `index`)")]
    BadHeader { path: PathBuf, header: String },
    #[error("{path}, row {row}: expected {expected} fields, found {found}")]
    Ragged {
        path: PathBuf,
        row: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}, row {row}: cannot parse {field:?} as a number")]
    Parse { path: PathBuf, row: u64, field: String },
    #[error("{path}, row {row}: value {field:?} is not finite")]
    NonFinite { path: PathBuf, row: u64, field: String },
    #[error("{path}, row {row}: {message}")]
    Malformed { path: PathBuf, row: u64, message: String },
}

impl PointFileError {
    /// True for failures of the filesystem itself rather than of the content.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::Read { .. } | Self::Write { .. })
    }
}

/// Contents of a point or ledger file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointTable {
    /// Present for ledger files.
    pub indices: Option<Vec<u64>>,
    pub points: Vec<Vec<f64>>,
    /// Number of coordinates per point (taken from the header when there are no rows).
    pub dim: usize,
}

pub fn read_point_table(path: &Path) -> Result<PointTable, PointFileError> {
    let file = File::open(path).map_err(|source| PointFileError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = reader.records();
    let first = match records.next() {
        None => {
            return Err(PointFileError::Empty {
                path: path.to_path_buf(),
            })
        }
        Some(r) => r.map_err(|e| csv_error(path, e))?,
    };

    let mut table = PointTable::default();
    let mut pending = None;
    let headerless = first.iter().all(|f| f.parse::<f64>().is_ok());
    if headerless {
        table.dim = first.len();
        pending = Some(first);
    } else {
        let fields: Vec<&str> = first.iter().collect();
        let (has_index, dims) = match fields.first() {
            Some(&"index") => (true, &fields[1..]),
            _ => (false, &fields[..]),
        };
        let valid = !dims.is_empty()
            && dims
                .iter()
                .enumerate()
                .all(|(i, name)| *name == format!("dim{i}"));
        if !valid {
            return Err(PointFileError::BadHeader {
                path: path.to_path_buf(),
                header: fields.join(","),
            });
        }
        table.dim = dims.len();
        if has_index {
            table.indices = Some(Vec::new());
        }
    }

    let width = table.dim + usize::from(table.indices.is_some());
    for record in pending.into_iter().map(Ok).chain(records) {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue; // blank line
        }
        if record.len() != width {
            return Err(PointFileError::Ragged {
                path: path.to_path_buf(),
                row,
                expected: width,
                found: record.len(),
            });
        }
        let mut fields = record.iter();
        if let Some(indices) = table.indices.as_mut() {
            let field = fields.next().unwrap_or_default();
            let idx = field.parse::<u64>().map_err(|_| PointFileError::Parse {
                path: path.to_path_buf(),
                row,
                field: field.to_string(),
            })?;
            indices.push(idx);
        }
        let point = fields
            .map(|field| {
                let v = field.parse::<f64>().map_err(|_| PointFileError::Parse {
                    path: path.to_path_buf(),
                    row,
                    field: field.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(PointFileError::NonFinite {
                        path: path.to_path_buf(),
                        row,
                        field: field.to_string(),
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        table.points.push(point);
    }
    Ok(table)
}

fn csv_error(path: &Path, e: csv::Error) -> PointFileError {
    let row = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => PointFileError::Read {
            path: path.to_path_buf(),
            source,
        },
        other => PointFileError::Malformed {
            path: path.to_path_buf(),
            row,
            message: format!("{other:?}"),
        },
    }
}

/// Renders a point (or ledger, when `indices` is given) table as CSV text.
pub fn render_points<P: AsRef<[f64]>>(points: &[P], indices: Option<&[u64]>, dim: usize) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = Vec::with_capacity(dim + 1);
    if indices.is_some() {
        header.push("index".into());
    }
    header.extend((0..dim).map(|d| format!("dim{d}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for (row, p) in points.iter().enumerate() {
        let mut fields: Vec<String> = Vec::with_capacity(dim + 1);
        if let Some(idx) = indices {
            fields.push(idx[row].to_string());
        }
        fields.extend(p.as_ref().iter().map(|v| format!("{v}")));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partially written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), PointFileError> {
    let write_err = |source: io::Error| PointFileError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(&dir).map_err(write_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        w.write_all(contents.as_bytes()).map_err(write_err)?;
        w.flush().map_err(write_err)?;
    }
    tmp.as_file().sync_all().map_err(write_err)?;
    tmp.persist(path).map_err(|e| write_err(e.error))?;
    Ok(())
}

pub fn write_points<P: AsRef<[f64]>>(path: &Path, points: &[P], dim: usize) -> Result<(), PointFileError> {
    write_atomic(path, &render_points(points, None, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_point_file() {
        let f = file_with("dim0,dim1\n0,0\n1.5,-2\n");
        let t = read_point_table(f.path()).unwrap();
        assert_eq!(t.points, vec![vec![0.0, 0.0], vec![1.5, -2.0]]);
        assert_eq!(t.indices, None);
        assert_eq!(t.dim, 2);
    }

    #[test]
    fn reads_headerless_file() {
        let f = file_with("0,0\n1,1\n");
        let t = read_point_table(f.path()).unwrap();
        assert_eq!(t.points, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn reads_ledger_file() {
        let f = file_with("index,dim0,dim1\n1,0.5,0.25\n2,-1,3\n");
        let t = read_point_table(f.path()).unwrap();
        assert_eq!(t.indices, Some(vec![1, 2]));
        assert_eq!(t.points[1], vec![-1.0, 3.0]);
    }

    #[test]
    fn header_only_is_an_empty_table() {
        let f = file_with("index,dim0,dim1\n");
        let t = read_point_table(f.path()).unwrap();
        assert!(t.points.is_empty());
        assert_eq!(t.dim, 2);
    }

    #[test]
    fn rejects_empty_file() {
        let f = file_with("");
        assert!(matches!(read_point_table(f.path()), Err(PointFileError::Empty { .. })));
    }

    #[test]
    fn rejects_ragged_rows_with_row_number() {
        let f = file_with("dim0,dim1\n0,0\n1\n2,2\n");
        match read_point_table(f.path()) {
            Err(PointFileError::Ragged { row, expected, found, .. }) => {
                assert_eq!((row, expected, found), (3, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_header_and_values() {
        let f = file_with("x,y\n0,0\n");
        assert!(matches!(read_point_table(f.path()), Err(PointFileError::BadHeader { .. })));
        let f = file_with("dim0\n0\nabc\n");
        let err = read_point_table(f.path()).unwrap_err();
        assert!(matches!(err, PointFileError::Parse { row: 3, .. }), "{err}");
        let f = file_with("dim0\nNaN\n");
        assert!(matches!(read_point_table(f.path()), Err(PointFileError::NonFinite { .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_point_table(Path::new("/nonexistent/pts.csv")).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/pts.csv"));
    }

    #[test]
    fn render_layout() {
        let text = render_points(&[[0.1, -2.0]], Some(&[1]), 2);
        assert_eq!(text, "index,dim0,dim1\n1,0.1,-2\n");
    }

    proptest! {
        #[test]
        fn write_then_read_is_bit_exact(
            points in proptest::collection::vec(
                proptest::collection::vec(-1e12f64..1e12, 3), 1..20)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            write_points(&path, &points, 3).unwrap();
            let t = read_point_table(&path).unwrap();
            prop_assert_eq!(t.points, points);
        }
    }
}
