use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use seed_core::Matrix;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Reads a numeric CSV matrix, one observation per row.
///
/// A first row with any non-numeric field is taken as a header and skipped.
pub fn read_matrix(path: &Path) -> CliResult<Matrix> {
    let rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Matrix::from_rows(&rows).map_err(|e| CliError::from(e).context(path.display()))
}

/// A 0/1 (or true/false) adjacency matrix.
pub fn read_adjacency(path: &Path) -> CliResult<Array2<bool>> {
    let m = read_matrix(path)?;
    let a = m.as_array();
    if let Some(v) = a.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(CliError::input(format!(
            "{}: adjacency entries must be 0 or 1, found {v}",
            path.display()
        )));
    }
    Ok(a.mapv(|v| v != 0.0))
}

fn read_rows(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(parse_field).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if line == 0 => {}
            Err(field) => {
                return Err(CliError::input(format!(
                    "{}: line {}: cannot parse {field:?} as a number",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    Ok(rows)
}

fn parse_field(field: &str) -> Result<f64, String> {
    match field {
        "true" => Ok(1.0),
        "false" => Ok(0.0),
        _ => field.parse::<f64>().map_err(|_| field.to_string()),
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

pub fn matrix_csv(a: &Array2<f64>) -> String {
    let mut out = String::with_capacity(a.len() * 20);
    for row in a.rows() {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, a: &Array2<f64>) -> CliResult<()> {
    write_atomic(path, matrix_csv(a).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes to a temporary file in the target directory, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let fail = |e: std::io::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn header_is_detected_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("a.csv");
        let without = dir.path().join("b.csv");
        fs::write(&with, "x1, x2\n1,2\n3,4\n").unwrap();
        fs::write(&without, "1,2\n3,4\n").unwrap();
        let a = read_matrix(&with).unwrap();
        let b = read_matrix(&without).unwrap();
        assert_eq!(a.as_array(), b.as_array());
        assert_eq!(a.as_array(), &array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn bad_field_after_header_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "1,2\n3,oops\n").unwrap();
        let e = read_matrix(&p).unwrap_err();
        assert!(e.message.contains("line 2"), "{}", e.message);
    }

    #[test]
    fn empty_and_ragged_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "").unwrap();
        assert!(read_matrix(&p).is_err());
        fs::write(&p, "a,b\n").unwrap();
        assert!(read_matrix(&p).is_err());
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix(&p).is_err());
    }

    #[test]
    fn values_round_trip_exactly() {
        let a = array![[0.1 + 0.2, -1.0 / 3.0], [1e-300, 123456789.12345679]];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/m.csv");
        write_matrix(&p, &a).unwrap();
        let b = read_matrix(&p).unwrap();
        assert_eq!(b.as_array(), &a);
    }
}
